//! Aggregation of per-flight plans into group and fleet tables, and the
//! fuel-to-money/CO2 conversions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fuel::plan::FuelPlanResult;

/// Conversion constants; the density is per gallon, as used for the
/// published fleet figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelConversion {
    pub density_kg_per_gallon: f64,
    pub co2_kg_per_gallon: f64,
    pub usd_per_gallon: f64,
}

impl Default for FuelConversion {
    fn default() -> Self {
        FuelConversion {
            density_kg_per_gallon: 0.3223,
            co2_kg_per_gallon: 9.75,
            usd_per_gallon: 1.6,
        }
    }
}

impl FuelConversion {
    pub fn gallons(&self, kg: f64) -> f64 {
        kg / self.density_kg_per_gallon
    }

    pub fn co2_kg(&self, fuel_kg: f64) -> f64 {
        self.gallons(fuel_kg) * self.co2_kg_per_gallon
    }

    pub fn usd(&self, fuel_kg: f64) -> f64 {
        self.gallons(fuel_kg) * self.usd_per_gallon
    }
}

/// One (group, policy) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub policy: String,
    pub flights: usize,
    /// kg, and percent of the planning system's total loading
    pub less_carried: f64,
    pub less_carried_pct: f64,
    /// kg, and percent of the recorded total consumption
    pub less_consumed: f64,
    pub less_consumed_pct: f64,
    pub incidents: usize,
    pub risk_pct: f64,
    pub naive_risk_pct: f64,
}

/// Fleet-wide totals for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTotals {
    pub policy: String,
    pub flights: usize,
    pub fuel_saved_kg: f64,
    pub fuel_saved_pct: f64,
    pub savings_usd: f64,
    pub co2_reduced_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSummary {
    pub groups: Vec<GroupSummary>,
    pub fleet: Vec<FleetTotals>,
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

#[derive(Default)]
struct Acc {
    flights: usize,
    less_carried: f64,
    less_consumed: f64,
    fps_loading: f64,
    consumed: f64,
    incidents: usize,
    naive: usize,
}

impl Acc {
    fn add(&mut self, r: &FuelPlanResult) {
        self.flights += 1;
        self.less_carried += r.less_carried;
        self.less_consumed += r.less_consumed;
        self.fps_loading += r.fps_loading;
        self.consumed += r.consumed_fuel;
        self.incidents += usize::from(r.incident);
        self.naive += usize::from(r.naive_incident);
    }
}

/// Totals per (group, policy) and per policy over the fleet, sorted by
/// group then policy name. Results are accumulated in input order.
pub fn fleet_summary(results: &[FuelPlanResult], conv: &FuelConversion) -> FleetSummary {
    let mut groups: BTreeMap<(&str, &str), Acc> = BTreeMap::new();
    let mut fleet: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in results {
        groups.entry((&r.group, &r.policy)).or_default().add(r);
        fleet.entry(&r.policy).or_default().add(r);
    }
    FleetSummary {
        groups: groups
            .into_iter()
            .map(|((g, p), a)| GroupSummary {
                group: g.into(),
                policy: p.into(),
                flights: a.flights,
                less_carried: a.less_carried,
                less_carried_pct: pct(a.less_carried, a.fps_loading),
                less_consumed: a.less_consumed,
                less_consumed_pct: pct(a.less_consumed, a.consumed),
                incidents: a.incidents,
                risk_pct: pct(a.incidents as f64, a.flights as f64),
                naive_risk_pct: pct(a.naive as f64, a.flights as f64),
            })
            .collect(),
        fleet: fleet
            .into_iter()
            .map(|(p, a)| fleet_totals(p, a.flights, a.less_consumed, a.consumed, conv))
            .collect(),
    }
}

/// Converts a fuel saving into money and CO2.
pub fn fleet_totals(policy: &str, flights: usize, saved_kg: f64, consumed_kg: f64, conv: &FuelConversion) -> FleetTotals {
    FleetTotals {
        policy: policy.into(),
        flights,
        fuel_saved_kg: saved_kg,
        fuel_saved_pct: pct(saved_kg, consumed_kg),
        savings_usd: conv.usd(saved_kg),
        co2_reduced_kg: conv.co2_kg(saved_kg),
    }
}

/// `"outbound"` when leaving `hub`, `"inbound"` when arriving, `"other"`
/// otherwise.
pub fn direction_group(origin: &str, destination: &str, hub: &str) -> &'static str {
    if origin == hub {
        "outbound"
    } else if destination == hub {
        "inbound"
    } else {
        "other"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(group: &str, policy: &str, carried: f64, consumed: f64, incident: bool) -> FuelPlanResult {
        FuelPlanResult {
            flight_id: "f".into(),
            policy: policy.into(),
            group: group.into(),
            predicted_ft: 100.0,
            beta: 1e-4,
            mission_fuel: 5000.0,
            proposed_loading: 9000.0,
            less_carried: carried,
            ctc: 1e-7,
            less_consumed: consumed,
            adjusted_consumed: 5000.0,
            incident,
            naive_incident: incident,
            fps_loading: 10_000.0,
            consumed_fuel: 5000.0,
        }
    }

    #[test]
    fn zero_saving_converts_to_zero() {
        let t = fleet_totals("p", 0, 0.0, 0.0, &FuelConversion::default());
        assert_eq!((t.savings_usd, t.co2_reduced_kg, t.fuel_saved_pct), (0.0, 0.0, 0.0));
    }

    #[test]
    fn groups_and_fleet_add_up() {
        let rs = vec![
            result("inbound", "a", 1000.0, 100.0, false),
            result("outbound", "a", 500.0, 50.0, true),
            result("outbound", "b", 200.0, 20.0, false),
        ];
        let s = fleet_summary(&rs, &FuelConversion::default());
        assert_eq!(s.groups.len(), 3);
        let out_a = &s.groups[1];
        assert_eq!((out_a.group.as_str(), out_a.policy.as_str()), ("outbound", "a"));
        assert_eq!(out_a.risk_pct, 100.0);
        assert_eq!(out_a.less_carried_pct, 5.0);
        assert_eq!(out_a.less_consumed_pct, 1.0);
        let a = &s.fleet[0];
        assert_eq!(a.fuel_saved_kg, 150.0);
        assert_eq!(a.flights, 2);
        // additivity over disjoint subsets
        let left = fleet_summary(&rs[..1], &FuelConversion::default()).fleet[0].savings_usd;
        let right = fleet_summary(&rs[1..2], &FuelConversion::default()).fleet[0].savings_usd;
        assert!((left + right - a.savings_usd).abs() < 1e-9);
    }

    #[test]
    fn direction() {
        assert_eq!(direction_group("HUB", "X", "HUB"), "outbound");
        assert_eq!(direction_group("X", "HUB", "HUB"), "inbound");
        assert_eq!(direction_group("X", "Y", "HUB"), "other");
    }
}
