//! Fleet simulation over records joined with predictions, and its tables.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fuel::plan::{is_incident, plan_flight, FuelPlanResult, FuelPolicy};
use crate::fuel::summary::{direction_group, FleetSummary, GroupSummary};
use crate::ingest::FlightRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSimulation {
    /// Policy-major, records in input order within each policy.
    pub results: Vec<FuelPlanResult>,
    /// `(flight_id, reason)` of flights that could not be planned.
    pub skipped: Vec<(String, String)>,
    /// The planning system's own loading, one row per group.
    pub current: Vec<GroupSummary>,
}

/// Plans every record that has a prediction under each policy. Records
/// without a prediction are ignored; records that cannot be planned are
/// reported in `skipped`.
pub fn simulate_fleet(
    records: &[FlightRecord],
    predictions: &HashMap<String, f64>,
    policies: &[FuelPolicy],
    hub: &str,
) -> FleetSimulation {
    let joined: Vec<(&FlightRecord, f64)> = records
        .iter()
        .filter_map(|r| predictions.get(&r.flight_id).map(|&p| (r, p)))
        .collect();
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for policy in policies {
        let planned: Vec<Result<FuelPlanResult>> = joined
            .par_iter()
            .map(|(r, p)| plan_flight(r, *p, policy, direction_group(&r.origin, &r.destination, hub)))
            .collect();
        for (out, (r, _)) in planned.into_iter().zip(&joined) {
            match out {
                Ok(x) => results.push(x),
                Err(e) => {
                    log::warn!("{}: {e}", r.flight_id);
                    skipped.push((r.flight_id.clone(), format!("{}: {e}", policy.name)));
                }
            }
        }
    }
    let mut current: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (r, _) in &joined {
        let e = current.entry(direction_group(&r.origin, &r.destination, hub)).or_default();
        e.0 += 1;
        e.1 += usize::from(is_incident(r.fuel_loading_fps, r.consumed_fuel, r.reserve_fuel));
    }
    let current = current
        .into_iter()
        .map(|(g, (n, inc))| {
            let risk = 100.0 * inc as f64 / n as f64;
            GroupSummary {
                group: g.into(),
                policy: "current".into(),
                flights: n,
                less_carried: 0.0,
                less_carried_pct: 0.0,
                less_consumed: 0.0,
                less_consumed_pct: 0.0,
                incidents: inc,
                risk_pct: risk,
                naive_risk_pct: risk,
            }
        })
        .collect();
    FleetSimulation {
        results,
        skipped,
        current,
    }
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_plan_results(path: &Path, results: &[FuelPlanResult]) -> Result<()> {
    write_csv(
        path,
        results,
        &[
            "flight_id",
            "policy",
            "group",
            "predicted_ft",
            "beta",
            "mission_fuel",
            "proposed_loading",
            "less_carried",
            "ctc",
            "less_consumed",
            "adjusted_consumed",
            "incident",
            "naive_incident",
            "fps_loading",
            "consumed_fuel",
        ],
    )
}

/// Writes `groups.csv` (with the `current` rows first) and `fleet.csv` into
/// `dir`.
pub fn save_fleet_summary(dir: &Path, summary: &FleetSummary, current: &[GroupSummary]) -> Result<()> {
    let mut groups = current.to_vec();
    groups.extend(summary.groups.iter().cloned());
    write_csv(
        &dir.join("groups.csv"),
        &groups,
        &[
            "group",
            "policy",
            "flights",
            "less_carried",
            "less_carried_pct",
            "less_consumed",
            "less_consumed_pct",
            "incidents",
            "risk_pct",
            "naive_risk_pct",
        ],
    )?;
    write_csv(
        &dir.join("fleet.csv"),
        &summary.fleet,
        &["policy", "flights", "fuel_saved_kg", "fuel_saved_pct", "savings_usd", "co2_reduced_kg"],
    )
}
