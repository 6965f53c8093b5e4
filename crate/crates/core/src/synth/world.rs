//! World generation.
//!
//! Generative process, per hour `h` and airport `a`:
//!
//! * weather severity `s_a(h)` follows a three-state Markov chain;
//! * congestion `c_a(h) = rho c_a(h-1) + sd_c e + k_w s_a(h)`;
//! * a flight scheduled to leave `a` in hour `h` departs
//!   `max(0, round(c_a(h) + sd_d e))` minutes late;
//! * its enroute time exceeds the plan by
//!   `sum_k g_lk max(0, m_k - theta) + k_e s_dest(arrival hour) + sd_e e`,
//!   where `k` runs over the OD pair's planted airports and `m_k` is the
//!   mean of the hourly mean departure delays at airport `k` over the
//!   `delay_memory_hours` hours before the prediction window anchor,
//!   exactly as the departure-delay block of the delay-state window reports
//!   them.
//!
//! Fuel quantities follow the mission-fuel model with a per-flight burn
//! factor, so the factor recovered from the records equals the drawn one.

use chrono::{DateTime, Datelike, Duration, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::delay::{hour_of, hour_start, mean_minutes};
use crate::features::NetworkIndex;
use crate::ingest::FlightRecord;
use crate::synth::spec::ScenarioSpec;

pub const METADATA_FORMAT_VERSION: u32 = 1;

/// Aircraft types with their zero-fuel-weight ranges (kg).
pub const AIRCRAFT: [(&str, f64, f64); 3] = [
    ("A320", 45_000.0, 60_000.0),
    ("A321", 50_000.0, 68_000.0),
    ("A333", 120_000.0, 170_000.0),
];

/// First hour of the day with scheduled departures, and the span they cover.
const FIRST_DEPARTURE_MINUTE: u32 = 6 * 60;
const SCHEDULE_SPAN_MINUTES: u32 = 16 * 60;
/// Hours of weather and congestion simulated before the first departure.
const SPIN_UP_HOURS: i64 = 48;

/// A departure-delay column planted as relevant for an OD pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedColumn {
    pub airport: String,
    /// Position in the network index's airport list.
    pub airport_index: usize,
    /// Enroute minutes per remembered minute above the threshold.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdTruth {
    pub origin: String,
    pub destination: String,
    pub od_index: usize,
    pub distance_m: f64,
    pub planned_flight_time: f64,
    pub relevant: Vec<PlantedColumn>,
}

/// Arrival-delay statistics of one (origin, destination, aircraft type)
/// group, over the generated flights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub origin: String,
    pub destination: String,
    pub aircraft_type: String,
    pub count: usize,
    pub fdt_mean: f64,
    pub fdt_sd: f64,
}

/// Ground truth written next to a generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldMetadata {
    pub format_version: u32,
    pub spec: ScenarioSpec,
    pub hub: String,
    pub airports: Vec<String>,
    pub ods: Vec<OdTruth>,
    pub coupling_threshold: f64,
    pub delay_memory_hours: usize,
    pub flights: usize,
    pub metar_reports: usize,
    pub fdt_groups: Vec<GroupStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub flights: Vec<FlightRecord>,
    /// One report per airport per hour, each prefixed with its RFC3339 time.
    pub metar: String,
    pub network: NetworkIndex,
    pub metadata: WorldMetadata,
}

/// Airport code for position `i`: `SAAA`, `SAAB`, ...
pub fn airport_code(i: usize) -> String {
    let l = |k: usize| (b'A' + (k % 26) as u8) as char;
    format!("S{}{}{}", l(i / 676), l(i / 26), l(i))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("finite sd").sample(rng)
    } else {
        0.0
    }
}

/// Hub-and-spoke pairs first, then random pairs between outstations.
fn choose_ods(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = spec.n_airports;
    let mut ods: Vec<(usize, usize)> = Vec::with_capacity(spec.n_od);
    for a in 1..n {
        for pair in [(0, a), (a, 0)] {
            if ods.len() < spec.n_od {
                ods.push(pair);
            }
        }
    }
    let mut rest: Vec<(usize, usize)> = (1..n)
        .flat_map(|o| (1..n).filter(move |&d| d != o).map(move |d| (o, d)))
        .collect();
    while ods.len() < spec.n_od {
        let k = rng.random_range(0..rest.len());
        ods.push(rest.swap_remove(k));
    }
    ods
}

struct Layout {
    airports: Vec<String>,
    /// `(origin, destination)` in generation order
    ods: Vec<(usize, usize)>,
    distance: Vec<f64>,
    planned: Vec<i64>,
    relevant: Vec<Vec<(usize, f64)>>,
    /// per OD, per daily slot: (departure minute of day, aircraft type)
    slots: Vec<Vec<(u32, usize)>>,
}

fn layout(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Layout {
    let airports: Vec<String> = (0..spec.n_airports).map(airport_code).collect();
    let ods = choose_ods(spec, rng);
    let mut distance = Vec::with_capacity(ods.len());
    let mut planned = Vec::with_capacity(ods.len());
    let mut relevant = Vec::with_capacity(ods.len());
    let mut slots = Vec::with_capacity(ods.len());
    let per_day = spec.flights_per_od_per_day as u32;
    let gap = SCHEDULE_SPAN_MINUTES / per_day;
    for _ in &ods {
        let d: f64 = rng.random_range(400.0..2000.0) * 1000.0;
        distance.push(d);
        // cruise at roughly 12 km per minute plus climb and descent
        planned.push((d / 12_000.0 + 15.0).round() as i64);
        let cols = sample(rng, spec.n_airports, spec.relevant_columns_per_od).into_vec();
        let mut cols: Vec<(usize, f64)> = cols.into_iter().map(|k| (k, uniform(rng, spec.coupling_gain))).collect();
        cols.sort_by_key(|c| c.0);
        relevant.push(cols);
        let offset = rng.random_range(0..gap.max(1) / 5 + 1) * 5;
        let ty = rng.random_range(0..AIRCRAFT.len());
        slots.push(
            (0..per_day)
                .map(|j| {
                    // the last slot of the day flies a different type now and then
                    let t = if j + 1 == per_day && rng.random_bool(0.5) { (ty + 1) % AIRCRAFT.len() } else { ty };
                    (FIRST_DEPARTURE_MINUTE + j * gap + offset, t)
                })
                .collect(),
        );
    }
    Layout {
        airports,
        ods,
        distance,
        planned,
        relevant,
        slots,
    }
}

/// Per-airport hourly series over the simulated span.
struct Hourly {
    first_hour: i64,
    hours: usize,
    severity: Vec<Vec<u8>>,
    congestion: Vec<Vec<f64>>,
}

fn simulate_hours(spec: &ScenarioSpec, first_hour: i64, hours: usize, rng: &mut ChaCha8Rng) -> Hourly {
    let mut severity = Vec::with_capacity(spec.n_airports);
    let mut congestion = Vec::with_capacity(spec.n_airports);
    for _ in 0..spec.n_airports {
        let mut s = vec![0u8; hours];
        let mut c = vec![0.0; hours];
        let mut state = 0usize;
        let mut level = 0.0;
        for h in 0..hours {
            let row = spec.weather.transition[state];
            let u: f64 = rng.random();
            state = if u < row[0] {
                0
            } else if u < row[0] + row[1] {
                1
            } else {
                2
            };
            s[h] = state as u8;
            level = spec.congestion_persistence * level
                + normal(rng, spec.congestion_shock_sd)
                + spec.weather.congestion_minutes_per_level * state as f64;
            c[h] = level;
        }
        severity.push(s);
        congestion.push(c);
    }
    Hourly {
        first_hour,
        hours,
        severity,
        congestion,
    }
}

impl Hourly {
    fn slot(&self, t: DateTime<Utc>) -> usize {
        let h = hour_of(t) - self.first_hour;
        assert!((0..self.hours as i64).contains(&h), "time outside simulated span");
        h as usize
    }
}

struct Pending {
    od: usize,
    slot: usize,
    sched_dep: DateTime<Utc>,
    dep_delay_min: i64,
}

/// Generates a world from `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticWorld> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lay = layout(spec, &mut rng);
    let first_hour = hour_of(spec.start) - SPIN_UP_HOURS;
    let hours = SPIN_UP_HOURS as usize + (spec.days + 2) * 24;
    let hourly = simulate_hours(spec, first_hour, hours, &mut rng);

    // departures
    let mut pending = Vec::new();
    for day in 0..spec.days {
        let midnight = spec.start + Duration::days(day as i64);
        for (l, slots) in lay.slots.iter().enumerate() {
            for (j, &(minute, _)) in slots.iter().enumerate() {
                let sched_dep = midnight + Duration::minutes(i64::from(minute));
                let origin = lay.ods[l].0;
                let c = hourly.congestion[origin][hourly.slot(sched_dep)];
                let delay = (c + normal(&mut rng, spec.departure_noise_sd)).round().max(0.0) as i64;
                pending.push(Pending {
                    od: l,
                    slot: j,
                    sched_dep,
                    dep_delay_min: delay,
                });
            }
        }
    }

    // hourly departure-delay sums per airport, bucketed by actual departure
    let mut dep_sum = vec![vec![0i64; hours]; spec.n_airports];
    let mut dep_n = vec![vec![0u32; hours]; spec.n_airports];
    for p in &pending {
        let a = lay.ods[p.od].0;
        let h = hourly.slot(p.sched_dep + Duration::minutes(p.dep_delay_min));
        dep_sum[a][h] += p.dep_delay_min * 60;
        dep_n[a][h] += 1;
    }
    let remembered = |a: usize, anchor: DateTime<Utc>| -> f64 {
        let end = hourly.slot(anchor) as i64;
        let m = spec.delay_memory_hours as i64;
        let total: f64 = (1..=m)
            .map(|r| end - r)
            .map(|h| if h >= 0 { mean_minutes(dep_sum[a][h as usize], dep_n[a][h as usize]) } else { 0.0 })
            .sum();
        total / m as f64
    };

    let mut flights = Vec::with_capacity(pending.len());
    for p in &pending {
        let (o, d) = lay.ods[p.od];
        let (_, ty) = lay.slots[p.od][p.slot];
        let planned = lay.planned[p.od];
        let sched_arr = p.sched_dep + Duration::minutes(planned);
        let anchor = hour_start(hour_of(p.sched_dep - Duration::hours(1)));
        let planted: f64 = lay.relevant[p.od]
            .iter()
            .map(|&(k, g)| g * (remembered(k, anchor) - spec.coupling_threshold).max(0.0))
            .sum();
        let wx = spec.weather.enroute_minutes_per_level * f64::from(hourly.severity[d][hourly.slot(sched_arr)]);
        let excess = planted + wx + normal(&mut rng, spec.enroute_noise_sd);
        let ft_secs = ((planned as f64 + excess) * 60.0).round().max(planned as f64 * 30.0) as i64;
        let actual_dep = p.sched_dep + Duration::minutes(p.dep_delay_min);
        let actual_arr = actual_dep + Duration::seconds(ft_secs);

        let fp = &spec.fuel;
        let (type_name, zlo, zhi) = AIRCRAFT[ty];
        let beta = uniform(&mut rng, fp.beta_range);
        let zfw = uniform(&mut rng, (zlo, zhi));
        let taxi = uniform(&mut rng, fp.taxi_kg);
        let reserve = beta * zfw * fp.reserve_minutes;
        let fixed = reserve + beta * zfw * uniform(&mut rng, fp.alternate_minutes);
        let pad = uniform(&mut rng, fp.padding_minutes);
        let r = beta * (planned as f64 + pad);
        let loading = (taxi + fixed + r * zfw) / (1.0 - r);
        let mission = beta * (loading + zfw) * planned as f64;
        let consumed = beta * (loading + zfw) * (ft_secs as f64 / 60.0) + taxi;
        let number = format!("SW{}", 100 + p.od * spec.flights_per_od_per_day + p.slot);
        let date = p.sched_dep.date_naive();
        flights.push(FlightRecord {
            flight_id: format!("{number}-{:04}{:02}{:02}", date.year(), date.month(), date.day()),
            flight_number: number,
            origin: lay.airports[o].clone(),
            destination: lay.airports[d].clone(),
            aircraft_type: type_name.to_string(),
            sched_dep: p.sched_dep,
            sched_arr,
            actual_dep,
            actual_arr,
            planned_flight_time: planned as f64,
            fuel_loading_fps: loading,
            mission_fuel_fps: mission,
            consumed_fuel: consumed,
            reserve_fuel: reserve,
            taxi_fuel: taxi,
            fixed_fuel: fixed,
            zfw,
            distance: lay.distance[p.od],
        });
    }
    flights.sort_by(|a, b| (a.sched_dep, &a.flight_number).cmp(&(b.sched_dep, &b.flight_number)));

    let metar_from = hour_of(spec.start) - 24;
    let metar_to = hour_of(spec.start) + (spec.days as i64 + 2) * 24;
    let mut metar = String::new();
    let mut reports = 0;
    for h in metar_from..metar_to {
        let t = hour_start(h);
        for (a, code) in lay.airports.iter().enumerate() {
            let sev = hourly.severity[a][(h - first_hour) as usize];
            metar.push_str(&crate::synth::metar::render(code, t, sev, &mut rng));
            metar.push('\n');
            reports += 1;
        }
    }

    let mut sorted_airports = lay.airports.clone();
    sorted_airports.sort();
    let mut od_names: Vec<(String, String)> = lay
        .ods
        .iter()
        .map(|&(o, d)| (lay.airports[o].clone(), lay.airports[d].clone()))
        .collect();
    od_names.sort();
    let network = NetworkIndex::new(sorted_airports.clone(), od_names)?;
    let ods = lay
        .ods
        .iter()
        .enumerate()
        .map(|(l, &(o, d))| {
            let (origin, destination) = (lay.airports[o].clone(), lay.airports[d].clone());
            OdTruth {
                od_index: network.od_index(&origin, &destination).expect("indexed"),
                origin,
                destination,
                distance_m: lay.distance[l],
                planned_flight_time: lay.planned[l] as f64,
                relevant: lay.relevant[l]
                    .iter()
                    .map(|&(k, gain)| PlantedColumn {
                        airport: lay.airports[k].clone(),
                        airport_index: network.airport_index(&lay.airports[k]).expect("indexed"),
                        gain,
                    })
                    .collect(),
            }
        })
        .collect();
    let metadata = WorldMetadata {
        format_version: METADATA_FORMAT_VERSION,
        spec: spec.clone(),
        hub: lay.airports[0].clone(),
        airports: sorted_airports,
        ods,
        coupling_threshold: spec.coupling_threshold,
        delay_memory_hours: spec.delay_memory_hours,
        flights: flights.len(),
        metar_reports: reports,
        fdt_groups: group_stats(&flights),
    };
    Ok(SyntheticWorld {
        flights,
        metar,
        network,
        metadata,
    })
}

/// Arrival-delay mean and population sd per (origin, destination, type).
pub fn group_stats(flights: &[FlightRecord]) -> Vec<GroupStat> {
    let mut groups: std::collections::BTreeMap<(&str, &str, &str), Vec<f64>> = Default::default();
    for f in flights {
        groups
            .entry((&f.origin, &f.destination, &f.aircraft_type))
            .or_default()
            .push(f.arrival_delay());
    }
    groups
        .into_iter()
        .map(|((o, d, t), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            GroupStat {
                origin: o.into(),
                destination: d.into(),
                aircraft_type: t.into(),
                count: v.len(),
                fdt_mean: mean,
                fdt_sd: var.sqrt(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuel::{estimate_beta, mission_fuel};

    fn small(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            days: 4,
            ..ScenarioSpec::with_seed(seed)
        }
    }

    #[test]
    fn same_seed_same_world() {
        let a = generate(&small(3)).unwrap();
        let b = generate(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small(4)).unwrap();
        assert_ne!(a.flights, c.flights);
    }

    #[test]
    fn shape_follows_spec() {
        let w = generate(&small(1)).unwrap();
        assert_eq!(w.flights.len(), 4 * 20 * 6);
        assert_eq!(w.network.n_od(), 20);
        assert_eq!(w.network.n_airports(), 10);
        assert!(w.flights.iter().all(|f| f.validate().is_ok()));
        assert_eq!(w.metadata.ods.len(), 20);
        assert!(w.metadata.ods.iter().all(|o| o.relevant.len() == 2));
        assert_eq!(w.metar.lines().count(), w.metadata.metar_reports);
    }

    #[test]
    fn quiet_world_runs_on_time() {
        let w = generate(&ScenarioSpec { days: 3, ..ScenarioSpec::quiet(2) }).unwrap();
        for f in &w.flights {
            assert_eq!(f.actual_dep, f.sched_dep);
            assert_eq!(f.actual_arr, f.sched_arr);
        }
    }

    #[test]
    fn fuel_fields_follow_the_mission_model() {
        let w = generate(&small(5)).unwrap();
        for f in &w.flights {
            let beta = estimate_beta(f).unwrap();
            let m = mission_fuel(beta, f.fuel_loading_fps, f.zfw, f.planned_flight_time);
            assert!((m - f.mission_fuel_fps).abs() <= 1e-9 * f.mission_fuel_fps);
            assert!(f.fixed_fuel >= f.reserve_fuel);
        }
    }

    #[test]
    fn airport_codes_are_icao_shaped() {
        assert_eq!(airport_code(0), "SAAA");
        assert_eq!(airport_code(27), "SABB");
    }
}
