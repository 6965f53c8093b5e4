//! Hourly network delay states.
//!
//! All delays are accumulated as whole seconds and divided once at the end, so
//! every cell is independent of the order in which flights are visited.

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::network::NetworkIndex;
use crate::ingest::FlightRecord;
use crate::nn::Tensor2;

pub const HOUR_SECS: i64 = 3600;

/// Hour number since the Unix epoch of the interval containing `t`.
pub fn hour_of(t: DateTime<Utc>) -> i64 {
    t.timestamp().div_euclid(HOUR_SECS)
}

pub fn floor_hour(t: DateTime<Utc>) -> DateTime<Utc> {
    hour_start(hour_of(t))
}

pub fn hour_start(hour: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(hour * HOUR_SECS, 0)
        .single()
        .expect("hour within chrono range")
}

fn in_interval(t: DateTime<Utc>, start: DateTime<Utc>, end: DateTime<Utc>) -> bool {
    start <= t && t < end
}

fn secs(a: DateTime<Utc>, b: DateTime<Utc>) -> i64 {
    (b - a).num_seconds()
}

/// Mean of whole-second delays in minutes, 0 for an empty set.
pub fn mean_minutes(sum_secs: i64, n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum_secs as f64 / (60.0 * n as f64)
    }
}

/// Mean enroute-time excess `(A_arr - A_dep) - (S_arr - S_dep)` of flights on
/// `origin -> destination` arriving in `[start, end)`.
pub fn od_delay(
    flights: &[FlightRecord],
    origin: &str,
    destination: &str,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> f64 {
    let (sum, n) = flights
        .iter()
        .filter(|f| f.origin == origin && f.destination == destination)
        .filter(|f| in_interval(f.actual_arr, start, end))
        .fold((0i64, 0u32), |(s, n), f| {
            (s + secs(f.actual_dep, f.actual_arr) - secs(f.sched_dep, f.sched_arr), n + 1)
        });
    mean_minutes(sum, n)
}

/// `(arrival_delay, departure_delay)` of `airport` over `[start, end)`.
/// Arrivals are bucketed by actual arrival time, departures by actual
/// departure time. Early operations count negative.
pub fn airport_delays(
    flights: &[FlightRecord],
    airport: &str,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> (f64, f64) {
    let (a_sum, a_n) = flights
        .iter()
        .filter(|f| f.destination == airport && in_interval(f.actual_arr, start, end))
        .fold((0i64, 0u32), |(s, n), f| (s + secs(f.sched_arr, f.actual_arr), n + 1));
    let (d_sum, d_n) = flights
        .iter()
        .filter(|f| f.origin == airport && in_interval(f.actual_dep, start, end))
        .fold((0i64, 0u32), |(s, n), f| (s + secs(f.sched_dep, f.actual_dep), n + 1));
    (mean_minutes(a_sum, a_n), mean_minutes(d_sum, d_n))
}

/// Scheduled `(departures, arrivals)` at `airport` in `[as_of - 1h, as_of)`.
pub fn demand_counts(schedule: &[FlightRecord], airport: &str, as_of: DateTime<Utc>) -> (usize, usize) {
    let start = as_of - chrono::Duration::hours(1);
    let dep = schedule
        .iter()
        .filter(|f| f.origin == airport && in_interval(f.sched_dep, start, as_of))
        .count();
    let arr = schedule
        .iter()
        .filter(|f| f.destination == airport && in_interval(f.sched_arr, start, as_of))
        .count();
    (dep, arr)
}

/// Delay states for the `n_t` hours before `as_of`.
///
/// Row `r` holds the interval `[as_of - (r+1)h, as_of - r h)`, so row 0 is the
/// most recent hour. Count matrices record how many flights fed each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStateWindow {
    pub as_of: DateTime<Utc>,
    pub timestep_hours: u32,
    pub od: Tensor2,
    pub arr: Tensor2,
    pub dep: Tensor2,
    pub od_count: Vec<u32>,
    pub arr_count: Vec<u32>,
    pub dep_count: Vec<u32>,
}

impl DelayStateWindow {
    pub fn zeros(as_of: DateTime<Utc>, n_t: usize, n_od: usize, n_ap: usize) -> Self {
        DelayStateWindow {
            as_of,
            timestep_hours: 1,
            od: Tensor2::zeros(n_t, n_od),
            arr: Tensor2::zeros(n_t, n_ap),
            dep: Tensor2::zeros(n_t, n_ap),
            od_count: vec![0; n_t * n_od],
            arr_count: vec![0; n_t * n_ap],
            dep_count: vec![0; n_t * n_ap],
        }
    }

    pub fn n_t(&self) -> usize {
        self.od.rows()
    }

    pub fn n_od(&self) -> usize {
        self.od.cols()
    }

    pub fn n_ap(&self) -> usize {
        self.arr.cols()
    }

    /// Width of one flattened row: `n_od + 2 n_ap`.
    pub fn row_width(&self) -> usize {
        self.n_od() + 2 * self.n_ap()
    }

    /// Row-major `[od | arr | dep]` per timestep.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_t() * self.row_width());
        for r in 0..self.n_t() {
            out.extend_from_slice(self.od.row(r));
            out.extend_from_slice(self.arr.row(r));
            out.extend_from_slice(self.dep.row(r));
        }
        out
    }

    /// Inverse of [`Self::flatten`]; counts are not restored.
    pub fn from_flat(as_of: DateTime<Utc>, n_t: usize, n_od: usize, n_ap: usize, flat: &[f64]) -> Result<Self> {
        let width = n_od + 2 * n_ap;
        if flat.len() != n_t * width {
            return Err(Error::ShapeMismatch {
                op: "window from_flat",
                left: (n_t, width),
                right: (flat.len(), 1),
            });
        }
        let mut w = Self::zeros(as_of, n_t, n_od, n_ap);
        for r in 0..n_t {
            let row = &flat[r * width..(r + 1) * width];
            w.od.row_mut(r).copy_from_slice(&row[..n_od]);
            w.arr.row_mut(r).copy_from_slice(&row[n_od..n_od + n_ap]);
            w.dep.row_mut(r).copy_from_slice(&row[n_od + n_ap..]);
        }
        Ok(w)
    }

    /// Same window restricted to its `n_t` most recent rows.
    pub fn truncated(&self, n_t: usize) -> Self {
        let n_t = n_t.min(self.n_t());
        let take = |t: &Tensor2| {
            Tensor2::from_vec(n_t, t.cols(), t.data()[..n_t * t.cols()].to_vec()).expect("prefix shape")
        };
        DelayStateWindow {
            as_of: self.as_of,
            timestep_hours: self.timestep_hours,
            od: take(&self.od),
            arr: take(&self.arr),
            dep: take(&self.dep),
            od_count: self.od_count[..n_t * self.n_od()].to_vec(),
            arr_count: self.arr_count[..n_t * self.n_ap()].to_vec(),
            dep_count: self.dep_count[..n_t * self.n_ap()].to_vec(),
        }
    }
}

/// A flight log with the time span it is known to cover.
#[derive(Debug, Clone, Copy)]
pub struct FlightLog<'a> {
    pub flights: &'a [FlightRecord],
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl<'a> FlightLog<'a> {
    /// Coverage from the earliest to the latest timestamp, widened to hours.
    pub fn new(flights: &'a [FlightRecord]) -> Option<Self> {
        let times = flights
            .iter()
            .flat_map(|f| [f.sched_dep, f.sched_arr, f.actual_dep, f.actual_arr]);
        let start = times.clone().min()?;
        let end = times.max()?;
        let end_hour = hour_of(end) + i64::from(end != floor_hour(end));
        Some(FlightLog {
            flights,
            start: floor_hour(start),
            end: hour_start(end_hour),
        })
    }

    pub fn with_coverage(flights: &'a [FlightRecord], start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        FlightLog { flights, start, end }
    }
}

/// Per-hour sums and counts over a whole flight log, from which any window
/// can be read off without rescanning the flights.
#[derive(Debug, Clone)]
pub struct DelayStateIndex {
    n_od: usize,
    n_ap: usize,
    first_hour: i64,
    hours: usize,
    od_sum: Vec<i64>,
    od_n: Vec<u32>,
    arr_sum: Vec<i64>,
    arr_n: Vec<u32>,
    dep_sum: Vec<i64>,
    dep_n: Vec<u32>,
}

impl DelayStateIndex {
    pub fn build(log: &FlightLog<'_>, index: &NetworkIndex) -> Self {
        let first_hour = hour_of(log.start);
        let hours = (hour_of(log.end) - first_hour).max(0) as usize;
        let (n_od, n_ap) = (index.n_od(), index.n_airports());
        let mut agg = DelayStateIndex {
            n_od,
            n_ap,
            first_hour,
            hours,
            od_sum: vec![0; hours * n_od],
            od_n: vec![0; hours * n_od],
            arr_sum: vec![0; hours * n_ap],
            arr_n: vec![0; hours * n_ap],
            dep_sum: vec![0; hours * n_ap],
            dep_n: vec![0; hours * n_ap],
        };
        let slot = |t: DateTime<Utc>| {
            let h = hour_of(t) - first_hour;
            (0..hours as i64).contains(&h).then_some(h as usize)
        };
        for f in log.flights {
            if let Some(h) = slot(f.actual_arr) {
                if let Some(k) = index.od_index(&f.origin, &f.destination) {
                    let excess = secs(f.actual_dep, f.actual_arr) - secs(f.sched_dep, f.sched_arr);
                    agg.od_sum[h * n_od + k] += excess;
                    agg.od_n[h * n_od + k] += 1;
                }
                if let Some(k) = index.airport_index(&f.destination) {
                    agg.arr_sum[h * n_ap + k] += secs(f.sched_arr, f.actual_arr);
                    agg.arr_n[h * n_ap + k] += 1;
                }
            }
            if let Some(h) = slot(f.actual_dep) {
                if let Some(k) = index.airport_index(&f.origin) {
                    agg.dep_sum[h * n_ap + k] += secs(f.sched_dep, f.actual_dep);
                    agg.dep_n[h * n_ap + k] += 1;
                }
            }
        }
        agg
    }

    /// Reads the window for `as_of` (an hour boundary) and `n_t` timesteps.
    pub fn window(&self, as_of: DateTime<Utc>, n_t: usize) -> Result<DelayStateWindow> {
        if as_of != floor_hour(as_of) {
            return Err(Error::InvalidConfig(format!("as_of {as_of} is not an hour boundary")));
        }
        let end = hour_of(as_of) - self.first_hour;
        let start = end - n_t as i64;
        if start < 0 || end > self.hours as i64 {
            return Err(Error::InsufficientHistory(format!(
                "window of {n_t}h ending {as_of} lies outside the covered log"
            )));
        }
        let mut w = DelayStateWindow::zeros(as_of, n_t, self.n_od, self.n_ap);
        for r in 0..n_t {
            let h = (end - 1 - r as i64) as usize;
            for k in 0..self.n_od {
                let i = h * self.n_od + k;
                w.od.set(r, k, mean_minutes(self.od_sum[i], self.od_n[i]));
                w.od_count[r * self.n_od + k] = self.od_n[i];
            }
            for k in 0..self.n_ap {
                let i = h * self.n_ap + k;
                w.arr.set(r, k, mean_minutes(self.arr_sum[i], self.arr_n[i]));
                w.arr_count[r * self.n_ap + k] = self.arr_n[i];
                w.dep.set(r, k, mean_minutes(self.dep_sum[i], self.dep_n[i]));
                w.dep_count[r * self.n_ap + k] = self.dep_n[i];
            }
        }
        Ok(w)
    }
}

/// Builds one window directly from a flight log.
pub fn build_window(
    log: &FlightLog<'_>,
    index: &NetworkIndex,
    as_of: DateTime<Utc>,
    n_t: usize,
) -> Result<DelayStateWindow> {
    DelayStateIndex::build(log, index).window(as_of, n_t)
}

/// Scheduled departure and arrival times per indexed airport, for fast demand
/// lookups.
#[derive(Debug, Clone, Default)]
pub struct ScheduleIndex {
    deps: std::collections::HashMap<String, Vec<DateTime<Utc>>>,
    arrs: std::collections::HashMap<String, Vec<DateTime<Utc>>>,
}

impl ScheduleIndex {
    pub fn build(schedule: &[FlightRecord]) -> Self {
        let mut s = ScheduleIndex::default();
        for f in schedule {
            s.deps.entry(f.origin.clone()).or_default().push(f.sched_dep);
            s.arrs.entry(f.destination.clone()).or_default().push(f.sched_arr);
        }
        s.deps.values_mut().for_each(|v| v.sort());
        s.arrs.values_mut().for_each(|v| v.sort());
        s
    }

    pub fn demand(&self, airport: &str, as_of: DateTime<Utc>) -> (usize, usize) {
        let start = as_of - chrono::Duration::hours(1);
        let count = |v: Option<&Vec<DateTime<Utc>>>| {
            v.map_or(0, |v| v.partition_point(|t| *t < as_of) - v.partition_point(|t| *t < start))
        };
        (count(self.deps.get(airport)), count(self.arrs.get(airport)))
    }
}
