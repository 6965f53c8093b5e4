//! Per-flight fuel loading under a buffer-time policy, its benefit and its
//! reserve-fuel risk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FlightRecord;

/// Fuel loading policy: the trip-fuel buffer expressed in minutes of flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelPolicy {
    pub name: String,
    pub buffer_minutes: f64,
}

impl FuelPolicy {
    pub fn pro_efficiency() -> Self {
        FuelPolicy {
            name: "pro_efficiency".into(),
            buffer_minutes: 10.0,
        }
    }

    pub fn pro_safety() -> Self {
        FuelPolicy {
            name: "pro_safety".into(),
            buffer_minutes: 25.0,
        }
    }

    pub fn custom(name: &str, buffer_minutes: f64) -> Result<Self> {
        if !(buffer_minutes > 0.0) || !buffer_minutes.is_finite() {
            return Err(Error::InvalidConfig(format!("buffer must be positive, got {buffer_minutes}")));
        }
        Ok(FuelPolicy {
            name: name.into(),
            buffer_minutes,
        })
    }

    /// Accepts `pro-efficiency`/`pro_efficiency` and `pro-safety`/`pro_safety`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "pro_efficiency" => Ok(Self::pro_efficiency()),
            "pro_safety" => Ok(Self::pro_safety()),
            _ => Err(Error::InvalidConfig(format!("unknown fuel policy `{name}`"))),
        }
    }
}

/// Fuel burn factor in kg per (kg of take-off weight x minute), recovered
/// from the planning system's own numbers.
pub fn estimate_beta(r: &FlightRecord) -> Result<f64> {
    let degenerate = |reason: &str| Error::DegenerateRecord {
        id: r.flight_id.clone(),
        reason: reason.into(),
    };
    if !(r.fuel_loading_fps > 0.0) {
        return Err(degenerate("planned fuel loading is not positive"));
    }
    if !(r.zfw > 0.0) {
        return Err(degenerate("zero fuel weight is not positive"));
    }
    if !(r.planned_flight_time > 0.0) {
        return Err(degenerate("planned flight time is not positive"));
    }
    if r.mission_fuel_fps < 0.0 {
        return Err(degenerate("planned mission fuel is negative"));
    }
    Ok(r.mission_fuel_fps / ((r.fuel_loading_fps + r.zfw) * r.planned_flight_time))
}

/// `beta * (loading + zfw) * flight_time`
pub fn mission_fuel(beta: f64, loading: f64, zfw: f64, flight_time: f64) -> f64 {
    beta * (loading + zfw) * flight_time
}

/// Stop iterating once the loading moves by less than this many kg.
pub const LOADING_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100;

/// Inputs of the loading fixed point for one flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingProblem {
    pub beta: f64,
    pub zfw: f64,
    pub taxi: f64,
    pub fixed: f64,
    /// minutes
    pub flight_time: f64,
    /// minutes
    pub buffer: f64,
}

impl LoadingProblem {
    /// Trip + taxi + fixed + buffer, where trip fuel depends on the loading
    /// itself and the buffer converts `buffer` minutes at the trip burn rate.
    pub fn rhs(&self, loading: f64) -> f64 {
        let trip = mission_fuel(self.beta, loading, self.zfw, self.flight_time);
        let buffer_fuel = if self.flight_time > 0.0 {
            self.buffer * trip / self.flight_time
        } else {
            0.0
        };
        trip + self.taxi + self.fixed + buffer_fuel
    }

    /// Contraction factor of `rhs`.
    pub fn rate(&self) -> f64 {
        self.beta * (self.flight_time + self.buffer)
    }

    /// `(taxi + fixed + r zfw) / (1 - r)`
    pub fn closed_form(&self) -> f64 {
        let r = self.rate();
        (self.taxi + self.fixed + r * self.zfw) / (1.0 - r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingSolution {
    pub loading: f64,
    pub mission_fuel: f64,
    pub iterations: usize,
}

/// Iterates `L <- rhs(L)` from `fixed + taxi`.
pub fn solve_loading(p: &LoadingProblem, id: &str) -> Result<LoadingSolution> {
    let fail = |reason: String| Error::NoConvergence { id: id.into(), reason };
    if !(p.flight_time > 0.0) {
        return Err(fail(format!("flight time must be positive, got {}", p.flight_time)));
    }
    let r = p.rate();
    if !(r < 1.0) {
        return Err(fail(format!("burn factor x (flight time + buffer) = {r} >= 1")));
    }
    let mut loading = p.fixed + p.taxi;
    for k in 1..=MAX_ITERATIONS {
        let next = p.rhs(loading);
        let delta = (next - loading).abs();
        loading = next;
        if delta < LOADING_TOL {
            return Ok(LoadingSolution {
                loading,
                mission_fuel: mission_fuel(p.beta, loading, p.zfw, p.flight_time) + p.taxi,
                iterations: k,
            });
        }
    }
    Err(fail(format!("no convergence within {MAX_ITERATIONS} iterations (rate {r})")))
}

/// Proposed `(mission fuel, loading)` for a record given a predicted flight
/// time. Mission fuel includes taxi fuel.
pub fn propose_loading(r: &FlightRecord, predicted_ft: f64, policy: &FuelPolicy) -> Result<(f64, f64)> {
    let beta = estimate_beta(r)?;
    let s = solve_loading(&problem(r, beta, predicted_ft, policy), &r.flight_id)?;
    Ok((s.mission_fuel, s.loading))
}

fn problem(r: &FlightRecord, beta: f64, predicted_ft: f64, policy: &FuelPolicy) -> LoadingProblem {
    LoadingProblem {
        beta,
        zfw: r.zfw,
        taxi: r.taxi_fuel,
        fixed: r.fixed_fuel,
        flight_time: predicted_ft,
        buffer: policy.buffer_minutes,
    }
}

/// Cost to carry: kg burned per kg carried per meter flown.
pub fn cost_to_carry(r: &FlightRecord) -> f64 {
    r.mission_fuel_fps / (r.distance * (r.zfw + r.fuel_loading_fps))
}

/// `(less carried, CTC, less consumed)`; negative when the new plan loads
/// more than the planning system did.
pub fn benefits(r: &FlightRecord, proposed_loading: f64) -> (f64, f64, f64) {
    let less_carried = r.fuel_loading_fps - proposed_loading;
    let ctc = cost_to_carry(r);
    (less_carried, ctc, ctc * less_carried * r.distance)
}

/// Whether fuel at landing would dip below the reserve (strictly).
pub fn is_incident(loading: f64, consumed: f64, reserve: f64) -> bool {
    loading - consumed < reserve
}

/// One flight under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelPlanResult {
    pub flight_id: String,
    pub policy: String,
    pub group: String,
    pub predicted_ft: f64,
    pub beta: f64,
    pub mission_fuel: f64,
    pub proposed_loading: f64,
    pub less_carried: f64,
    pub ctc: f64,
    pub less_consumed: f64,
    /// Recorded consumption minus the weight effect of carrying less.
    pub adjusted_consumed: f64,
    pub incident: bool,
    /// Incident judged against the raw recorded consumption.
    pub naive_incident: bool,
    pub fps_loading: f64,
    pub consumed_fuel: f64,
}

/// Plans one flight.
pub fn plan_flight(r: &FlightRecord, predicted_ft: f64, policy: &FuelPolicy, group: &str) -> Result<FuelPlanResult> {
    if !(predicted_ft > 0.0) {
        return Err(Error::DegenerateRecord {
            id: r.flight_id.clone(),
            reason: format!("predicted flight time {predicted_ft} is not positive"),
        });
    }
    let beta = estimate_beta(r)?;
    let s = solve_loading(&problem(r, beta, predicted_ft, policy), &r.flight_id)?;
    let (less_carried, ctc, less_consumed) = benefits(r, s.loading);
    let adjusted = r.consumed_fuel - less_consumed;
    Ok(FuelPlanResult {
        flight_id: r.flight_id.clone(),
        policy: policy.name.clone(),
        group: group.into(),
        predicted_ft,
        beta,
        mission_fuel: s.mission_fuel,
        proposed_loading: s.loading,
        less_carried,
        ctc,
        less_consumed,
        adjusted_consumed: adjusted,
        incident: is_incident(s.loading, adjusted, r.reserve_fuel),
        naive_incident: is_incident(s.loading, r.consumed_fuel, r.reserve_fuel),
        fps_loading: r.fuel_loading_fps,
        consumed_fuel: r.consumed_fuel,
    })
}

/// Fraction of incidents; `naive` judges against raw recorded consumption.
pub fn depletion_risk(results: &[FuelPlanResult], naive: bool) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let n = results.iter().filter(|r| if naive { r.naive_incident } else { r.incident }).count();
    n as f64 / results.len() as f64
}

/// Incident fraction of the planning system's own loading.
pub fn current_risk(records: &[FlightRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let n = records
        .iter()
        .filter(|r| is_incident(r.fuel_loading_fps, r.consumed_fuel, r.reserve_fuel))
        .count();
    n as f64 / records.len() as f64
}
