//! Scenario parameters of a synthetic world.

use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hourly weather severity chain per airport: 0 calm, 1 moderate, 2 severe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherProcess {
    /// Row `i` holds the probabilities of moving from severity `i` to 0, 1, 2.
    pub transition: [[f64; 3]; 3],
    /// Enroute minutes added per severity level at the destination.
    pub enroute_minutes_per_level: f64,
    /// Congestion minutes added per severity level at the origin.
    pub congestion_minutes_per_level: f64,
}

impl Default for WeatherProcess {
    fn default() -> Self {
        WeatherProcess {
            transition: [[0.95, 0.04, 0.01], [0.25, 0.65, 0.10], [0.10, 0.30, 0.60]],
            enroute_minutes_per_level: 4.0,
            congestion_minutes_per_level: 6.0,
        }
    }
}

/// Fuel-planning constants of the generated fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelProcess {
    /// Burn factor range, kg per (kg x minute).
    pub beta_range: (f64, f64),
    /// Extra minutes the planning system pads its loading with.
    pub padding_minutes: (f64, f64),
    /// Reserve fuel in minutes of burn at zero-fuel weight.
    pub reserve_minutes: f64,
    /// Alternate fuel in minutes of burn at zero-fuel weight.
    pub alternate_minutes: (f64, f64),
    pub taxi_kg: (f64, f64),
}

impl Default for FuelProcess {
    fn default() -> Self {
        FuelProcess {
            beta_range: (5.0e-4, 7.0e-4),
            padding_minutes: (20.0, 45.0),
            reserve_minutes: 30.0,
            alternate_minutes: (15.0, 35.0),
            taxi_kg: (150.0, 350.0),
        }
    }
}

/// Everything that determines a synthetic world; generation is a pure
/// function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_airports: usize,
    pub n_od: usize,
    pub days: usize,
    pub flights_per_od_per_day: usize,
    /// Hours of departure-delay history that drive enroute excess.
    pub delay_memory_hours: usize,
    /// Departure-delay columns planted as relevant for each OD pair.
    pub relevant_columns_per_od: usize,
    /// Range of enroute minutes per minute of remembered departure delay
    /// above the threshold.
    pub coupling_gain: (f64, f64),
    /// Remembered departure delay (minutes) below which there is no effect.
    pub coupling_threshold: f64,
    pub congestion_persistence: f64,
    pub congestion_shock_sd: f64,
    pub departure_noise_sd: f64,
    pub enroute_noise_sd: f64,
    pub weather: WeatherProcess,
    pub fuel: FuelProcess,
    pub start: DateTime<Utc>,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            n_airports: 10,
            n_od: 20,
            days: 60,
            flights_per_od_per_day: 6,
            delay_memory_hours: 12,
            relevant_columns_per_od: 2,
            coupling_gain: (0.6, 1.2),
            coupling_threshold: 5.0,
            congestion_persistence: 0.75,
            congestion_shock_sd: 8.0,
            departure_noise_sd: 4.0,
            enroute_noise_sd: 3.0,
            weather: WeatherProcess::default(),
            fuel: FuelProcess::default(),
            start: Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap(),
            seed: 7,
        }
    }
}

impl ScenarioSpec {
    pub fn with_seed(seed: u64) -> Self {
        ScenarioSpec {
            seed,
            ..Default::default()
        }
    }

    /// A world with no delays at all: no congestion, weather effects,
    /// coupling or noise.
    pub fn quiet(seed: u64) -> Self {
        ScenarioSpec {
            coupling_gain: (0.0, 0.0),
            congestion_shock_sd: 0.0,
            departure_noise_sd: 0.0,
            enroute_noise_sd: 0.0,
            weather: WeatherProcess {
                enroute_minutes_per_level: 0.0,
                congestion_minutes_per_level: 0.0,
                ..Default::default()
            },
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidSpec(m));
        if self.n_airports < 2 {
            return fail(format!("need at least 2 airports, got {}", self.n_airports));
        }
        if self.n_airports > 26 * 26 * 26 {
            return fail("too many airports for generated codes".into());
        }
        if self.n_od == 0 || self.n_od > self.n_airports * (self.n_airports - 1) {
            return fail(format!(
                "n_od must be in 1..={} for {} airports, got {}",
                self.n_airports * (self.n_airports - 1),
                self.n_airports,
                self.n_od
            ));
        }
        if self.days == 0 || self.flights_per_od_per_day == 0 || self.delay_memory_hours == 0 {
            return fail("days, flights per OD per day and memory hours must be positive".into());
        }
        if self.flights_per_od_per_day > 48 {
            return fail("at most 48 flights per OD per day".into());
        }
        if self.relevant_columns_per_od > self.n_airports {
            return fail("more relevant columns than airports".into());
        }
        let nonneg = [
            self.coupling_gain.0,
            self.coupling_threshold,
            self.congestion_shock_sd,
            self.departure_noise_sd,
            self.enroute_noise_sd,
            self.weather.enroute_minutes_per_level,
            self.weather.congestion_minutes_per_level,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.coupling_gain.1 < self.coupling_gain.0 {
            return fail("gains, thresholds and noise levels must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.congestion_persistence) {
            return fail("congestion persistence must be in [0, 1)".into());
        }
        for row in &self.weather.transition {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return fail("weather transition rows must be probabilities summing to 1".into());
            }
        }
        let f = &self.fuel;
        let ranges = [f.beta_range, f.padding_minutes, f.alternate_minutes, f.taxi_kg];
        if ranges.iter().any(|(a, b)| !(*a > 0.0 && b >= a && b.is_finite())) || !(f.reserve_minutes > 0.0) {
            return fail("fuel ranges must be positive and ordered".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ScenarioSpec = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let s = ScenarioSpec::default();
        s.validate().unwrap();
        assert_eq!(ScenarioSpec::from_json(&s.to_json().unwrap()).unwrap(), s);
        ScenarioSpec::quiet(1).validate().unwrap();
    }

    #[test]
    fn bad_specs_are_rejected() {
        let too_many = ScenarioSpec {
            n_airports: 3,
            n_od: 7,
            ..Default::default()
        };
        assert!(matches!(too_many.validate(), Err(Error::InvalidSpec(_))));
        let no_days = ScenarioSpec { days: 0, ..Default::default() };
        assert!(no_days.validate().is_err());
        let mut bad_chain = ScenarioSpec::default();
        bad_chain.weather.transition[0] = [0.5, 0.5, 0.5];
        assert!(bad_chain.validate().is_err());
    }
}
