//! Turns assembled samples into the dense inputs the network consumes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AssembledSample, FlightInfo};
use crate::ingest::{ColumnScaler, FeatureEncoder, RawRow, N_WX};

pub const PREPROCESS_FORMAT_VERSION: u32 = 1;

/// Affine map from the network's raw output to minutes: `y = mean + std * s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub std: f64,
}

impl Default for TargetScaler {
    fn default() -> Self {
        TargetScaler { mean: 0.0, std: 1.0 }
    }
}

impl TargetScaler {
    pub fn fit(targets: impl Iterator<Item = f64> + Clone) -> Self {
        let s = crate::ingest::encode::mean_std(targets);
        TargetScaler {
            mean: s.mean,
            std: if s.std > 1e-12 { s.std } else { 1.0 },
        }
    }
}

/// Dense network input for one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub od_index: usize,
    /// `n_t x n_od`, oldest hour first
    pub od: Vec<f64>,
    /// `n_t x n_ap`, oldest hour first
    pub arr: Vec<f64>,
    pub dep: Vec<f64>,
    /// `2 N_WX` standardised weather values, origin then destination
    pub weather: Vec<f64>,
    pub flight: Vec<f64>,
    /// Planned flight time in minutes; the network predicts the deviation
    /// from it.
    pub baseline: f64,
    /// minutes
    pub target: f64,
}

/// All statistics fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub format_version: u32,
    pub index_hash: String,
    pub n_t: usize,
    pub n_od: usize,
    pub n_ap: usize,
    /// Sign-preserving scale of the `n_od + 2 n_ap` delay-state columns,
    /// pooled over timesteps.
    pub window: ColumnScaler,
    pub weather: ColumnScaler,
    pub flight: FeatureEncoder,
    pub target: TargetScaler,
}

impl Preprocessing {
    pub fn fit(train: &[&AssembledSample], index_hash: &str) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::InvalidConfig("cannot fit preprocessing on an empty training set".into()))?;
        let w = &first.delay_window;
        let (n_t, n_od, n_ap) = (w.n_t(), w.n_od(), w.n_ap());
        let width = n_od + 2 * n_ap;
        let flats: Vec<Vec<f64>> = train.iter().map(|s| s.delay_window.flatten()).collect();
        if flats.iter().any(|f| f.len() != n_t * width) {
            return Err(Error::ShapeMismatch {
                op: "preprocessing fit",
                left: (n_t, width),
                right: (0, 0),
            });
        }
        let window = ColumnScaler::fit_scale_only(width, flats.iter().flat_map(|f| f.chunks_exact(width)));
        let wx: Vec<Vec<f64>> = train.iter().map(|s| s.weather_vector()).collect();
        let weather = ColumnScaler::fit(2 * N_WX, wx.iter().map(Vec::as_slice));
        let rows: Vec<RawRow> = train.iter().map(|s| s.flight_info.raw_row()).collect();
        let flight = FeatureEncoder::fit(&FlightInfo::schema(), &rows)?;
        Ok(Preprocessing {
            format_version: PREPROCESS_FORMAT_VERSION,
            index_hash: index_hash.to_string(),
            n_t,
            n_od,
            n_ap,
            window,
            weather,
            flight,
            target: TargetScaler::fit(train.iter().map(|s| s.target - s.planned_flight_time())),
        })
    }

    pub fn flight_dim(&self) -> usize {
        self.flight.width()
    }

    pub fn encode(&self, s: &AssembledSample) -> Result<ModelInput> {
        let w = &s.delay_window;
        if (w.n_t(), w.n_od(), w.n_ap()) != (self.n_t, self.n_od, self.n_ap) {
            return Err(Error::ShapeMismatch {
                op: "encode sample",
                left: (self.n_t, self.n_od + 2 * self.n_ap),
                right: (w.n_t(), w.row_width()),
            });
        }
        let width = self.n_od + 2 * self.n_ap;
        let mut flat = w.flatten();
        let mut od = Vec::with_capacity(self.n_t * self.n_od);
        let mut arr = Vec::with_capacity(self.n_t * self.n_ap);
        let mut dep = Vec::with_capacity(self.n_t * self.n_ap);
        // window rows run newest first; the recurrent branches read oldest first
        for r in (0..self.n_t).rev() {
            let row = &mut flat[r * width..(r + 1) * width];
            self.window.apply(row);
            od.extend_from_slice(&row[..self.n_od]);
            arr.extend_from_slice(&row[self.n_od..self.n_od + self.n_ap]);
            dep.extend_from_slice(&row[self.n_od + self.n_ap..]);
        }
        let mut weather = s.weather_vector();
        self.weather.apply(&mut weather);
        Ok(ModelInput {
            od_index: s.od_index,
            od,
            arr,
            dep,
            weather,
            flight: self.flight.encode_row(&s.flight_info.raw_row())?,
            baseline: s.planned_flight_time(),
            target: s.target,
        })
    }

    pub fn encode_all(&self, samples: &[&AssembledSample]) -> Result<Vec<ModelInput>> {
        samples.par_iter().map(|s| self.encode(s)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Preprocessing = serde_json::from_str(text)?;
        if p.format_version != PREPROCESS_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: PREPROCESS_FORMAT_VERSION,
                found: p.format_version,
            });
        }
        Ok(p)
    }
}
