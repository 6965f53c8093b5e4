//! Training configuration as a flat `key=value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so that typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Timestep counts explored by the sensitivity sweep.
pub const SWEEP_N_T: [usize; 6] = [2, 6, 12, 24, 36, 48];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Epoch budget of single-stage training (single-step and ablation).
    pub epochs: usize,
    pub n_t: usize,
    pub leaky_slope: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Epochs of each per-OD pretraining run.
    pub step1_epochs: usize,
    /// Epochs of the shared training with frozen spatial layers.
    pub step2_epochs: usize,
    pub min_samples_per_od: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 100,
            n_t: 24,
            leaky_slope: 0.01,
            dropout_rate: 0.2,
            seed: 42,
            step1_epochs: 50,
            step2_epochs: 100,
            min_samples_per_od: 30,
            patience: 15,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}` has invalid value `{value}`")))
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "n_t" => self.n_t = parse(key, value)?,
            "leaky_slope" => self.leaky_slope = parse(key, value)?,
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "step1_epochs" => self.step1_epochs = parse(key, value)?,
            "step2_epochs" => self.step2_epochs = parse(key, value)?,
            "min_samples_per_od" => self.min_samples_per_od = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", no + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.eps <= 0.0 {
            return bad("eps must be positive");
        }
        if self.n_t == 0 {
            return bad("n_t must be positive");
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad("leaky_slope must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        Ok(())
    }

    /// Serialises every key in a fixed order; [`TrainConfig::parse`] reads it back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "lr={}", self.lr);
        let _ = writeln!(s, "beta1={}", self.beta1);
        let _ = writeln!(s, "beta2={}", self.beta2);
        let _ = writeln!(s, "eps={}", self.eps);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "n_t={}", self.n_t);
        let _ = writeln!(s, "leaky_slope={}", self.leaky_slope);
        let _ = writeln!(s, "dropout_rate={}", self.dropout_rate);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "step1_epochs={}", self.step1_epochs);
        let _ = writeln!(s, "step2_epochs={}", self.step2_epochs);
        let _ = writeln!(s, "min_samples_per_od={}", self.min_samples_per_od);
        let _ = writeln!(s, "patience={}", self.patience);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = TrainConfig::default();
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn parses_comments_and_overrides() {
        let c = TrainConfig::parse("# quick run\nepochs = 3\n\nseed=7\nlr=0.01\n").unwrap();
        assert_eq!((c.epochs, c.seed, c.lr, c.batch_size), (3, 7, 0.01, 256));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TrainConfig::parse("epoch=3").is_err());
        assert!(TrainConfig::parse("epochs").is_err());
        assert!(TrainConfig::parse("lr=fast").is_err());
        assert!(TrainConfig::parse("dropout_rate=1.0").is_err());
        assert!(TrainConfig::parse("batch_size=0").is_err());
    }
}
