//! RMSE, MAE and R² over the whole test set and its normal/outlier strata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::Subset;

/// Error statistics of one subset; `error = predicted - actual`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub count: usize,
    pub rmse: f64,
    pub mae: f64,
    /// `1 - SSE/SST` with SST about the subset's own mean; 0 when the
    /// subset's truths are constant but predictions miss them, 1 when they
    /// are hit exactly.
    pub r2: f64,
}

/// Metrics of one method. Subsets without samples have no row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub all: Option<SubsetMetrics>,
    pub normal: Option<SubsetMetrics>,
    pub outlier: Option<SubsetMetrics>,
    /// `predicted - actual`, one per flight in input order.
    pub errors: Vec<f64>,
}

impl MetricsReport {
    /// `("all" | "normal" | "outlier", metrics)` for the non-empty subsets.
    pub fn rows(&self) -> Vec<(&'static str, SubsetMetrics)> {
        [("all", self.all), ("normal", self.normal), ("outlier", self.outlier)]
            .into_iter()
            .filter_map(|(name, m)| m.map(|m| (name, m)))
            .collect()
    }
}

/// Sum in ascending order so the result does not depend on input order.
fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Metrics of `preds` against `truths`; `None` for an empty set.
pub fn subset_metrics(preds: &[f64], truths: &[f64]) -> Option<SubsetMetrics> {
    let n = preds.len();
    if n == 0 {
        return None;
    }
    let errors: Vec<f64> = preds.iter().zip(truths).map(|(p, t)| p - t).collect();
    let sse = sorted_sum(errors.iter().map(|e| e * e).collect());
    let sae = sorted_sum(errors.iter().map(|e| e.abs()).collect());
    let mean_t = sorted_sum(truths.to_vec()) / n as f64;
    let sst = sorted_sum(truths.iter().map(|t| (t - mean_t) * (t - mean_t)).collect());
    let r2 = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse == 0.0 {
        1.0
    } else {
        0.0
    };
    Some(SubsetMetrics {
        count: n,
        rmse: (sse / n as f64).sqrt(),
        mae: sae / n as f64,
        r2,
    })
}

/// Metrics for all flights and for each stratum.
pub fn metrics(method: &str, preds: &[f64], truths: &[f64], labels: &[Subset]) -> Result<MetricsReport> {
    if preds.len() != truths.len() || preds.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "metrics",
            left: (preds.len(), truths.len()),
            right: (labels.len(), 1),
        });
    }
    let pick = |want: Subset| -> (Vec<f64>, Vec<f64>) {
        labels
            .iter()
            .zip(preds.iter().zip(truths))
            .filter(|(l, _)| **l == want)
            .map(|(_, (p, t))| (*p, *t))
            .unzip()
    };
    let (pn, tn) = pick(Subset::Normal);
    let (po, to) = pick(Subset::Outlier);
    Ok(MetricsReport {
        method: method.to_string(),
        all: subset_metrics(preds, truths),
        normal: subset_metrics(&pn, &tn),
        outlier: subset_metrics(&po, &to),
        errors: preds.iter().zip(truths).map(|(p, t)| p - t).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_predictions() {
        let m = subset_metrics(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!((m.rmse, m.mae, m.r2), (0.0, 0.0, 1.0));
    }

    #[test]
    fn symmetric_errors() {
        let m = subset_metrics(&[13.0, 7.0], &[10.0, 10.0]).unwrap();
        assert_eq!((m.rmse, m.mae), (3.0, 3.0));
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let t = [1.0, 2.0, 3.0, 6.0];
        let m = subset_metrics(&[3.0; 4], &t).unwrap();
        assert_eq!(m.r2, 0.0);
    }

    #[test]
    fn strata_rows_add_up() {
        let labels = [Subset::Normal, Subset::Outlier, Subset::Normal];
        let r = metrics("x", &[1.0, 5.0, 2.0], &[1.0, 2.0, 3.0], &labels).unwrap();
        assert_eq!(r.all.unwrap().count, 3);
        assert_eq!(r.normal.unwrap().count + r.outlier.unwrap().count, 3);
        assert_eq!(r.outlier.unwrap().rmse, 3.0);
        assert_eq!(r.errors, vec![0.0, 3.0, -1.0]);
        let r = metrics("x", &[1.0], &[1.0], &[Subset::Normal]).unwrap();
        assert!(r.outlier.is_none());
        assert_eq!(r.rows().len(), 2);
        assert!(metrics("x", &[1.0], &[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn bounds_and_permutation_invariance(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50),
            rot in 0usize..50,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let m = subset_metrics(&p, &t).unwrap();
            prop_assert!(m.rmse >= m.mae && m.mae >= 0.0 && m.r2 <= 1.0);
            let r = rot % p.len();
            let mut p2 = p.clone();
            let mut t2 = t.clone();
            p2.rotate_left(r);
            t2.rotate_left(r);
            prop_assert_eq!(subset_metrics(&p2, &t2).unwrap(), m);
        }
    }
}
