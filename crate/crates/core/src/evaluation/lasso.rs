//! L1-regularised linear regression by cyclic coordinate descent, minimising
//! `(1/2n) |y - b0 - X beta|^2 + lambda |beta|_1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Stop once no coefficient moves by more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-7,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Identifies the feature layout the model was trained on.
    pub schema_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub model: LassoModel,
    /// Objective value at the start and after each sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// `sign(z) * max(|z| - g, 0)`
pub fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Row-major design matrix stored column by column, centred.
struct Design {
    n: usize,
    p: usize,
    /// centred columns, `p` slices of length `n`
    cols: Vec<f64>,
    means: Vec<f64>,
    /// `|x_j|^2 / n` after centring
    sq: Vec<f64>,
}

impl Design {
    fn new(x: &[Vec<f64>]) -> Result<Self> {
        let n = x.len();
        let p = x.first().map_or(0, Vec::len);
        if let Some(bad) = x.iter().find(|r| r.len() != p) {
            return Err(Error::ShapeMismatch {
                op: "lasso design",
                left: (n, p),
                right: (1, bad.len()),
            });
        }
        let mut cols = vec![0.0; n * p];
        let mut means = vec![0.0; p];
        let mut sq = vec![0.0; p];
        for j in 0..p {
            let col = &mut cols[j * n..(j + 1) * n];
            for (i, row) in x.iter().enumerate() {
                col[i] = row[j];
            }
            let m = col.iter().sum::<f64>() / n as f64;
            col.iter_mut().for_each(|v| *v -= m);
            means[j] = m;
            sq[j] = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
        }
        Ok(Design { n, p, cols, means, sq })
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }
}

fn objective(resid: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = resid.len() as f64;
    resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn descend(d: &Design, yc: &[f64], lambda: f64, beta: &mut [f64], opts: &LassoOptions) -> (Vec<f64>, usize, bool) {
    let n = d.n as f64;
    let mut resid: Vec<f64> = yc.to_vec();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (r, x) in resid.iter_mut().zip(d.col(j)) {
                *r -= x * b;
            }
        }
    }
    let mut trace = vec![objective(&resid, beta, lambda)];
    for sweep in 1..=opts.max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..d.p {
            if d.sq[j] <= 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let col = d.col(j);
            let rho = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n + d.sq[j] * beta[j];
            let new = soft_threshold(rho, lambda) / d.sq[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= x * delta;
                }
                beta[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        trace.push(objective(&resid, beta, lambda));
        if max_delta < opts.tol {
            return (trace, sweep, true);
        }
    }
    (trace, opts.max_sweeps, false)
}

/// Fits one `lambda` starting from `warm` coefficients (zeros when `None`).
pub fn lasso_fit_from(
    x: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    warm: Option<&[f64]>,
    schema_hash: &str,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "lasso fit",
            left: (x.len(), 1),
            right: (y.len(), 1),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lasso lambda must be >= 0, got {lambda}")));
    }
    let d = Design::new(x)?;
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut beta = match warm {
        Some(w) if w.len() == d.p => w.to_vec(),
        _ => vec![0.0; d.p],
    };
    let (trace, sweeps, converged) = descend(&d, &yc, lambda, &mut beta, opts);
    if !converged {
        log::warn!("lasso (lambda={lambda}) stopped after {sweeps} sweeps without converging");
    }
    let intercept = y_mean - beta.iter().zip(&d.means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LassoFit {
        model: LassoModel {
            coefficients: beta,
            intercept,
            lambda,
            schema_hash: schema_hash.to_string(),
        },
        objective_trace: trace,
        sweeps,
        converged,
    })
}

pub fn lasso_fit(x: &[Vec<f64>], y: &[f64], lambda: f64, schema_hash: &str) -> Result<LassoFit> {
    lasso_fit_from(x, y, lambda, None, schema_hash, &LassoOptions::default())
}

pub fn lasso_predict(model: &LassoModel, x: &[f64]) -> f64 {
    model.intercept + model.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Smallest lambda that zeroes every coefficient.
pub fn lambda_max(x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let d = Design::new(x)?;
    let y_mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    Ok((0..d.p)
        .map(|j| d.col(j).iter().zip(y).map(|(a, b)| a * (b - y_mean)).sum::<f64>().abs() / d.n as f64)
        .fold(0.0, f64::max))
}

/// `count` log-spaced values from `lambda_max` down to `lambda_max * ratio`.
pub fn lambda_grid(lambda_max: f64, count: usize, ratio: f64) -> Vec<f64> {
    if count <= 1 {
        return vec![lambda_max];
    }
    (0..count)
        .map(|k| lambda_max * ratio.powf(k as f64 / (count - 1) as f64))
        .collect()
}

pub const LAMBDA_GRID_SIZE: usize = 20;
pub const LAMBDA_GRID_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSelection {
    pub model: LassoModel,
    /// `(lambda, validation RMSE)` along the grid.
    pub path: Vec<(f64, f64)>,
}

/// Fits the whole grid with warm starts and keeps the lambda with the lowest
/// validation RMSE (the larger lambda on ties).
pub fn lasso_select(
    train_x: &[Vec<f64>],
    train_y: &[f64],
    val_x: &[Vec<f64>],
    val_y: &[f64],
    schema_hash: &str,
    opts: &LassoOptions,
) -> Result<LassoSelection> {
    let grid = lambda_grid(lambda_max(train_x, train_y)?, LAMBDA_GRID_SIZE, LAMBDA_GRID_RATIO);
    let mut warm: Option<Vec<f64>> = None;
    let mut best: Option<(f64, LassoModel)> = None;
    let mut path = Vec::with_capacity(grid.len());
    for lambda in grid {
        let fit = lasso_fit_from(train_x, train_y, lambda, warm.as_deref(), schema_hash, opts)?;
        let mse = val_x
            .iter()
            .zip(val_y)
            .map(|(x, y)| (lasso_predict(&fit.model, x) - y).powi(2))
            .sum::<f64>()
            / val_y.len().max(1) as f64;
        let rmse = mse.sqrt();
        log::debug!("lasso lambda={lambda:.3e}: val rmse {rmse:.4}");
        path.push((lambda, rmse));
        if best.as_ref().is_none_or(|(b, _)| rmse < *b) {
            best = Some((rmse, fit.model.clone()));
        }
        warm = Some(fit.model.coefficients);
    }
    let (_, model) = best.expect("grid is non-empty");
    Ok(LassoSelection { model, path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Walsh columns on 8 points: zero mean, mutually orthogonal, `|x|^2 = n`.
    fn walsh() -> Vec<Vec<f64>> {
        (0..8)
            .map(|i: usize| (1..4).map(|k: usize| if (i >> (k - 1)) & 1 == 0 { 1.0 } else { -1.0 }).collect())
            .collect()
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn orthonormal_design_is_soft_thresholded_least_squares() {
        let x = walsh();
        let y = [3.0, -1.0, 2.5, 0.0, 1.0, 4.0, -2.0, 0.5];
        let n = 8.0;
        let ols: Vec<f64> = (0..3).map(|j| x.iter().zip(&y).map(|(r, v)| r[j] * v).sum::<f64>() / n).collect();
        for lambda in [0.0, 0.1, 0.4, 0.7, 5.0] {
            let fit = lasso_fit(&x, &y, lambda, "t").unwrap();
            for j in 0..3 {
                assert!((fit.model.coefficients[j] - soft_threshold(ols[j], lambda)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn huge_lambda_predicts_the_mean() {
        let x = walsh();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let fit = lasso_fit(&x, &y, 1e6, "t").unwrap();
        assert!(fit.model.coefficients.iter().all(|b| *b == 0.0));
        assert_eq!(lasso_predict(&fit.model, &x[0]), 3.5);
    }

    #[test]
    fn zero_lambda_solves_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let truth = [2.0, -1.0, 0.5];
        let y: Vec<f64> = x.iter().map(|r| 1.0 + r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>()).collect();
        let opts = LassoOptions { tol: 1e-12, max_sweeps: 100_000 };
        let fit = lasso_fit_from(&x, &y, 0.0, None, "t", &opts).unwrap();
        for (b, t) in fit.model.coefficients.iter().zip(truth) {
            assert!((b - t).abs() / t.abs() < 1e-6, "{b} vs {t}");
        }
        assert!((fit.model.intercept - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grid_is_log_spaced_and_selection_beats_null_model() {
        let g = lambda_grid(1.0, 20, 1e-3);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 1.0);
        assert!((g[19] - 1e-3).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..80).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + rng.random_range(-0.1..0.1)).collect();
        let sel = lasso_select(&x[..60], &y[..60], &x[60..], &y[60..], "t", &LassoOptions::default()).unwrap();
        assert_eq!(sel.path.len(), 20);
        let best = sel.path.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert!(best < sel.path[0].1);
        assert!(sel.model.coefficients[0] > 2.5);
    }

    proptest! {
        #[test]
        fn objective_never_increases(seed in any::<u64>(), lambda in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> = (0..30).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y: Vec<f64> = x.iter().map(|r| r[0] - 2.0 * r[3] + rng.random_range(-1.0..1.0)).collect();
            let fit = lasso_fit(&x, &y, lambda, "t").unwrap();
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
        }
    }
}
