//! Batch normalisation over the batch dimension of a row-major
//! `batch x features` matrix.

use serde::{Deserialize, Serialize};

use crate::nn::param::{BlockId, ParamStore};
use crate::nn::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchNormConfig {
    /// Weight kept by the running statistics at each update.
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        BatchNormConfig {
            momentum: 0.9,
            eps: 1e-5,
        }
    }
}

/// Exponential moving averages used in evaluation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(features: usize) -> Self {
        RunningStats {
            mean: vec![0.0; features],
            var: vec![1.0; features],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnCache {
    pub batch: usize,
    pub features: usize,
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// Whether the normalisation used this batch's statistics (and so the
    /// gradient flows through them).
    pub batch_stats: bool,
}

/// Normalises `x`, then scales by `gamma` and shifts by `beta`.
///
/// Training mode uses the batch mean and biased batch variance and folds
/// them into `running`; a batch of one has no spread, so it falls back to
/// the running statistics and leaves them untouched.
pub fn batchnorm_forward(
    x: &[f64],
    batch: usize,
    gamma: &[f64],
    beta: &[f64],
    running: &mut RunningStats,
    mode: Mode,
    cfg: BatchNormConfig,
) -> (Vec<f64>, BnCache) {
    let f = gamma.len();
    debug_assert_eq!(x.len(), batch * f);
    let use_batch = mode == Mode::Train && batch > 1;
    if mode == Mode::Train && batch == 1 {
        log::debug!("batch of one in training mode; using running statistics");
    }
    let (mean, var) = if use_batch {
        let mut mean = vec![0.0; f];
        for row in x.chunks_exact(f) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= batch as f64);
        let mut var = vec![0.0; f];
        for row in x.chunks_exact(f) {
            for j in 0..f {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= batch as f64);
        for j in 0..f {
            running.mean[j] = cfg.momentum * running.mean[j] + (1.0 - cfg.momentum) * mean[j];
            running.var[j] = cfg.momentum * running.var[j] + (1.0 - cfg.momentum) * var[j];
        }
        (mean, var)
    } else {
        (running.mean.clone(), running.var.clone())
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + cfg.eps).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for i in 0..batch {
        for j in 0..f {
            let k = i * f + j;
            xhat[k] = (x[k] - mean[j]) * inv_std[j];
            y[k] = gamma[j] * xhat[k] + beta[j];
        }
    }
    (
        y,
        BnCache {
            batch,
            features: f,
            xhat,
            inv_std,
            batch_stats: use_batch,
        },
    )
}

/// Returns `dx`, adding parameter gradients into `dgamma` and `dbeta`.
pub fn batchnorm_backward(cache: &BnCache, gamma: &[f64], dy: &[f64], dgamma: &mut [f64], dbeta: &mut [f64]) -> Vec<f64> {
    let (n, f) = (cache.batch, cache.features);
    let mut sum_dxhat = vec![0.0; f];
    let mut sum_dxhat_xhat = vec![0.0; f];
    for i in 0..n {
        for j in 0..f {
            let k = i * f + j;
            dgamma[j] += dy[k] * cache.xhat[k];
            dbeta[j] += dy[k];
            let dxhat = dy[k] * gamma[j];
            sum_dxhat[j] += dxhat;
            sum_dxhat_xhat[j] += dxhat * cache.xhat[k];
        }
    }
    let mut dx = vec![0.0; n * f];
    let nf = n as f64;
    for i in 0..n {
        for j in 0..f {
            let k = i * f + j;
            let dxhat = dy[k] * gamma[j];
            dx[k] = if cache.batch_stats {
                cache.inv_std[j] / nf * (nf * dxhat - sum_dxhat[j] - cache.xhat[k] * sum_dxhat_xhat[j])
            } else {
                dxhat * cache.inv_std[j]
            };
        }
    }
    dx
}

/// Batch-norm layer whose scale and shift live in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub features: usize,
    pub gamma: BlockId,
    pub beta: BlockId,
}

impl BatchNormParams {
    pub fn register(store: &mut ParamStore, prefix: &str, features: usize) -> Self {
        BatchNormParams {
            features,
            gamma: store.add(format!("{prefix}.gamma"), 1, features),
            beta: store.add(format!("{prefix}.beta"), 1, features),
        }
    }

    pub fn init(&self, store: &mut ParamStore) {
        store.value_mut(self.gamma).iter_mut().for_each(|v| *v = 1.0);
        store.value_mut(self.beta).iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
        batch: usize,
        running: &mut RunningStats,
        mode: Mode,
        cfg: BatchNormConfig,
    ) -> (Vec<f64>, BnCache) {
        batchnorm_forward(x, batch, store.value(self.gamma), store.value(self.beta), running, mode, cfg)
    }

    pub fn backward(&self, store: &ParamStore, cache: &BnCache, dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let rg = store.range(self.gamma);
        let rb = store.range(self.beta);
        let mut dgamma = vec![0.0; self.features];
        let mut dbeta = vec![0.0; self.features];
        let dx = batchnorm_backward(cache, store.value(self.gamma), dy, &mut dgamma, &mut dbeta);
        for j in 0..self.features {
            grad[rg.start + j] += dgamma[j];
            grad[rb.start + j] += dbeta[j];
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{grad_check, CheckTarget};
    use crate::nn::tensor::dot;

    fn cfg() -> BatchNormConfig {
        BatchNormConfig::default()
    }

    #[test]
    fn standardized_batch_passes_through() {
        // each column already has mean 0 and population variance 1
        let x = [1.0, -1.0, -1.0, 1.0];
        let mut rs = RunningStats::new(2);
        let (y, _) = batchnorm_forward(&x, 2, &[1.0, 1.0], &[0.0, 0.0], &mut rs, Mode::Train, cfg());
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn output_mean_equals_beta() {
        let x = [3.0, 10.0, 5.0, -4.0, 0.5, 7.0];
        let mut rs = RunningStats::new(2);
        let (y, cache) = batchnorm_forward(&x, 3, &[2.0, 0.5], &[0.7, -1.5], &mut rs, Mode::Train, cfg());
        for j in 0..2 {
            let m: f64 = (0..3).map(|i| y[i * 2 + j]).sum::<f64>() / 3.0;
            assert!((m - [0.7, -1.5][j]).abs() < 1e-12);
            let xm: f64 = (0..3).map(|i| cache.xhat[i * 2 + j]).sum::<f64>() / 3.0;
            let xv: f64 = (0..3).map(|i| cache.xhat[i * 2 + j].powi(2)).sum::<f64>() / 3.0;
            assert!(xm.abs() < 1e-9 && (xv - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn running_stats_and_eval_mode() {
        let x = [2.0, 4.0];
        let mut rs = RunningStats::new(1);
        batchnorm_forward(&x, 2, &[1.0], &[0.0], &mut rs, Mode::Train, cfg());
        assert!((rs.mean[0] - 0.3).abs() < 1e-12);
        assert!((rs.var[0] - (0.9 + 0.1)).abs() < 1e-12);
        let before = rs.clone();
        let (y, _) = batchnorm_forward(&[0.3], 1, &[1.0], &[0.0], &mut rs, Mode::Eval, cfg());
        assert_eq!(rs, before);
        assert!(y[0].abs() < 1e-12);
        // a single-sample training batch does not touch the running stats
        batchnorm_forward(&[9.0], 1, &[1.0], &[0.0], &mut rs, Mode::Train, cfg());
        assert_eq!(rs, before);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = [0.3, -1.2, 2.0, 0.7, 1.1, -0.4, -0.9, 0.2, 0.5, 1.6, -2.2, 0.0];
        let gamma = [1.3, 0.6, -0.8];
        let beta = [0.1, -0.3, 0.2];
        let proj = [0.5, -1.0, 0.3, 1.2, 0.4, -0.7, 0.9, 0.1, -0.2, 0.6, 1.5, -0.4];
        let f = |x: &[f64], g: &[f64], b: &[f64]| {
            let mut rs = RunningStats::new(3);
            dot(&batchnorm_forward(x, 4, g, b, &mut rs, Mode::Train, cfg()).0, &proj)
        };
        let mut rs = RunningStats::new(3);
        let (_, cache) = batchnorm_forward(&x, 4, &gamma, &beta, &mut rs, Mode::Train, cfg());
        let mut dg = [0.0; 3];
        let mut db = [0.0; 3];
        let dx = batchnorm_backward(&cache, &gamma, &proj, &mut dg, &mut db);
        let rx = grad_check(
            CheckTarget {
                f: &mut |xv: &[f64]| f(xv, &gamma, &beta),
                analytic: &dx,
                theta: &x,
            },
            None,
            1e-6,
        );
        let rg = grad_check(
            CheckTarget {
                f: &mut |g: &[f64]| f(&x, g, &beta),
                analytic: &dg,
                theta: &gamma,
            },
            None,
            1e-6,
        );
        let rb = grad_check(
            CheckTarget {
                f: &mut |b: &[f64]| f(&x, &gamma, b),
                analytic: &db,
                theta: &beta,
            },
            None,
            1e-6,
        );
        assert!(rx.max_rel_error < 1e-5, "{rx:?}");
        assert!(rg.max_rel_error < 1e-5 && rb.max_rel_error < 1e-5);
    }
}
