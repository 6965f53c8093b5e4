use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::init::{glorot_bound, uniform_fill};
use crate::nn::param::{BlockId, ParamStore};
use crate::nn::tensor::{axpy, dot, Tensor2};

/// Affine map `y = W x + b`.
pub fn fcl(x: &[f64], w: &Tensor2, b: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "fcl",
            left: w.shape(),
            right: (x.len(), b.len()),
        });
    }
    Ok((0..w.rows()).map(|r| dot(w.row(r), x) + b[r]).collect())
}

/// Fully connected layer stored as an `out x in` weight block and an
/// optional bias block. Layers feeding batch norm go without a bias, since
/// normalisation cancels it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: BlockId,
    pub b: Option<BlockId>,
}

impl DenseParams {
    pub fn register(store: &mut ParamStore, prefix: &str, in_dim: usize, out_dim: usize) -> Self {
        DenseParams {
            in_dim,
            out_dim,
            w: store.add(format!("{prefix}.w"), out_dim, in_dim),
            b: Some(store.add(format!("{prefix}.b"), 1, out_dim)),
        }
    }

    pub fn register_without_bias(store: &mut ParamStore, prefix: &str, in_dim: usize, out_dim: usize) -> Self {
        DenseParams {
            in_dim,
            out_dim,
            w: store.add(format!("{prefix}.w"), out_dim, in_dim),
            b: None,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) {
        uniform_fill(store.value_mut(self.w), glorot_bound(self.in_dim, self.out_dim), rng);
        if let Some(b) = self.b {
            store.value_mut(b).iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64], y: &mut [f64]) {
        let w = store.value(self.w);
        let d = self.in_dim;
        for (r, out) in y.iter_mut().enumerate() {
            *out = dot(&w[r * d..(r + 1) * d], x);
        }
        if let Some(b) = self.b {
            for (out, b) in y.iter_mut().zip(store.value(b)) {
                *out += b;
            }
        }
    }

    /// Row-major `batch x in` to `batch x out`.
    pub fn forward_batch(&self, store: &ParamStore, x: &[f64], batch: usize) -> Vec<f64> {
        let mut y = vec![0.0; batch * self.out_dim];
        for i in 0..batch {
            self.forward(
                store,
                &x[i * self.in_dim..(i + 1) * self.in_dim],
                &mut y[i * self.out_dim..(i + 1) * self.out_dim],
            );
        }
        y
    }

    /// Adds parameter gradients into `grad` and, when requested, writes the
    /// input gradient into `dx`.
    pub fn backward(&self, store: &ParamStore, x: &[f64], dy: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>) {
        let d = self.in_dim;
        let rw = store.range(self.w);
        if let Some(b) = self.b {
            let rb = store.range(b);
            for (r, &g) in dy.iter().enumerate() {
                grad[rb.start + r] += g;
            }
        }
        for (r, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                axpy(g, x, &mut grad[rw.start + r * d..rw.start + (r + 1) * d]);
            }
        }
        if let Some(dx) = dx {
            let w = store.value(self.w);
            dx.iter_mut().for_each(|v| *v = 0.0);
            for (r, &g) in dy.iter().enumerate() {
                if g != 0.0 {
                    axpy(g, &w[r * d..(r + 1) * d], dx);
                }
            }
        }
    }

    pub fn backward_batch(&self, store: &ParamStore, x: &[f64], dy: &[f64], batch: usize, grad: &mut [f64]) -> Vec<f64> {
        let mut dx = vec![0.0; batch * self.in_dim];
        for i in 0..batch {
            self.backward(
                store,
                &x[i * self.in_dim..(i + 1) * self.in_dim],
                &dy[i * self.out_dim..(i + 1) * self.out_dim],
                grad,
                Some(&mut dx[i * self.in_dim..(i + 1) * self.in_dim]),
            );
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{grad_check, CheckTarget};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_zero_weights() {
        let x = [1.5, -2.0, 0.25];
        assert_eq!(fcl(&x, &Tensor2::identity(3), &[0.0; 3]).unwrap(), x.to_vec());
        assert_eq!(fcl(&x, &Tensor2::zeros(2, 3), &[4.0, 5.0]).unwrap(), vec![4.0, 5.0]);
        assert!(fcl(&x, &Tensor2::zeros(2, 2), &[0.0; 2]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let layer = DenseParams::register(&mut store, "d", 4, 3);
        layer.init(&mut store, &mut rng);
        store.value_mut(layer.b.unwrap()).copy_from_slice(&[0.1, -0.2, 0.3]);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let proj = [0.7, -1.3, 0.4, 0.9, 1.1, -0.6];
        let loss = |s: &ParamStore, x: &[f64]| dot(&layer.forward_batch(s, x, 2), &proj);
        let mut grad = vec![0.0; store.len()];
        let dx = layer.backward_batch(&store, &x, &proj, 2, &mut grad);
        let theta = store.value.clone();
        let p = grad_check(
            CheckTarget {
                f: &mut |t: &[f64]| {
                    let mut s = store.clone();
                    s.value.copy_from_slice(t);
                    loss(&s, &x)
                },
                analytic: &grad,
                theta: &theta,
            },
            None,
            1e-6,
        );
        let i = grad_check(
            CheckTarget {
                f: &mut |xv: &[f64]| loss(&store, xv),
                analytic: &dx,
                theta: &x,
            },
            None,
            1e-6,
        );
        assert!(p.max_rel_error < 1e-6 && i.max_rel_error < 1e-6, "{p:?} {i:?}");
    }
}
