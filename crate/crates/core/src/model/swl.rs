//! Spatial weighted layers: a per-OD column-wise scale and shift of the
//! delay-state matrices followed by LeakyReLU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DelayStateWindow;
use crate::nn::{leaky_relu, leaky_relu_grad, Tensor2};

/// Weights of the three spatial weighted layers belonging to one OD pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwlWeights {
    pub w_od: Vec<f64>,
    pub b_od: Vec<f64>,
    pub w_arr: Vec<f64>,
    pub b_arr: Vec<f64>,
    pub w_dep: Vec<f64>,
    pub b_dep: Vec<f64>,
}

impl SwlWeights {
    /// Unit scale, zero shift.
    pub fn identity(n_od: usize, n_ap: usize) -> Self {
        SwlWeights {
            w_od: vec![1.0; n_od],
            b_od: vec![0.0; n_od],
            w_arr: vec![1.0; n_ap],
            b_arr: vec![0.0; n_ap],
            w_dep: vec![1.0; n_ap],
            b_dep: vec![0.0; n_ap],
        }
    }

    pub fn n_od(&self) -> usize {
        self.w_od.len()
    }

    pub fn n_ap(&self) -> usize {
        self.w_arr.len()
    }
}

/// One [`SwlWeights`] per OD pair of the network index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwlBank {
    pub entries: Vec<SwlWeights>,
    pub frozen: Vec<bool>,
}

impl SwlBank {
    pub fn identity(n_od: usize, n_ap: usize) -> Self {
        SwlBank {
            entries: vec![SwlWeights::identity(n_od, n_ap); n_od],
            frozen: vec![false; n_od],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `leaky(w_k * x_jk + b_k)` over a row-major `rows x w.len()` matrix.
pub fn swl_apply(x: &[f64], w: &[f64], b: &[f64], slope: f64, out: &mut [f64]) {
    let cols = w.len();
    for (row_in, row_out) in x.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        for k in 0..cols {
            row_out[k] = leaky_relu(w[k] * row_in[k] + b[k], slope);
        }
    }
}

/// Gradients of [`swl_apply`]: returns `dx` and accumulates into `dw`, `db`.
pub fn swl_apply_backward(x: &[f64], w: &[f64], b: &[f64], slope: f64, dout: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let cols = w.len();
    let mut dx = vec![0.0; x.len()];
    for ((xr, dr), dxr) in x.chunks_exact(cols).zip(dout.chunks_exact(cols)).zip(dx.chunks_exact_mut(cols)) {
        for k in 0..cols {
            let dz = dr[k] * leaky_relu_grad(w[k] * xr[k] + b[k], slope);
            dw[k] += dz * xr[k];
            db[k] += dz;
            dxr[k] = dz * w[k];
        }
    }
    dx
}

fn apply_tensor(x: &Tensor2, w: &[f64], b: &[f64], slope: f64) -> Tensor2 {
    let mut out = Tensor2::zeros(x.rows(), x.cols());
    swl_apply(x.data(), w, b, slope, out.data_mut());
    out
}

/// Applies bank entry `l` to a delay-state window, returning the weighted
/// OD, arrival and departure matrices.
pub fn swl_forward(window: &DelayStateWindow, bank: &SwlBank, l: usize, slope: f64) -> Result<(Tensor2, Tensor2, Tensor2)> {
    let entry = bank.entries.get(l).ok_or_else(|| Error::IndexMismatch {
        expected: format!("od index < {}", bank.len()),
        found: l.to_string(),
    })?;
    if entry.n_od() != window.n_od() || entry.n_ap() != window.n_ap() {
        return Err(Error::IndexMismatch {
            expected: format!("{} OD pairs / {} airports", entry.n_od(), entry.n_ap()),
            found: format!("{} OD pairs / {} airports", window.n_od(), window.n_ap()),
        });
    }
    Ok((
        apply_tensor(&window.od, &entry.w_od, &entry.b_od, slope),
        apply_tensor(&window.arr, &entry.w_arr, &entry.b_arr, slope),
        apply_tensor(&window.dep, &entry.w_dep, &entry.b_dep, slope),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(n_t: usize, n_od: usize, n_ap: usize, f: impl Fn(usize) -> f64) -> DelayStateWindow {
        let flat: Vec<f64> = (0..n_t * (n_od + 2 * n_ap)).map(f).collect();
        DelayStateWindow::from_flat(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(), n_t, n_od, n_ap, &flat).unwrap()
    }

    #[test]
    fn identity_on_nonnegative_window() {
        let w = window(3, 4, 2, |i| i as f64 * 0.5);
        let bank = SwlBank::identity(4, 2);
        let (od, arr, dep) = swl_forward(&w, &bank, 1, 0.01).unwrap();
        assert_eq!((od, arr, dep), (w.od.clone(), w.arr.clone(), w.dep.clone()));
    }

    #[test]
    fn zero_weights_give_zero() {
        let w = window(3, 4, 2, |i| i as f64 - 5.0);
        let mut bank = SwlBank::identity(4, 2);
        bank.entries[0].w_od = vec![0.0; 4];
        let (od, _, _) = swl_forward(&w, &bank, 0, 0.01).unwrap();
        assert!(od.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matches_elementwise_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = window(3, 4, 1, |i| ((i * 37) % 11) as f64 - 5.0);
        let mut bank = SwlBank::identity(4, 1);
        let e = &mut bank.entries[2];
        e.w_od = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        e.b_od = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = bank.entries[2].clone();
        let (od, _, _) = swl_forward(&w, &bank, 2, 0.01).unwrap();
        for j in 0..3 {
            for k in 0..4 {
                let z = e.w_od[k] * w.od.get(j, k) + e.b_od[k];
                let expect = if z >= 0.0 { z } else { 0.01 * z };
                assert_eq!(od.get(j, k), expect);
            }
        }
    }

    #[test]
    fn bad_index_is_rejected() {
        let w = window(2, 4, 2, |_| 1.0);
        assert!(matches!(swl_forward(&w, &SwlBank::identity(4, 2), 4, 0.01), Err(Error::IndexMismatch { .. })));
        assert!(matches!(swl_forward(&w, &SwlBank::identity(3, 2), 0, 0.01), Err(Error::IndexMismatch { .. })));
    }
}
