//! LSTM cells and stacks with backpropagation through time.
//!
//! Gate rows are ordered input, forget, cell candidate, output. With
//! pre-activation `z = W_x x + W_h h_prev + b`:
//!
//! ```text
//! i = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
//! c = f * c_prev + i * g
//! h = o * tanh(c)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::sigmoid;
use crate::nn::init::uniform_fill;
use crate::nn::param::{BlockId, ParamStore};
use crate::nn::tensor::{axpy, dot};

pub const GATES: usize = 4;

/// Block handles of one LSTM cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4M x D`
    pub w_x: BlockId,
    /// `4M x M`
    pub w_h: BlockId,
    /// `1 x 4M`
    pub b: BlockId,
}

/// Activations of one layer over a whole sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    pub n_t: usize,
    /// `(n_t + 1) x M`, row 0 is the zero initial state
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// `n_t x 4M` post-activation gate values
    pub gates: Vec<f64>,
    /// `n_t x M`
    pub tanh_c: Vec<f64>,
}

impl LayerCache {
    pub fn hidden_at(&self, t: usize, m: usize) -> &[f64] {
        &self.h[(t + 1) * m..(t + 2) * m]
    }
}

impl LstmCellParams {
    pub fn register(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden: usize) -> Self {
        LstmCellParams {
            input_dim,
            hidden,
            w_x: store.add(format!("{prefix}.w_x"), GATES * hidden, input_dim),
            w_h: store.add(format!("{prefix}.w_h"), GATES * hidden, hidden),
            b: store.add(format!("{prefix}.b"), 1, GATES * hidden),
        }
    }

    /// Glorot-uniform input weights, `U(-1/sqrt(M), 1/sqrt(M))` recurrent
    /// weights, zero biases except forget-gate bias 1.
    pub fn init<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) {
        let m = self.hidden;
        let a = (6.0 / (self.input_dim + m) as f64).sqrt();
        uniform_fill(store.value_mut(self.w_x), a, rng);
        uniform_fill(store.value_mut(self.w_h), 1.0 / (m as f64).sqrt(), rng);
        let b = store.value_mut(self.b);
        b.iter_mut().for_each(|v| *v = 0.0);
        b[m..2 * m].iter_mut().for_each(|v| *v = 1.0);
    }

    /// One time step. Returns `(h, c)` plus the gate activations.
    pub fn step(&self, store: &ParamStore, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.hidden;
        if x.len() != self.input_dim || h_prev.len() != m || c_prev.len() != m {
            return Err(Error::ShapeMismatch {
                op: "lstm_cell_step",
                left: (self.input_dim, m),
                right: (x.len(), h_prev.len()),
            });
        }
        let mut gates = vec![0.0; GATES * m];
        let mut h = vec![0.0; m];
        let mut c = vec![0.0; m];
        let mut tanh_c = vec![0.0; m];
        self.step_into(store, x, h_prev, c_prev, &mut gates, &mut c, &mut tanh_c, &mut h);
        Ok((h, c))
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn step_into(
        &self,
        store: &ParamStore,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gates: &mut [f64],
        c: &mut [f64],
        tanh_c: &mut [f64],
        h: &mut [f64],
    ) {
        let m = self.hidden;
        let d = self.input_dim;
        let wx = store.value(self.w_x);
        let wh = store.value(self.w_h);
        let b = store.value(self.b);
        for r in 0..GATES * m {
            let z = b[r] + dot(&wx[r * d..(r + 1) * d], x) + dot(&wh[r * m..(r + 1) * m], h_prev);
            gates[r] = if (2 * m..3 * m).contains(&r) { z.tanh() } else { sigmoid(z) };
        }
        for j in 0..m {
            let (i, f, g, o) = (gates[j], gates[m + j], gates[2 * m + j], gates[3 * m + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
    }

    /// Runs the cell over `n_t` inputs stored row-major in `xs`.
    pub fn forward_sequence(&self, store: &ParamStore, xs: &[f64], n_t: usize) -> LayerCache {
        let m = self.hidden;
        let d = self.input_dim;
        debug_assert_eq!(xs.len(), n_t * d);
        let mut cache = LayerCache {
            n_t,
            h: vec![0.0; (n_t + 1) * m],
            c: vec![0.0; (n_t + 1) * m],
            gates: vec![0.0; n_t * GATES * m],
            tanh_c: vec![0.0; n_t * m],
        };
        for t in 0..n_t {
            let (h_done, h_rest) = cache.h.split_at_mut((t + 1) * m);
            let (c_done, c_rest) = cache.c.split_at_mut((t + 1) * m);
            self.step_into(
                store,
                &xs[t * d..(t + 1) * d],
                &h_done[t * m..],
                &c_done[t * m..],
                &mut cache.gates[t * GATES * m..(t + 1) * GATES * m],
                &mut c_rest[..m],
                &mut cache.tanh_c[t * m..(t + 1) * m],
                &mut h_rest[..m],
            );
        }
        cache
    }

    /// Backpropagation through time. `dh_seq` (`n_t x M`) holds the loss
    /// gradient reaching each output `h_t` from above; parameter gradients are
    /// added into `grad` (full store length) and input gradients written to
    /// `dxs` (`n_t x D`).
    pub fn backward_sequence(
        &self,
        store: &ParamStore,
        xs: &[f64],
        cache: &LayerCache,
        dh_seq: &[f64],
        grad: &mut [f64],
        dxs: &mut [f64],
    ) {
        let m = self.hidden;
        let d = self.input_dim;
        let n_t = cache.n_t;
        let wx = store.value(self.w_x);
        let wh = store.value(self.w_h);
        let (rx, rh, rb) = (store.range(self.w_x), store.range(self.w_h), store.range(self.b));
        let mut dh_next = vec![0.0; m];
        let mut dc_next = vec![0.0; m];
        let mut dz = vec![0.0; GATES * m];
        dxs.iter_mut().for_each(|v| *v = 0.0);
        for t in (0..n_t).rev() {
            let gates = &cache.gates[t * GATES * m..(t + 1) * GATES * m];
            let tanh_c = &cache.tanh_c[t * m..(t + 1) * m];
            let c_prev = &cache.c[t * m..(t + 1) * m];
            let h_prev = &cache.h[t * m..(t + 1) * m];
            let x = &xs[t * d..(t + 1) * d];
            for j in 0..m {
                let (i, f, g, o) = (gates[j], gates[m + j], gates[2 * m + j], gates[3 * m + j]);
                let dh = dh_seq[t * m + j] + dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - tanh_c[j] * tanh_c[j]);
                dz[j] = dc * g * i * (1.0 - i);
                dz[m + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * m + j] = dc * i * (1.0 - g * g);
                dz[3 * m + j] = dh * tanh_c[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let dx = &mut dxs[t * d..(t + 1) * d];
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                grad[rb.start + r] += dzr;
                axpy(dzr, x, &mut grad[rx.start + r * d..rx.start + (r + 1) * d]);
                axpy(dzr, h_prev, &mut grad[rh.start + r * m..rh.start + (r + 1) * m]);
                axpy(dzr, &wx[r * d..(r + 1) * d], dx);
                axpy(dzr, &wh[r * m..(r + 1) * m], &mut dh_next);
            }
        }
    }
}

/// `q` cells where layer `k+1` consumes the hidden sequence of layer `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmStack {
    pub cells: Vec<LstmCellParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackCache {
    pub layers: Vec<LayerCache>,
}

impl StackCache {
    /// Hidden state of the top layer at the last time step.
    pub fn output(&self, hidden: usize) -> &[f64] {
        let top = self.layers.last().expect("non-empty stack");
        top.hidden_at(top.n_t - 1, hidden)
    }
}

impl LstmStack {
    pub fn register(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden: usize, layers: usize) -> Self {
        let cells = (0..layers)
            .map(|k| {
                let d = if k == 0 { input_dim } else { hidden };
                LstmCellParams::register(store, &format!("{prefix}.l{k}"), d, hidden)
            })
            .collect();
        LstmStack { cells }
    }

    pub fn init<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) {
        for c in &self.cells {
            c.init(store, rng);
        }
    }

    pub fn hidden(&self) -> usize {
        self.cells[0].hidden
    }

    pub fn input_dim(&self) -> usize {
        self.cells[0].input_dim
    }

    pub fn forward(&self, store: &ParamStore, xs: &[f64], n_t: usize) -> Result<StackCache> {
        if n_t == 0 || xs.len() != n_t * self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "lstm_sequence",
                left: (n_t, self.input_dim()),
                right: (xs.len(), 1),
            });
        }
        let mut layers: Vec<LayerCache> = Vec::with_capacity(self.cells.len());
        for (k, cell) in self.cells.iter().enumerate() {
            let cache = if k == 0 {
                cell.forward_sequence(store, xs, n_t)
            } else {
                let m = layers[k - 1].h.len() / (n_t + 1);
                cell.forward_sequence(store, &layers[k - 1].h[m..], n_t)
            };
            layers.push(cache);
        }
        Ok(StackCache { layers })
    }

    /// Backward pass from the gradient of the final top-layer hidden state.
    /// Returns the gradient with respect to `xs`.
    pub fn backward(&self, store: &ParamStore, xs: &[f64], cache: &StackCache, d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let n_t = cache.layers[0].n_t;
        let top_m = self.cells.last().expect("non-empty stack").hidden;
        let mut dh_seq = vec![0.0; n_t * top_m];
        dh_seq[(n_t - 1) * top_m..].copy_from_slice(d_out);
        for k in (0..self.cells.len()).rev() {
            let cell = &self.cells[k];
            let input: &[f64] = if k == 0 {
                xs
            } else {
                &cache.layers[k - 1].h[cell.input_dim..]
            };
            let mut dxs = vec![0.0; n_t * cell.input_dim];
            cell.backward_sequence(store, input, &cache.layers[k], &dh_seq, grad, &mut dxs);
            dh_seq = dxs;
        }
        dh_seq
    }
}
