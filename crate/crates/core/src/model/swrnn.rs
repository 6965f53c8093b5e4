//! The full network: spatial weighted layers, three stacked-LSTM branches, a
//! weather layer and an MLP regression head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::preprocess::{ModelInput, TargetScaler};
use crate::model::swl::{swl_apply, SwlBank, SwlWeights};
use crate::nn::{
    dropout, dropout_backward, leaky_relu, leaky_relu_grad, mse_loss, BatchNormConfig, BatchNormParams, BlockId, BnCache,
    DenseParams, LstmStack, Mode, ParamStore, RunningStats, StackCache, DEFAULT_LEAKY_SLOPE,
};

/// Samples per unit of parallel work. Fixed so that the order of the
/// gradient reduction, and therefore every result, does not depend on the
/// number of threads.
const CHUNK: usize = 16;

/// Layer sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_t: usize,
    pub n_od: usize,
    pub n_ap: usize,
    pub weather_dim: usize,
    pub flight_dim: usize,
    pub lstm_layers: usize,
    pub hidden_od: usize,
    pub hidden_ap: usize,
    pub weather_hidden: usize,
    pub mlp_hidden: [usize; 3],
}

impl ModelDims {
    /// Published sizes: two LSTM layers of 40 (OD) and 10 (airport) units,
    /// a 10-unit weather layer and a 150-100-30 MLP.
    pub fn standard(n_t: usize, n_od: usize, n_ap: usize, weather_dim: usize, flight_dim: usize) -> Self {
        ModelDims {
            n_t,
            n_od,
            n_ap,
            weather_dim,
            flight_dim,
            lstm_layers: 2,
            hidden_od: 40,
            hidden_ap: 10,
            weather_hidden: 10,
            mlp_hidden: [150, 100, 30],
        }
    }

    pub fn concat_dim(&self) -> usize {
        self.hidden_od + 2 * self.hidden_ap + self.weather_hidden + self.flight_dim
    }

    /// Delay-state cells per sample.
    pub fn window_cells(&self) -> usize {
        self.n_t * (self.n_od + 2 * self.n_ap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// `false` builds the ablation without spatial weighted layers: the
    /// scaled window feeds the LSTM branches directly.
    pub use_swl: bool,
    pub leaky_slope: f64,
    pub dropout_rate: f64,
    pub batch_norm: BatchNormConfig,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            use_swl: true,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            dropout_rate: 0.2,
            batch_norm: BatchNormConfig::default(),
        }
    }
}

/// Parameter blocks of one OD pair's spatial weighted layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwlEntry {
    pub w_od: BlockId,
    pub b_od: BlockId,
    pub w_arr: BlockId,
    pub b_arr: BlockId,
    pub w_dep: BlockId,
    pub b_dep: BlockId,
}

impl SwlEntry {
    fn blocks(&self) -> [BlockId; 6] {
        [self.w_od, self.b_od, self.w_arr, self.b_arr, self.w_dep, self.b_dep]
    }
}

/// Network weights, batch-norm statistics and output scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SwrnnModel {
    pub dims: ModelDims,
    pub options: ModelOptions,
    pub store: ParamStore,
    pub swl: Vec<SwlEntry>,
    pub lstm_od: LstmStack,
    pub lstm_arr: LstmStack,
    pub lstm_dep: LstmStack,
    pub weather_fcl: DenseParams,
    /// three hidden layers then the scalar output layer
    pub mlp: Vec<DenseParams>,
    pub bn: Vec<BatchNormParams>,
    pub running: Vec<RunningStats>,
    pub target: TargetScaler,
}

/// Alias matching the name used for the learnable state elsewhere.
pub type SwrnnParameters = SwrnnModel;

/// Per-sample activations of everything before the MLP.
struct BranchCache {
    od_in: Vec<f64>,
    arr_in: Vec<f64>,
    dep_in: Vec<f64>,
    od: StackCache,
    arr: StackCache,
    dep: StackCache,
}

struct MlpCache {
    /// input of each dense layer, `batch x in`
    inputs: Vec<Vec<f64>>,
    bn: Vec<BnCache>,
    /// batch-norm outputs (pre-activation)
    normed: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
}

/// Loss and predictions of one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub loss: f64,
    pub predictions: Vec<f64>,
}

impl SwrnnModel {
    /// Registers every block in a fixed order and initialises it from `seed`.
    pub fn new(dims: ModelDims, options: ModelOptions, seed: u64) -> Self {
        let mut model = Self::zeroed(dims, options);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.init(&mut rng);
        model
    }

    /// Every parameter zero; useful as an analytic reference point.
    pub fn zeroed(dims: ModelDims, options: ModelOptions) -> Self {
        let mut store = ParamStore::new();
        let swl = if options.use_swl {
            (0..dims.n_od)
                .map(|l| SwlEntry {
                    w_od: store.add(format!("swl.{l}.w_od"), 1, dims.n_od),
                    b_od: store.add(format!("swl.{l}.b_od"), 1, dims.n_od),
                    w_arr: store.add(format!("swl.{l}.w_arr"), 1, dims.n_ap),
                    b_arr: store.add(format!("swl.{l}.b_arr"), 1, dims.n_ap),
                    w_dep: store.add(format!("swl.{l}.w_dep"), 1, dims.n_ap),
                    b_dep: store.add(format!("swl.{l}.b_dep"), 1, dims.n_ap),
                })
                .collect()
        } else {
            Vec::new()
        };
        let q = dims.lstm_layers;
        let lstm_od = LstmStack::register(&mut store, "lstm_od", dims.n_od, dims.hidden_od, q);
        let lstm_arr = LstmStack::register(&mut store, "lstm_arr", dims.n_ap, dims.hidden_ap, q);
        let lstm_dep = LstmStack::register(&mut store, "lstm_dep", dims.n_ap, dims.hidden_ap, q);
        // a constant offset on any concatenated feature is cancelled by the first
        // batch norm, so the weather layer carries no bias
        let weather_fcl = DenseParams::register_without_bias(&mut store, "weather", dims.weather_dim, dims.weather_hidden);
        let mut mlp = Vec::new();
        let mut bn = Vec::new();
        let mut width = dims.concat_dim();
        for (k, &h) in dims.mlp_hidden.iter().enumerate() {
            mlp.push(DenseParams::register_without_bias(&mut store, &format!("mlp.{k}"), width, h));
            bn.push(BatchNormParams::register(&mut store, &format!("bn.{k}"), h));
            width = h;
        }
        mlp.push(DenseParams::register(&mut store, "mlp.out", width, 1));
        let running = dims.mlp_hidden.iter().map(|&h| RunningStats::new(h)).collect();
        SwrnnModel {
            dims,
            options,
            store,
            swl,
            lstm_od,
            lstm_arr,
            lstm_dep,
            weather_fcl,
            mlp,
            bn,
            running,
            target: TargetScaler::default(),
        }
    }

    fn init<R: Rng>(&mut self, rng: &mut R) {
        let n_od = self.dims.n_od;
        for l in 0..self.swl.len() {
            self.set_swl_weights(l, &SwlWeights::identity(n_od, self.dims.n_ap));
        }
        let store = &mut self.store;
        self.lstm_od.init(store, rng);
        self.lstm_arr.init(store, rng);
        self.lstm_dep.init(store, rng);
        self.weather_fcl.init(store, rng);
        for d in &self.mlp {
            d.init(store, rng);
        }
        for b in &self.bn {
            b.init(store);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.store.len()
    }

    /// Number of values held by the spatial weighted layer bank.
    pub fn swl_parameter_count(&self) -> usize {
        self.swl
            .iter()
            .flat_map(|e| e.blocks())
            .map(|b| self.store.meta(b).len())
            .sum()
    }

    pub fn swl_weights(&self, l: usize) -> SwlWeights {
        let e = &self.swl[l];
        let v = |b| self.store.value(b).to_vec();
        SwlWeights {
            w_od: v(e.w_od),
            b_od: v(e.b_od),
            w_arr: v(e.w_arr),
            b_arr: v(e.b_arr),
            w_dep: v(e.w_dep),
            b_dep: v(e.b_dep),
        }
    }

    pub fn set_swl_weights(&mut self, l: usize, w: &SwlWeights) {
        let e = self.swl[l];
        self.store.value_mut(e.w_od).copy_from_slice(&w.w_od);
        self.store.value_mut(e.b_od).copy_from_slice(&w.b_od);
        self.store.value_mut(e.w_arr).copy_from_slice(&w.w_arr);
        self.store.value_mut(e.b_arr).copy_from_slice(&w.b_arr);
        self.store.value_mut(e.w_dep).copy_from_slice(&w.w_dep);
        self.store.value_mut(e.b_dep).copy_from_slice(&w.b_dep);
    }

    pub fn swl_bank(&self) -> SwlBank {
        SwlBank {
            entries: (0..self.swl.len()).map(|l| self.swl_weights(l)).collect(),
            frozen: self.swl.iter().map(|e| self.store.is_frozen(e.w_od)).collect(),
        }
    }

    pub fn set_swl_bank(&mut self, bank: &SwlBank) -> Result<()> {
        if bank.len() != self.swl.len() {
            return Err(Error::IndexMismatch {
                expected: format!("bank of {}", self.swl.len()),
                found: format!("bank of {}", bank.len()),
            });
        }
        for (l, w) in bank.entries.iter().enumerate() {
            self.set_swl_weights(l, w);
            self.set_swl_frozen_entry(l, bank.frozen[l]);
        }
        Ok(())
    }

    fn set_swl_frozen_entry(&mut self, l: usize, frozen: bool) {
        for b in self.swl[l].blocks() {
            self.store.set_frozen(b, frozen);
        }
    }

    pub fn freeze_swl(&mut self, frozen: bool) {
        for l in 0..self.swl.len() {
            self.set_swl_frozen_entry(l, frozen);
        }
    }

    fn check_input(&self, x: &ModelInput) -> Result<()> {
        let d = &self.dims;
        let ok = x.od.len() == d.n_t * d.n_od
            && x.arr.len() == d.n_t * d.n_ap
            && x.dep.len() == d.n_t * d.n_ap
            && x.weather.len() == d.weather_dim
            && x.flight.len() == d.flight_dim;
        if !ok {
            return Err(Error::ShapeMismatch {
                op: "model input",
                left: (d.n_t, d.n_od + 2 * d.n_ap),
                right: (x.od.len() + x.arr.len() + x.dep.len(), x.flight.len()),
            });
        }
        if self.options.use_swl && x.od_index >= self.swl.len() {
            return Err(Error::IndexMismatch {
                expected: format!("od index < {}", self.swl.len()),
                found: x.od_index.to_string(),
            });
        }
        Ok(())
    }

    fn branch_forward(&self, x: &ModelInput, concat: &mut [f64]) -> Result<BranchCache> {
        let d = &self.dims;
        let slope = self.options.leaky_slope;
        let (od_in, arr_in, dep_in) = if self.options.use_swl {
            let e = &self.swl[x.od_index];
            let s = &self.store;
            let mut od = vec![0.0; x.od.len()];
            let mut arr = vec![0.0; x.arr.len()];
            let mut dep = vec![0.0; x.dep.len()];
            swl_apply(&x.od, s.value(e.w_od), s.value(e.b_od), slope, &mut od);
            swl_apply(&x.arr, s.value(e.w_arr), s.value(e.b_arr), slope, &mut arr);
            swl_apply(&x.dep, s.value(e.w_dep), s.value(e.b_dep), slope, &mut dep);
            (od, arr, dep)
        } else {
            (x.od.clone(), x.arr.clone(), x.dep.clone())
        };
        let od = self.lstm_od.forward(&self.store, &od_in, d.n_t)?;
        let arr = self.lstm_arr.forward(&self.store, &arr_in, d.n_t)?;
        let dep = self.lstm_dep.forward(&self.store, &dep_in, d.n_t)?;
        let (m_od, m_ap, m_wx) = (d.hidden_od, d.hidden_ap, d.weather_hidden);
        let mut at = 0;
        concat[at..at + m_od].copy_from_slice(od.output(m_od));
        at += m_od;
        concat[at..at + m_ap].copy_from_slice(arr.output(m_ap));
        at += m_ap;
        concat[at..at + m_ap].copy_from_slice(dep.output(m_ap));
        at += m_ap;
        self.weather_fcl.forward(&self.store, &x.weather, &mut concat[at..at + m_wx]);
        at += m_wx;
        concat[at..].copy_from_slice(&x.flight);
        Ok(BranchCache {
            od_in,
            arr_in,
            dep_in,
            od,
            arr,
            dep,
        })
    }

    fn branch_backward(&self, x: &ModelInput, cache: &BranchCache, dconcat: &[f64], grad: &mut [f64]) {
        let d = &self.dims;
        let s = &self.store;
        let (m_od, m_ap, m_wx) = (d.hidden_od, d.hidden_ap, d.weather_hidden);
        let d_od = self.lstm_od.backward(s, &cache.od_in, &cache.od, &dconcat[..m_od], grad);
        let d_arr = self
            .lstm_arr
            .backward(s, &cache.arr_in, &cache.arr, &dconcat[m_od..m_od + m_ap], grad);
        let d_dep = self
            .lstm_dep
            .backward(s, &cache.dep_in, &cache.dep, &dconcat[m_od + m_ap..m_od + 2 * m_ap], grad);
        let at = m_od + 2 * m_ap;
        self.weather_fcl
            .backward(s, &x.weather, &dconcat[at..at + m_wx], grad, None);
        if self.options.use_swl {
            let e = &self.swl[x.od_index];
            if !s.is_frozen(e.w_od) {
                let slope = self.options.leaky_slope;
                swl_backward(s, e.w_od, e.b_od, &x.od, &d_od, slope, grad);
                swl_backward(s, e.w_arr, e.b_arr, &x.arr, &d_arr, slope, grad);
                swl_backward(s, e.w_dep, e.b_dep, &x.dep, &d_dep, slope, grad);
            }
        }
    }

    fn mlp_forward<R: Rng>(
        &self,
        concat: Vec<f64>,
        baselines: &[f64],
        batch: usize,
        mode: Mode,
        running: &mut [RunningStats],
        rng: &mut R,
    ) -> (Vec<f64>, MlpCache) {
        let slope = self.options.leaky_slope;
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.mlp.len()),
            bn: Vec::new(),
            normed: Vec::new(),
            masks: Vec::new(),
        };
        let mut h = concat;
        for k in 0..self.bn.len() {
            let z = self.mlp[k].forward_batch(&self.store, &h, batch);
            cache.inputs.push(h);
            let (normed, bn_cache) =
                self.bn[k].forward(&self.store, &z, batch, &mut running[k], mode, self.options.batch_norm);
            let act: Vec<f64> = normed.iter().map(|&v| leaky_relu(v, slope)).collect();
            let (out, mask) = dropout(&act, self.options.dropout_rate, mode, rng);
            cache.bn.push(bn_cache);
            cache.normed.push(normed);
            cache.masks.push(mask);
            h = out;
        }
        let out_layer = self.mlp.last().expect("output layer");
        let raw = out_layer.forward_batch(&self.store, &h, batch);
        cache.inputs.push(h);
        let y = raw
            .iter()
            .zip(baselines)
            .map(|(s, b)| b + self.target.mean + self.target.std * s)
            .collect();
        (y, cache)
    }

    /// Returns the gradient with respect to the concatenated features.
    fn mlp_backward(&self, cache: &MlpCache, dy: &[f64], batch: usize, grad: &mut [f64]) -> Vec<f64> {
        let slope = self.options.leaky_slope;
        let ds: Vec<f64> = dy.iter().map(|g| g * self.target.std).collect();
        let last = self.mlp.len() - 1;
        let mut dh = self.mlp[last].backward_batch(&self.store, &cache.inputs[last], &ds, batch, grad);
        for k in (0..self.bn.len()).rev() {
            let dact = dropout_backward(&dh, &cache.masks[k]);
            let dnormed: Vec<f64> = dact
                .iter()
                .zip(&cache.normed[k])
                .map(|(g, &v)| g * leaky_relu_grad(v, slope))
                .collect();
            let dz = self.bn[k].backward(&self.store, &cache.bn[k], &dnormed, grad);
            dh = self.mlp[k].backward_batch(&self.store, &cache.inputs[k], &dz, batch, grad);
        }
        dh
    }

    /// Evaluation-mode prediction in minutes for one sample.
    pub fn forward(&self, x: &ModelInput) -> Result<f64> {
        self.check_input(x)?;
        let mut concat = vec![0.0; self.dims.concat_dim()];
        self.branch_forward(x, &mut concat)?;
        let mut running = self.running.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, _) = self.mlp_forward(concat, &[x.baseline], 1, Mode::Eval, &mut running, &mut rng);
        if !y[0].is_finite() {
            return Err(Error::NonFiniteActivation("model output".into()));
        }
        Ok(y[0])
    }

    /// Evaluation-mode predictions; samples are independent, so the work is
    /// spread over the thread pool without affecting the results.
    pub fn predict(&self, inputs: &[ModelInput]) -> Result<Vec<f64>> {
        inputs.par_iter().map(|x| self.forward(x)).collect()
    }

    /// Training-mode forward and backward pass over `batch`. Leaves the
    /// gradient of the mean squared error in `store.grad` (zero for frozen
    /// blocks) and updates the batch-norm running statistics.
    pub fn train_batch<R: Rng>(&mut self, batch: &[&ModelInput], rng: &mut R) -> Result<BatchOutput> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty training batch".into()));
        }
        for x in batch {
            self.check_input(x)?;
        }
        let n = batch.len();
        let cd = self.dims.concat_dim();
        let mut concat = vec![0.0; n * cd];
        let caches: Vec<BranchCache> = {
            let this = &*self;
            concat
                .par_chunks_mut(CHUNK * cd)
                .zip(batch.par_chunks(CHUNK))
                .map(|(out, xs)| {
                    xs.iter()
                        .zip(out.chunks_exact_mut(cd))
                        .map(|(x, c)| this.branch_forward(x, c))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<Vec<_>>>>()?
                .into_iter()
                .flatten()
                .collect()
        };
        let mut running = std::mem::take(&mut self.running);
        let baselines: Vec<f64> = batch.iter().map(|x| x.baseline).collect();
        let (pred, mlp_cache) = self.mlp_forward(concat, &baselines, n, Mode::Train, &mut running, rng);
        self.running = running;
        let truth: Vec<f64> = batch.iter().map(|x| x.target).collect();
        let (loss, dy) = mse_loss(&pred, &truth);
        if !loss.is_finite() {
            return Err(Error::NonFiniteActivation("training loss".into()));
        }

        let mut grad = vec![0.0; self.store.len()];
        let dconcat = self.mlp_backward(&mlp_cache, &dy, n, &mut grad);
        let this = &*self;
        let partials: Vec<Vec<f64>> = batch
            .par_chunks(CHUNK)
            .zip(caches.par_chunks(CHUNK))
            .zip(dconcat.par_chunks(CHUNK * cd))
            .map(|((xs, cs), dc)| {
                let mut g = vec![0.0; this.store.len()];
                for ((x, c), d) in xs.iter().zip(cs).zip(dc.chunks_exact(cd)) {
                    this.branch_backward(x, c, d, &mut g);
                }
                g
            })
            .collect();
        for p in &partials {
            for (g, v) in grad.iter_mut().zip(p) {
                *g += v;
            }
        }
        for (m, g) in self.store.trainable_mask().iter().zip(grad.iter_mut()) {
            if !m {
                *g = 0.0;
            }
        }
        self.store.grad = grad;
        Ok(BatchOutput { loss, predictions: pred })
    }
}

/// Gradient of `leaky(w_k x_jk + b_k)` with respect to `w` and `b`.
fn swl_backward(store: &ParamStore, w: BlockId, b: BlockId, x: &[f64], dout: &[f64], slope: f64, grad: &mut [f64]) {
    let wv = store.value(w);
    let bv = store.value(b);
    let cols = wv.len();
    let rw = store.range(w);
    let rb = store.range(b);
    for (xr, dr) in x.chunks_exact(cols).zip(dout.chunks_exact(cols)) {
        for k in 0..cols {
            let dz = dr[k] * leaky_relu_grad(wv[k] * xr[k] + bv[k], slope);
            grad[rw.start + k] += dz * xr[k];
            grad[rb.start + k] += dz;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, CheckTarget};

    pub(crate) fn mini_dims() -> ModelDims {
        ModelDims {
            n_t: 4,
            n_od: 6,
            n_ap: 4,
            weather_dim: 5,
            flight_dim: 3,
            lstm_layers: 2,
            hidden_od: 3,
            hidden_ap: 3,
            weather_hidden: 3,
            mlp_hidden: [5, 4, 3],
        }
    }

    pub(crate) fn random_input(d: &ModelDims, rng: &mut ChaCha8Rng, od_index: usize) -> ModelInput {
        let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect::<Vec<f64>>();
        ModelInput {
            od_index,
            od: v(d.n_t * d.n_od),
            arr: v(d.n_t * d.n_ap),
            dep: v(d.n_t * d.n_ap),
            weather: v(d.weather_dim),
            flight: v(d.flight_dim),
            baseline: 0.0,
            target: 0.0,
        }
    }

    #[test]
    fn zero_model_predicts_zero() {
        let d = mini_dims();
        let m = SwrnnModel::zeroed(d, ModelOptions::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(m.forward(&random_input(&d, &mut rng, 2)).unwrap(), 0.0);
    }

    #[test]
    fn eval_forward_is_repeatable() {
        let d = mini_dims();
        let m = SwrnnModel::new(d, ModelOptions::default(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_input(&d, &mut rng, 1);
        assert_eq!(m.forward(&x).unwrap().to_bits(), m.forward(&x).unwrap().to_bits());
    }

    #[test]
    fn ablation_drops_exactly_the_bank() {
        let d = mini_dims();
        let full = SwrnnModel::new(d, ModelOptions::default(), 4);
        let abl = SwrnnModel::new(d, ModelOptions { use_swl: false, ..Default::default() }, 4);
        assert_eq!(full.parameter_count() - abl.parameter_count(), full.swl_parameter_count());
        assert_eq!(full.swl_parameter_count(), d.n_od * 2 * (d.n_od + 2 * d.n_ap));
    }

    #[test]
    fn other_bank_entries_do_not_matter() {
        let d = mini_dims();
        let mut m = SwrnnModel::new(d, ModelOptions::default(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_input(&d, &mut rng, 2);
        let before = m.forward(&x).unwrap();
        let mut w = m.swl_weights(3);
        w.w_od.iter_mut().for_each(|v| *v = -4.0);
        m.set_swl_weights(3, &w);
        assert_eq!(m.forward(&x).unwrap(), before);
        w.w_od[0] = 0.0;
        m.set_swl_weights(2, &w);
        assert_ne!(m.forward(&x).unwrap(), before);
    }

    #[test]
    fn perfect_predictions_give_zero_gradients() {
        let d = mini_dims();
        let mut m = SwrnnModel::new(d, ModelOptions { dropout_rate: 0.0, ..Default::default() }, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut xs: Vec<ModelInput> = (0..3).map(|i| random_input(&d, &mut rng, i)).collect();
        let mut probe = m.clone();
        let out = probe.train_batch(&xs.iter().collect::<Vec<_>>(), &mut rng).unwrap();
        for (x, p) in xs.iter_mut().zip(&out.predictions) {
            x.target = *p;
        }
        let out = m.train_batch(&xs.iter().collect::<Vec<_>>(), &mut rng).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(m.store.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn frozen_bank_gets_no_gradient() {
        let d = mini_dims();
        let mut m = SwrnnModel::new(d, ModelOptions::default(), 5);
        m.freeze_swl(true);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<ModelInput> = (0..4)
            .map(|i| {
                let mut x = random_input(&d, &mut rng, i);
                x.target = 3.0;
                x
            })
            .collect();
        m.train_batch(&xs.iter().collect::<Vec<_>>(), &mut rng).unwrap();
        for e in &m.swl {
            for b in e.blocks() {
                assert!(m.store.range(b).all(|i| m.store.grad[i] == 0.0));
            }
        }
        assert!(m.store.grad.iter().any(|g| *g != 0.0));
    }

    #[test]
    fn end_to_end_gradient_check() {
        let d = mini_dims();
        let mut m = SwrnnModel::new(d, ModelOptions::default(), 8);
        m.target = TargetScaler { mean: 1.0, std: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // non-trivial SWL weights so both LeakyReLU branches are exercised
        for l in 0..d.n_od {
            let mut w = m.swl_weights(l);
            w.w_od.iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
            w.b_od.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
            m.set_swl_weights(l, &w);
        }
        let xs: Vec<ModelInput> = (0..5)
            .map(|i| {
                let mut x = random_input(&d, &mut rng, i % d.n_od);
                x.target = rng.random_range(-2.0..2.0);
                x
            })
            .collect();
        let refs: Vec<&ModelInput> = xs.iter().collect();
        let mut probe = m.clone();
        probe.train_batch(&refs, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let analytic = probe.store.grad.clone();
        let theta = m.store.value.clone();
        let report = grad_check(
            CheckTarget {
                f: &mut |t: &[f64]| {
                    let mut c = m.clone();
                    c.store.value.copy_from_slice(t);
                    c.train_batch(&refs, &mut ChaCha8Rng::seed_from_u64(42)).unwrap().loss
                },
                analytic: &analytic,
                theta: &theta,
            },
            None,
            1e-6,
        );
        let name = m.store.blocks().iter().find(|b| b.range().contains(&report.worst_index)).map(|b| b.name.clone());
        assert!(report.max_rel_error < 1e-4, "{report:?} {name:?} {}", analytic[report.worst_index]);
    }
}
