//! Finite-difference checks of every differentiable operation and of a
//! miniature end-to-end network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{swl_apply, swl_apply_backward, ModelDims, ModelInput, ModelOptions, SwrnnModel, TargetScaler};
use crate::nn::tensor::dot;
use crate::nn::{
    batchnorm_backward, batchnorm_forward, dropout, dropout_backward, grad_check, leaky_relu, leaky_relu_grad, mse_loss,
    BatchNormConfig, CheckTarget, DenseParams, GradCheckReport, LstmStack, Mode, ParamStore, RunningStats,
};

/// Step of the centred differences.
pub const FD_STEP: f64 = 1e-5;

/// Result of checking one operation with respect to one argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpCheck {
    pub op: &'static str,
    pub wrt: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
}

fn check(op: &'static str, wrt: &'static str, f: &mut dyn FnMut(&[f64]) -> f64, analytic: &[f64], theta: &[f64]) -> OpCheck {
    let r = grad_check(CheckTarget { f, analytic, theta }, None, FD_STEP);
    OpCheck {
        op,
        wrt,
        max_rel_error: r.max_rel_error,
        checked: r.checked,
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values at least `gap` away from zero, so differences never straddle a kink.
fn off_kink(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(gap..2.0);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn params_check(
    op: &'static str,
    store: &ParamStore,
    grad: &[f64],
    loss: &dyn Fn(&ParamStore) -> f64,
) -> OpCheck {
    let theta = store.value.clone();
    check(
        op,
        "parameters",
        &mut |t: &[f64]| {
            let mut s = store.clone();
            s.value.copy_from_slice(t);
            loss(&s)
        },
        grad,
        &theta,
    )
}

/// Checks each primitive against centred differences of a random linear
/// projection of its output.
pub fn op_gradient_suite(seed: u64) -> Vec<OpCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // LeakyReLU
    let slope = 0.01;
    let x = off_kink(&mut rng, 8, 0.05);
    let proj = uniform(&mut rng, 8, -1.0, 1.0);
    let g: Vec<f64> = x.iter().zip(&proj).map(|(v, p)| p * leaky_relu_grad(*v, slope)).collect();
    out.push(check(
        "leaky_relu",
        "input",
        &mut |v: &[f64]| v.iter().zip(&proj).map(|(a, p)| p * leaky_relu(*a, slope)).sum(),
        &g,
        &x,
    ));

    // mean squared error
    let pred = uniform(&mut rng, 6, -2.0, 2.0);
    let truth = uniform(&mut rng, 6, -2.0, 2.0);
    let (_, g) = mse_loss(&pred, &truth);
    out.push(check("mse_loss", "prediction", &mut |p: &[f64]| mse_loss(p, &truth).0, &g, &pred));

    // dense layer, batch of 3
    let mut store = ParamStore::new();
    let layer = DenseParams::register(&mut store, "dense", 4, 3);
    layer.init(&mut store, &mut rng);
    let b = layer.b.expect("dense layer with bias");
    let bias = uniform(&mut rng, 3, -0.5, 0.5);
    store.value_mut(b).copy_from_slice(&bias);
    let x = uniform(&mut rng, 12, -1.0, 1.0);
    let proj = uniform(&mut rng, 9, -1.0, 1.0);
    let loss = |s: &ParamStore, x: &[f64]| dot(&layer.forward_batch(s, x, 3), &proj);
    let mut grad = vec![0.0; store.len()];
    let dx = layer.backward_batch(&store, &x, &proj, 3, &mut grad);
    out.push(params_check("dense", &store, &grad, &|s| loss(s, &x)));
    out.push(check("dense", "input", &mut |v: &[f64]| loss(&store, v), &dx, &x));

    // LSTM: a single cell over three steps, then a two-layer stack
    for (op, n_t, d, m, q) in [("lstm_cell", 3, 3, 4, 1), ("lstm_stack", 4, 3, 5, 2)] {
        let mut store = ParamStore::new();
        let stack = LstmStack::register(&mut store, op, d, m, q);
        stack.init(&mut store, &mut rng);
        let xs = uniform(&mut rng, n_t * d, -1.0, 1.0);
        let proj = uniform(&mut rng, m, -1.0, 1.0);
        let loss = |s: &ParamStore, xs: &[f64]| {
            let cache = stack.forward(s, xs, n_t).expect("lstm shapes");
            dot(cache.output(m), &proj)
        };
        let cache = stack.forward(&store, &xs, n_t).expect("lstm shapes");
        let mut grad = vec![0.0; store.len()];
        let dxs = stack.backward(&store, &xs, &cache, &proj, &mut grad);
        out.push(params_check(op, &store, &grad, &|s| loss(s, &xs)));
        out.push(check(op, "input", &mut |v: &[f64]| loss(&store, v), &dxs, &xs));
    }

    // batch norm in training mode, batch of 4 with 3 features
    let cfg = BatchNormConfig::default();
    let x = uniform(&mut rng, 12, -2.0, 2.0);
    let gamma = uniform(&mut rng, 3, 0.5, 1.5);
    let beta = uniform(&mut rng, 3, -0.5, 0.5);
    let proj = uniform(&mut rng, 12, -1.0, 1.0);
    let bn = |x: &[f64], g: &[f64], b: &[f64]| {
        let mut rs = RunningStats::new(3);
        dot(&batchnorm_forward(x, 4, g, b, &mut rs, Mode::Train, cfg).0, &proj)
    };
    let mut rs = RunningStats::new(3);
    let (_, cache) = batchnorm_forward(&x, 4, &gamma, &beta, &mut rs, Mode::Train, cfg);
    let mut dg = vec![0.0; 3];
    let mut db = vec![0.0; 3];
    let dx = batchnorm_backward(&cache, &gamma, &proj, &mut dg, &mut db);
    out.push(check("batch_norm", "input", &mut |v: &[f64]| bn(v, &gamma, &beta), &dx, &x));
    out.push(check("batch_norm", "gamma", &mut |v: &[f64]| bn(&x, v, &beta), &dg, &gamma));
    out.push(check("batch_norm", "beta", &mut |v: &[f64]| bn(&x, &gamma, v), &db, &beta));

    // dropout with its mask held fixed
    let x = uniform(&mut rng, 10, -1.0, 1.0);
    let proj = uniform(&mut rng, 10, -1.0, 1.0);
    let (_, mask) = dropout(&x, 0.3, Mode::Train, &mut rng);
    let dx = dropout_backward(&proj, &mask);
    out.push(check(
        "dropout",
        "input",
        &mut |v: &[f64]| v.iter().zip(&mask).zip(&proj).map(|((a, m), p)| a * m * p).sum(),
        &dx,
        &x,
    ));

    // spatial weighted layer over a 3 x 4 matrix
    let x = off_kink(&mut rng, 12, 0.2);
    let w = uniform(&mut rng, 4, 0.5, 1.5);
    let bias = uniform(&mut rng, 4, -0.05, 0.05);
    let proj = uniform(&mut rng, 12, -1.0, 1.0);
    let swl = |x: &[f64], w: &[f64], b: &[f64]| {
        let mut y = vec![0.0; x.len()];
        swl_apply(x, w, b, slope, &mut y);
        dot(&y, &proj)
    };
    let mut dw = vec![0.0; 4];
    let mut db = vec![0.0; 4];
    let dx = swl_apply_backward(&x, &w, &bias, slope, &proj, &mut dw, &mut db);
    out.push(check("swl", "input", &mut |v: &[f64]| swl(v, &w, &bias), &dx, &x));
    out.push(check("swl", "weight", &mut |v: &[f64]| swl(&x, v, &bias), &dw, &w));
    out.push(check("swl", "bias", &mut |v: &[f64]| swl(&x, &w, v), &db, &bias));
    out
}

/// Layer sizes of the miniature network: `N_t = 4`, six OD pairs, four
/// airports, three hidden units per recurrent layer.
pub fn miniature_dims() -> ModelDims {
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

/// A random input with entries in `[-1.5, 1.5)`.
pub fn random_input<R: Rng>(d: &ModelDims, rng: &mut R, od_index: usize) -> ModelInput {
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

/// Samples in the miniature training batch.
pub const MINIATURE_BATCH: usize = 16;

/// The miniature network with non-default weights: spatial layers away from
/// identity so both LeakyReLU branches are exercised, and recurrent and dense
/// weights drawn wide enough that every coordinate carries a gradient well
/// above the rounding noise of the differences.
pub fn miniature_problem(seed: u64) -> (SwrnnModel, Vec<ModelInput>) {
    let d = miniature_dims();
    let mut m = SwrnnModel::new(d, ModelOptions::default(), seed);
    m.target = TargetScaler { mean: 1.0, std: 2.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for l in 0..d.n_od {
        let mut w = m.swl_weights(l);
        w.w_od.iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
        w.b_od.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        w.w_dep.iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
        m.set_swl_weights(l, &w);
    }
    let wide: Vec<_> = m
        .store
        .blocks()
        .iter()
        .filter(|b| b.name.starts_with("lstm") || b.name.ends_with(".w"))
        .map(|b| b.range())
        .collect();
    for r in wide {
        m.store.value[r].iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
    }
    let xs = (0..MINIATURE_BATCH)
        .map(|i| {
            let mut x = random_input(&d, &mut rng, i % d.n_od);
            x.baseline = rng.random_range(-1.0..1.0);
            x.target = rng.random_range(-2.0..2.0);
            x
        })
        .collect();
    (m, xs)
}

/// Analytic gradient of the miniature batch loss, and the loss as a function
/// of the flat parameter vector, dropout included (its masks are replayed
/// from a fixed seed).
fn miniature_check<T>(seed: u64, run: impl FnOnce(CheckTarget<'_>) -> T) -> T {
    let (m, xs) = miniature_problem(seed);
    let refs: Vec<&ModelInput> = xs.iter().collect();
    let mask_seed = seed.wrapping_add(2);
    let mut probe = m.clone();
    probe
        .train_batch(&refs, &mut ChaCha8Rng::seed_from_u64(mask_seed))
        .expect("finite miniature batch");
    let analytic = probe.store.grad.clone();
    let theta = m.store.value.clone();
    run(CheckTarget {
        f: &mut |t: &[f64]| {
            let mut c = m.clone();
            c.store.value.copy_from_slice(t);
            c.train_batch(&refs, &mut ChaCha8Rng::seed_from_u64(mask_seed))
                .expect("finite miniature batch")
                .loss
        },
        analytic: &analytic,
        theta: &theta,
    })
}

/// Checks the gradient of a training batch's loss with respect to every
/// parameter of the miniature network.
pub fn model_gradient_check(seed: u64) -> GradCheckReport {
    miniature_check(seed, |t| grad_check(t, None, FD_STEP))
}

/// Largest `|analytic - numeric| / (tol * max(|analytic|, |numeric|) + floor)`
/// over every parameter of the miniature network; at most 1 when each
/// coordinate agrees to relative `tol` up to an absolute `floor`.
///
/// A purely relative test cannot resolve coordinates whose true gradient is
/// near the rounding noise of the loss divided by the step, which for an
/// O(1) loss is about `1e-11`; this form is usable on any seed.
pub fn model_gradient_ratio(seed: u64, tol: f64, floor: f64) -> f64 {
    miniature_check(seed, |CheckTarget { f, analytic, theta }| {
        let mut work = theta.to_vec();
        let mut worst: f64 = 0.0;
        for i in 0..theta.len() {
            work[i] = theta[i] + FD_STEP;
            let plus = f(&work);
            work[i] = theta[i] - FD_STEP;
            let minus = f(&work);
            work[i] = theta[i];
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[i];
            worst = worst.max((a - numeric).abs() / (tol * a.abs().max(numeric.abs()) + floor));
        }
        worst
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes() {
        for seed in 0..10 {
            for c in op_gradient_suite(seed) {
                assert!(c.max_rel_error < 1e-5, "seed {seed}: {c:?}");
                assert!(c.checked > 0);
            }
        }
    }

    #[test]
    fn miniature_network_passes() {
        let r = model_gradient_check(0);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert_eq!(r.checked, miniature_problem(0).0.store.len());
    }

    #[test]
    fn miniature_network_agrees_on_other_seeds() {
        for seed in 1..4 {
            let worst = model_gradient_ratio(seed, 1e-4, 1e-10);
            assert!(worst <= 1.0, "seed {seed}: {worst}");
        }
    }
}
