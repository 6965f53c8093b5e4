use serde::{Deserialize, Serialize};

use crate::nn::param::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update of one slice at step `t >= 1`.
pub fn adam_update(value: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], cfg: AdamConfig, t: u64) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Advances the store's step counter and updates every unfrozen block
/// from its accumulated gradient.
pub fn adam_step(store: &mut ParamStore, cfg: AdamConfig) {
    store.step += 1;
    let t = store.step;
    let ranges: Vec<_> = store.blocks().iter().filter(|b| !b.frozen).map(|b| b.range()).collect();
    for r in ranges {
        adam_update(
            &mut store.value[r.clone()],
            &store.grad[r.clone()],
            &mut store.adam_m[r.clone()],
            &mut store.adam_v[r],
            cfg,
            t,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64, g: f64) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.add("p", 1, 1);
        s.value_mut(id)[0] = v;
        s.grad[0] = g;
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = one_param(1.0, -3.7);
        adam_step(&mut s, AdamConfig::default());
        assert!((s.value[0] - (1.0 + 1e-3)).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_and_zero_lr_are_no_ops() {
        let mut s = one_param(0.123456789, 0.0);
        adam_step(&mut s, AdamConfig::default());
        assert_eq!(s.value[0], 0.123456789);
        let mut s = one_param(0.987654321, 5.0);
        adam_step(&mut s, AdamConfig { lr: 0.0, ..Default::default() });
        assert_eq!(s.value[0].to_bits(), 0.987654321f64.to_bits());
    }

    #[test]
    fn two_steps_match_reference_trace() {
        let g = 0.5;
        let mut s = one_param(2.0, g);
        let cfg = AdamConfig::default();
        adam_step(&mut s, cfg);
        adam_step(&mut s, cfg);
        // hand-rolled scalar reference
        let (mut x, mut m, mut v) = (2.0f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 1e-3 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((s.value[0] - x).abs() < 1e-12);
    }

    #[test]
    fn frozen_blocks_do_not_move() {
        let mut s = ParamStore::new();
        let a = s.add("a", 1, 2);
        let b = s.add("b", 1, 1);
        s.grad.iter_mut().for_each(|g| *g = 1.0);
        s.set_frozen(a, true);
        adam_step(&mut s, AdamConfig::default());
        assert_eq!(s.value(a), &[0.0, 0.0]);
        assert!(s.value(b)[0] < 0.0);
    }
}
