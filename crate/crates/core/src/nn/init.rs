use rand::Rng;

/// Fills `out` with independent draws from `U(-a, a)`.
pub fn uniform_fill<R: Rng>(out: &mut [f64], a: f64, rng: &mut R) {
    for v in out {
        *v = if a > 0.0 { rng.random_range(-a..a) } else { 0.0 };
    }
}

/// Glorot-uniform bound for a `fan_out x fan_in` weight matrix.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out).max(1) as f64).sqrt()
}
