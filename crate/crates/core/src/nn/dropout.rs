use rand::Rng;

use crate::nn::Mode;

/// Inverted dropout. Returns the output and the per-element multiplier
/// (`0` or `1/(1-rate)` in training, `1` in evaluation) for the backward pass.
pub fn dropout<R: Rng>(x: &[f64], rate: f64, mode: Mode, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    debug_assert!((0.0..1.0).contains(&rate));
    if mode == Mode::Eval || rate == 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
    (y, mask)
}

pub fn dropout_backward(dy: &[f64], mask: &[f64]) -> Vec<f64> {
    dy.iter().zip(mask).map(|(g, m)| g * m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [1.0, -2.0, 3.5];
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).0, x.to_vec());
        assert_eq!(dropout(&x, 0.5, Mode::Eval, &mut rng).0, x.to_vec());
    }

    #[test]
    fn expectation_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = vec![2.0; 100_000];
        let (y, mask) = dropout(&x, 0.2, Mode::Train, &mut rng);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
        assert!(mask.iter().all(|m| *m == 0.0 || (*m - 1.25).abs() < 1e-15));
        assert_eq!(dropout_backward(&[1.0, 1.0], &[0.0, 1.25]), vec![0.0, 1.25]);
    }
}
