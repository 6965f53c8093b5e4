/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], truth: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(pred.len(), truth.len());
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    (loss / n, grad)
}
