use crate::nn::Tensor2;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of [`leaky_relu`]; 1 at the kink.
#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn leaky_relu_tensor(x: &Tensor2, slope: f64) -> Tensor2 {
    x.map(|v| leaky_relu(v, slope))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
