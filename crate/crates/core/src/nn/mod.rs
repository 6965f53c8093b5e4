//! Dense numerical kernel: tensors, layers with hand-written gradients,
//! Adam and finite-difference checking.

pub mod activation;
pub mod adam;
pub mod batchnorm;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod lstm;
pub mod param;
pub mod tensor;

pub use activation::{leaky_relu, leaky_relu_grad, sigmoid, DEFAULT_LEAKY_SLOPE};
pub use adam::{adam_step, adam_update, AdamConfig};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormConfig, BatchNormParams, BnCache, RunningStats};
pub use dense::{fcl, DenseParams};
pub use dropout::{dropout, dropout_backward};
pub use gradcheck::{grad_check, relative_error, CheckTarget, GradCheckReport};
pub use loss::mse_loss;
pub use lstm::{LstmCellParams, LstmStack, StackCache};
pub use param::{BlockId, BlockMeta, ParamBlock, ParamStore};
pub use tensor::{outer_broadcast, Tensor2};

/// Training or evaluation behaviour of batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
