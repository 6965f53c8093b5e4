//! The SWRNN network, its input preprocessing and checkpoints.

pub mod checkpoint;
pub mod preprocess;
pub mod swl;
pub mod swrnn;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use preprocess::{ModelInput, Preprocessing, TargetScaler};
pub use swl::{swl_apply, swl_apply_backward, swl_forward, SwlBank, SwlWeights};
pub use swrnn::{BatchOutput, ModelDims, ModelOptions, SwlEntry, SwrnnModel, SwrnnParameters};
