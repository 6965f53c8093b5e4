//! Outlier labelling, data splits, training configuration and the training
//! loops.

pub mod config;
pub mod split;
pub mod trainer;

pub use config::{TrainConfig, SWEEP_N_T};
pub use split::{apportion, is_outlier, label_outliers, label_samples, stratified_split, SplitIndices, SplitSpec, Subset};
pub use trainer::{
    evaluate_mse, fit, history_csv, model_dims, model_options, pretrain_swl, timestep_sweep, train_model, EpochRecord,
    FitOutcome, FitSettings, OdPretrain, PretrainResult, SweepRow, TrainMethod, TrainReport,
};
