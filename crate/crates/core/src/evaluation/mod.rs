//! Metrics, baselines and report tables.

pub mod lasso;
pub mod metrics;
pub mod report;

pub use lasso::{
    lambda_grid, lambda_max, lasso_fit, lasso_fit_from, lasso_predict, lasso_select, soft_threshold, LassoFit,
    LassoModel, LassoOptions, LassoSelection,
};
pub use metrics::{metrics, subset_metrics, MetricsReport, SubsetMetrics};
pub use report::{
    emit_reports, error_summary, histogram, load_predictions, method_metrics, save_metrics, save_predictions,
    write_predictions,
    ErrorSummary, PredictionRow, ReportOptions, ReportSummary,
};

use crate::error::Result;
use crate::features::AssembledSample;
use crate::model::{ModelInput, Preprocessing};
use crate::training::{train_model, TrainConfig, TrainMethod, TrainReport};

pub const FPS: &str = "fps";
pub const LASSO: &str = "lasso";

/// The flight planning system's estimate: the planned flight time, as is.
pub fn fps_baseline(sample: &AssembledSample) -> f64 {
    sample.planned_flight_time()
}

/// The network's input as one flat vector: delay states, weather, flight
/// information.
pub fn flat_features(x: &ModelInput) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.od.len() + x.arr.len() + x.dep.len() + x.weather.len() + x.flight.len());
    for part in [&x.od, &x.arr, &x.dep, &x.weather, &x.flight] {
        v.extend_from_slice(part);
    }
    v
}

/// The network without spatial weighted layers, trained in one stage.
pub fn rnn_ablation(
    prep: &Preprocessing,
    train: &[&ModelInput],
    val: &[&ModelInput],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_model(TrainMethod::Ablation, prep, train, val, cfg)
}

/// LASSO on the flattened network input with lambda picked on validation.
pub fn lasso_baseline(prep: &Preprocessing, train: &[&ModelInput], val: &[&ModelInput]) -> Result<LassoSelection> {
    let tx: Vec<Vec<f64>> = train.iter().map(|x| flat_features(x)).collect();
    let ty: Vec<f64> = train.iter().map(|x| x.target).collect();
    let vx: Vec<Vec<f64>> = val.iter().map(|x| flat_features(x)).collect();
    let vy: Vec<f64> = val.iter().map(|x| x.target).collect();
    let hash = schema_hash(prep)?;
    lasso_select(&tx, &ty, &vx, &vy, &hash, &LassoOptions::default())
}

/// Hash of the fitted preprocessing, tying a LASSO model to its inputs.
pub fn schema_hash(prep: &Preprocessing) -> Result<String> {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(prep.to_json()?.as_bytes());
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}
