//! Runs every method on one world and writes the full report set:
//! metrics per subset, error distributions and a per-flight case study.
//!
//! ```text
//! cargo run --release --example compare_methods -- [report_dir]
//! ```

use std::path::PathBuf;

use swrnn::evaluation::{emit_reports, ReportOptions};
use swrnn::synth::{generate, ScenarioSpec};
use swrnn::training::TrainConfig;
use swrnn::workflow::{build_features, compare_methods, prepare, world_inputs, Method};

fn main() -> swrnn::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("swrnn-report"));
    let world = generate(&ScenarioSpec {
        days: 20,
        ..ScenarioSpec::default()
    })?;
    let features = build_features(&world_inputs(&world), 12, 42)?;
    let prepared = prepare(&features)?;
    let cfg = TrainConfig {
        n_t: 12,
        batch_size: 32,
        lr: 3e-3,
        epochs: 6,
        step1_epochs: 4,
        step2_epochs: 6,
        ..TrainConfig::default()
    };
    let run = compare_methods(&features, &prepared, &Method::ALL, &cfg)?;
    let summary = emit_reports(&run.predictions, &out, &ReportOptions::default())?;

    println!("{:<20} {:<8} {:>6} {:>8} {:>8} {:>8}", "method", "subset", "count", "RMSE", "MAE", "R2");
    for r in &summary.metrics {
        for (subset, m) in r.rows() {
            println!(
                "{:<20} {:<8} {:>6} {:>8.3} {:>8.3} {:>8.4}",
                r.method, subset, m.count, m.rmse, m.mae, m.r2
            );
        }
    }
    println!("\ncase study flight: {}", summary.case_flight.as_deref().unwrap_or("-"));
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
