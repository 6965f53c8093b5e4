//! Retrains the network with different delay-state window lengths and
//! reports the validation RMSE of each.
//!
//! ```text
//! cargo run --release --example timestep_sweep -- [n_t,...]
//! ```

use swrnn::synth::{generate, ScenarioSpec};
use swrnn::training::{timestep_sweep, TrainConfig, TrainMethod};
use swrnn::workflow::{build_features, samples_of, world_inputs};

fn main() -> swrnn::Result<()> {
    let values: Vec<usize> = std::env::args()
        .nth(1)
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_else(|| vec![2, 6, 12, 24]);
    let longest = values.iter().copied().max().unwrap_or(1);
    let world = generate(&ScenarioSpec {
        days: 20,
        ..ScenarioSpec::default()
    })?;
    println!(
        "planted delay memory: {} h",
        world.metadata.delay_memory_hours
    );
    let features = build_features(&world_inputs(&world), longest, 42)?;
    let cfg = TrainConfig {
        batch_size: 32,
        lr: 3e-3,
        epochs: 6,
        ..TrainConfig::default()
    };
    let rows = timestep_sweep(
        &samples_of(&features.train),
        &samples_of(&features.val),
        &features.header.index_hash,
        &cfg,
        &values,
        TrainMethod::SingleStep,
    )?;
    for r in rows {
        println!("n_t = {:>2} h   validation RMSE {:.3} min", r.n_t, r.val_rmse);
    }
    Ok(())
}
