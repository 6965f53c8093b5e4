//! Trains the spatial-weighted recurrent network with the two-step
//! procedure on a small synthetic world, checkpoints it and evaluates the
//! reloaded model on the test split.
//!
//! ```text
//! cargo run --release --example train_swrnn
//! ```

use swrnn::evaluation::metrics;
use swrnn::model::{load_checkpoint, save_checkpoint};
use swrnn::synth::{generate, ScenarioSpec};
use swrnn::training::{TrainConfig, TrainMethod};
use swrnn::workflow::{build_features, checkpoint_predictions, labels_of, prepare, train_checkpoint, world_inputs};

fn main() -> swrnn::Result<()> {
    let world = generate(&ScenarioSpec {
        days: 20,
        ..ScenarioSpec::default()
    })?;
    let features = build_features(&world_inputs(&world), 12, 42)?;
    let prepared = prepare(&features)?;
    println!(
        "{} train / {} val / {} test samples",
        features.train.len(),
        features.val.len(),
        features.test.len()
    );

    let cfg = TrainConfig {
        n_t: 12,
        batch_size: 32,
        lr: 3e-3,
        step1_epochs: 5,
        step2_epochs: 8,
        ..TrainConfig::default()
    };
    let (ck, report) = train_checkpoint(&prepared, TrainMethod::TwoStep, &cfg)?;
    if let Some(ods) = &report.pretrain {
        let pretrained = ods.iter().filter(|o| o.best_val_loss.is_some()).count();
        println!("step 1: pretrained spatial layers for {pretrained} of {} OD pairs", ods.len());
    }
    println!("step 2:");
    for h in &report.history {
        println!(
            "  epoch {:>2}  train MSE {:>8.3}  val RMSE {:>6.3} min",
            h.epoch, h.train_loss, h.val_rmse
        );
    }
    println!("  kept epoch {}", report.best_epoch);

    let path = std::env::temp_dir().join("swrnn_two_step.ckpt");
    save_checkpoint(&ck, &path)?;
    let reloaded = load_checkpoint(&path, Some(&features.header.index_hash))?;
    let preds = checkpoint_predictions(&reloaded, &features.test)?;
    let truth: Vec<f64> = features.test.iter().map(|s| s.sample.target).collect();
    let m = metrics(TrainMethod::TwoStep.name(), &preds, &truth, &labels_of(&features.test))?;
    println!("\nreloaded {} and evaluated the test split:", path.display());
    for (subset, s) in m.rows() {
        println!("  {subset:<8} n={:<5} RMSE {:.3}  MAE {:.3}  R2 {:.4}", s.count, s.rmse, s.mae, s.r2);
    }
    Ok(())
}
