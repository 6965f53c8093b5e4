//! Fits the LASSO baseline by cyclic coordinate descent along a
//! warm-started lambda path and picks lambda on the validation split.
//!
//! ```text
//! cargo run --release --example lasso_baseline
//! ```

use swrnn::evaluation::{flat_features, lasso_baseline, lasso_predict, subset_metrics};
use swrnn::synth::{generate, ScenarioSpec};
use swrnn::workflow::{build_features, prepare, world_inputs};

fn main() -> swrnn::Result<()> {
    let world = generate(&ScenarioSpec {
        days: 20,
        ..ScenarioSpec::default()
    })?;
    let features = build_features(&world_inputs(&world), 12, 42)?;
    let prepared = prepare(&features)?;
    let sel = lasso_baseline(&prepared.prep, &prepared.train_refs(), &prepared.val_refs())?;

    println!("{:>12} {:>12}", "lambda", "val RMSE");
    for (lambda, rmse) in &sel.path {
        let mark = if *lambda == sel.model.lambda { "  <- selected" } else { "" };
        println!("{lambda:>12.5} {rmse:>12.4}{mark}");
    }
    let nonzero = sel.model.coefficients.iter().filter(|c| **c != 0.0).count();
    println!(
        "\n{} of {} coefficients are non-zero; intercept {:.3}",
        nonzero,
        sel.model.coefficients.len(),
        sel.model.intercept
    );

    let preds: Vec<f64> = prepared
        .test
        .iter()
        .map(|x| lasso_predict(&sel.model, &flat_features(x)))
        .collect();
    let truth: Vec<f64> = prepared.test.iter().map(|x| x.target).collect();
    if let Some(m) = subset_metrics(&preds, &truth) {
        println!("test RMSE {:.3} min, MAE {:.3} min, R2 {:.4}", m.rmse, m.mae, m.r2);
    }
    Ok(())
}
