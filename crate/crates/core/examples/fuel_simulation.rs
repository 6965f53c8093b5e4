//! Turns predicted flight times into fuel loadings under the two policies
//! and reports savings, emissions and reserve-depletion risk.
//!
//! ```text
//! cargo run --release --example fuel_simulation
//! ```

use std::collections::HashMap;

use swrnn::evaluation::{flat_features, lasso_baseline, lasso_predict};
use swrnn::fuel::{fleet_summary, fleet_totals, simulate_fleet, FuelConversion, FuelPolicy};
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
    let predictions: HashMap<String, f64> = features
        .test
        .iter()
        .zip(&prepared.test)
        .map(|(s, x)| (s.sample.flight_id.clone(), lasso_predict(&sel.model, &flat_features(x))))
        .collect();

    let policies = [FuelPolicy::pro_efficiency(), FuelPolicy::pro_safety()];
    let sim = simulate_fleet(&world.flights, &predictions, &policies, &world.metadata.hub);
    let conv = FuelConversion::default();
    let summary = fleet_summary(&sim.results, &conv);

    println!("{:<15} {:<9} {:>6} {:>12} {:>8} {:>12} {:>8} {:>7}", "policy", "group", "flights", "less carried", "%", "less burned", "%", "risk %");
    for g in sim.current.iter().chain(&summary.groups) {
        println!(
            "{:<15} {:<9} {:>6} {:>12.0} {:>8.2} {:>12.0} {:>8.2} {:>7.2}",
            g.policy, g.group, g.flights, g.less_carried, g.less_carried_pct, g.less_consumed, g.less_consumed_pct, g.risk_pct
        );
    }
    println!();
    for t in &summary.fleet {
        println!(
            "{:<15} saves {:.0} kg of fuel ({:.2}%): ${:.0}, {:.0} kg less CO2",
            t.policy, t.fuel_saved_kg, t.fuel_saved_pct, t.savings_usd, t.co2_reduced_kg
        );
    }

    // The same conversion applied to fleet-scale annual savings.
    println!();
    for (policy, saved) in [("pro_efficiency", 6.102e6), ("pro_safety", 3.178e6)] {
        let t = fleet_totals(policy, 0, saved, 0.0, &conv);
        println!(
            "{policy:<15} {:.3e} kg saved -> ${:.3}M, {:.3}M kg CO2",
            saved,
            t.savings_usd / 1e6,
            t.co2_reduced_kg / 1e6
        );
    }
    Ok(())
}
