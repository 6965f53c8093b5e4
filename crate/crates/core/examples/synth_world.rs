//! Generates a synthetic network with planted OD-specific delay coupling,
//! writes it to disk and prints the ground truth it records.
//!
//! ```text
//! cargo run --release --example synth_world -- [out_dir] [seed]
//! ```

use std::path::PathBuf;

use swrnn::synth::{generate, group_stats, write_world, ScenarioSpec};

fn main() -> swrnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("swrnn-world"));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let spec = ScenarioSpec::with_seed(seed);
    let world = generate(&spec)?;
    std::fs::create_dir_all(&out).map_err(|e| swrnn::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let files = write_world(&world, &out)?;

    let md = &world.metadata;
    println!(
        "{} airports, {} OD pairs, hub {}, {} flights over {} days, {} METAR reports",
        md.airports.len(),
        md.ods.len(),
        md.hub,
        md.flights,
        spec.days,
        md.metar_reports
    );
    println!(
        "enroute excess responds to departure delays above {} min averaged over the last {} h at:",
        md.coupling_threshold, md.delay_memory_hours
    );
    for od in md.ods.iter().take(6) {
        let cols: Vec<String> = od
            .relevant
            .iter()
            .map(|c| format!("{} (gain {:.2})", c.airport, c.gain))
            .collect();
        println!(
            "  {}-{}  planned {:.0} min  <- {}",
            od.origin,
            od.destination,
            od.planned_flight_time,
            cols.join(", ")
        );
    }
    println!("  ...");

    let stats = group_stats(&world.flights);
    println!("\narrival-delay groups (first 5 of {}):", stats.len());
    for g in stats.iter().take(5) {
        println!(
            "  {}-{} {:<5} n={:<4} mean {:>6.2} min  sd {:>6.2} min",
            g.origin, g.destination, g.aircraft_type, g.count, g.fdt_mean, g.fdt_sd
        );
    }
    println!("\nwrote:");
    for f in files {
        println!("  {}", f.display());
    }
    Ok(())
}
