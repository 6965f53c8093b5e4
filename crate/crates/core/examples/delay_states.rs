//! Builds the hourly network delay states (OD enroute excess, airport
//! arrival and departure delay) and prints the window one flight sees.
//!
//! ```text
//! cargo run --release --example delay_states
//! ```

use swrnn::features::sample::window_anchor;
use swrnn::features::{DelayStateIndex, FlightLog};
use swrnn::synth::{generate, ScenarioSpec};

fn main() -> swrnn::Result<()> {
    let spec = ScenarioSpec {
        days: 5,
        ..ScenarioSpec::default()
    };
    let world = generate(&spec)?;
    let index = &world.network;
    let log = FlightLog::new(&world.flights).expect("flights");
    let delays = DelayStateIndex::build(&log, index);

    let flight = &world.flights[world.flights.len() / 2];
    let as_of = window_anchor(flight.sched_dep);
    let n_t = 6;
    let w = delays.window(as_of, n_t)?;
    println!(
        "flight {} {}-{} scheduled {}; window of {n_t} h ending {}",
        flight.flight_id, flight.origin, flight.destination, flight.sched_dep, as_of
    );
    println!("row 0 is the most recent hour; cells are mean delays in minutes (flights counted)\n");

    let airports = index.airports();
    print!("{:<5}", "hour");
    for a in airports {
        print!(" {a:>11}");
    }
    println!("   <- departure delay");
    for r in 0..n_t {
        print!("{:<5}", format!("-{}", r + 1));
        for k in 0..w.n_ap() {
            print!(" {:>6.1} ({:>2})", w.dep.get(r, k), w.dep_count[r * w.n_ap() + k]);
        }
        println!();
    }

    let l = index.require_od(&flight.origin, &flight.destination)?;
    println!("\nenroute excess on the flight's own OD pair (column {l}):");
    for r in 0..n_t {
        println!(
            "  -{} h: {:>6.2} min over {} arrivals",
            r + 1,
            w.od.get(r, l),
            w.od_count[r * w.n_od() + l]
        );
    }
    Ok(())
}
