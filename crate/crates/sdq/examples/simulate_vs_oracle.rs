//! Event-driven simulation of the state-dependent queue against the exact
//! birth-death law for the Markovian case. Reduced scale for a quick run;
//! the acceptance suite runs the 5e6-event, 8-replication version.
//!
//! Run with: cargo run --release --example simulate_vs_oracle

use sdq::analyzer::{birth_death_oracle, ks_distance, Law};
use sdq::primitives::RenewalSpec;
use sdq::profile::{ScaledSystem, SpeedProfile};
use sdq::simulator::{run_replicated, RunOptions};

fn main() {
    let sys = ScaledSystem::new(
        100,
        SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile"),
        RenewalSpec::exponential(),
        RenewalSpec::exponential(),
    )
    .expect("system");

    let opts = RunOptions {
        events: 500_000,
        burn_in_fraction: 0.1,
        seed: 7,
        ..RunOptions::default()
    };
    let (law, _) = run_replicated(&sys, &opts, 4).expect("run");
    let oracle = birth_death_oracle(&sys).expect("oracle");

    println!(
        "simulated {} events over {} replications ({:.0} time units)",
        law.arrivals + law.departures,
        law.replications,
        law.total_time
    );
    println!("{:>5} {:>12} {:>12}", "ell", "simulated", "oracle");
    for ell in 0..12u64 {
        println!(
            "{ell:>5} {:>12.6} {:>12.6}",
            law.prob(ell),
            oracle.mass(ell)
        );
    }
    let ks = ks_distance(
        &Law::Atoms(&law.to_scaled()),
        &Law::Atoms(&oracle.to_scaled()),
    );
    println!("KS(simulated, oracle) = {ks:.5}");
}
