//! Fluid-scaled drain of an overloaded-start queue: starting from
//! (⌊y⌋, y, y) the scaled trajectory follows the linear drain
//! (1 − |γ∞| t)^+ once the initial clock delays are consumed (t ≥ 1/λ), and
//! is absorbed at zero from t = 1/|γ∞| on.
//!
//! Run with: cargo run --release --example fluid_limit

use sdq::primitives::RenewalSpec;
use sdq::profile::{ScaledSystem, SpeedProfile};
use sdq::simulator::run_fluid;

fn main() {
    // lambda = 1, mu = 1.2 embedded at n = 1: gamma_inf = -0.2
    let sys = ScaledSystem::new(
        1,
        SpeedProfile::single_region(1.0, 0.0, 0.2).expect("profile"),
        RenewalSpec::exponential(),
        RenewalSpec::exponential(),
    )
    .expect("system");
    let rate = -sys.stability_report().gamma_inf;

    let mut grid = vec![0.0];
    grid.extend((0..=10).map(|i| 1.0 + 0.5 * i as f64));
    let out = run_fluid(&sys, 10_000.0, &grid, 42).expect("fluid");

    println!("y = 1e4, drain rate |gamma_inf| = {rate}");
    println!("{:>6} {:>10} {:>10} {:>10}", "t", "L_bar", "limit", "abs err");
    for (t, l_bar) in out {
        let limit = (1.0 - rate * t).max(0.0);
        println!("{t:>6} {l_bar:>10.4} {limit:>10.4} {:>10.4}", (l_bar - limit).abs());
    }
}
