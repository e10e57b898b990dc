//! Density-jump structure of a two-region profile: the analyzer's exact
//! ratio, the jump recovered from the oracle law at n = 10^4, and the decay
//! of the H statistic across n (its limit vanishing is what makes the
//! interior limit law absolutely continuous).
//!
//! Run with: cargo run --release --example two_level_jump

use sdq::analyzer::{birth_death_oracle, limit_density};
use sdq::palm::estimate_h;
use sdq::primitives::RenewalSpec;
use sdq::profile::{RegionRates, Representation, ScaledSystem, SpeedProfile};
use sdq::simulator::{run_stationary, RunOptions};

fn main() {
    let exp = RenewalSpec::exponential;
    let profile = SpeedProfile::new(
        vec![1.0],
        vec![
            RegionRates::balanced(1.0, 0.0, 1.0),
            RegionRates::balanced(2.0, 0.0, 2.0),
        ],
        Representation::MultiLevel,
    )
    .expect("profile");

    let density = limit_density(&profile, &exp(), &exp()).expect("density");
    println!(
        "analyzer: sigma_1^2 = {}, sigma_2^2 = {}, jump ratio = {}",
        density.sigma2(0.5),
        density.sigma2(1.5),
        density.jump_ratio(0)
    );

    let sys = ScaledSystem::new(10_000, profile.clone(), exp(), exp()).expect("system");
    let oracle = birth_death_oracle(&sys).expect("oracle");
    let ratio = oracle.to_scaled().window_ratio(1.0, 0.02).expect("ratio");
    println!("oracle window ratio at n=10^4: {ratio:.5}");

    println!("\nH estimates (should shrink with n):");
    println!("{:>6} {:>8} {:>12} {:>12}", "n", "x", "H_hat", "stderr");
    for n in [25u64, 100, 400] {
        for x in [0.5, 1.0] {
            let sys = ScaledSystem::new(n, profile.clone(), exp(), exp()).expect("system");
            let opts = RunOptions {
                events: 1_000_000,
                burn_in_fraction: 0.1,
                seed: 99_000 + n,
                probes: vec![x],
                ..RunOptions::default()
            };
            let (_, acc) = run_stationary(&sys, &opts).expect("run");
            let h = estimate_h(&acc, &sys, x);
            println!("{n:>6} {x:>8} {:>12.6} {:>12.6}", h.value, h.stderr);
        }
    }
}
