//! Reflected Euler scheme driven by constant limit fields `b = -1`,
//! `sigma^2 = 2`, whose stationary law is Exp(1). Prints the KS distance of
//! the simulated histogram against the target for a few step sizes.
//!
//! Run with: cargo run --release --example reflected_diffusion

use sdq::analyzer::{ks_distance, limit_density, Law};
use sdq::diffusion::{simulate_rbm, RbmOptions};
use sdq::primitives::RenewalSpec;
use sdq::profile::SpeedProfile;

fn main() {
    let profile = SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile");
    let density = limit_density(
        &profile,
        &RenewalSpec::exponential(),
        &RenewalSpec::exponential(),
    )
    .expect("integrable");
    let target = |u: f64| 1.0 - (-u).exp();

    println!("{:>10} {:>10} {:>10} {:>12}", "delta", "steps", "ks", "refl_rate");
    for (delta, steps) in [(4e-3, 2_500_000u64), (1e-3, 10_000_000), (2.5e-4, 10_000_000)] {
        let opts = RbmOptions {
            delta,
            steps,
            burn_in: steps / 10,
            seed: 2024,
            ..RbmOptions::default()
        };
        let run = simulate_rbm(&density, &opts).expect("run");
        let ks = ks_distance(
            &Law::Atoms(&run.law),
            &Law::Cdf {
                cdf: &target,
                upper: 25.0,
            },
        );
        println!(
            "{delta:>10} {steps:>10} {ks:>10.5} {:>12.3e}",
            run.interior_reflection_rate
        );
    }
}
