//! Deterministic convergence study: the exact birth-death laws of the
//! exponential/exponential family, scaled by n^(-1/2), against the
//! closed-form limit density. Prints the KS column and the boundary-mass
//! column n^(1/2) P[L=0].
//!
//! Run with: cargo run --release --example oracle_convergence

use sdq::analyzer::{convergence_study, limit_density, LawSource};
use sdq::primitives::RenewalSpec;
use sdq::profile::{ScaledSystem, SpeedProfile};

fn main() {
    let exp = RenewalSpec::exponential;
    let profile = SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile");
    let target = limit_density(&profile, &exp(), &exp()).expect("density");
    let systems: Vec<ScaledSystem> = [25u64, 100, 400, 10_000]
        .iter()
        .map(|&n| ScaledSystem::new(n, profile.clone(), exp(), exp()).expect("system"))
        .collect();
    let table = convergence_study(&systems, &target, &LawSource::Oracle).expect("study");
    println!("{:>8} {:>12} {:>16}", "n", "KS", "sqrt(n) P[L=0]");
    for row in &table.rows {
        println!("{:>8} {:>12.6} {:>16.6}", row.n, row.ks, row.boundary_mass);
    }
    println!("monotone KS: {:?}", table.monotone);
    // the boundary column tracks -integral of b dnu = 1 for this family
}
