//! Event-epoch (Palm) diagnostics on one simulation run: arrival/departure
//! intensities and their identities, the boundary identity, and the H and
//! Delta correction statistics at a few probe levels.
//!
//! Run with: cargo run --release --example palm_identities

use sdq::palm::{
    boundary_identity_report, estimate_delta, estimate_h, intensity_identity_report,
};
use sdq::primitives::RenewalSpec;
use sdq::profile::{ScaledSystem, SpeedProfile};
use sdq::simulator::{run_stationary, RunOptions};

fn main() {
    let sys = ScaledSystem::new(
        100,
        SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile"),
        RenewalSpec::exponential(),
        RenewalSpec::erlang(2).expect("erlang"),
    )
    .expect("system");

    let probes = vec![0.25, 0.5, 1.0];
    let opts = RunOptions {
        events: 2_000_000,
        burn_in_fraction: 0.1,
        seed: 11,
        probes: probes.clone(),
        ..RunOptions::default()
    };
    let (law, acc) = run_stationary(&sys, &opts).expect("run");

    let intensity = intensity_identity_report(&law, &acc, &sys);
    println!("alpha_e = {:.6}, alpha_d = {:.6}", intensity.alpha_e, intensity.alpha_d);
    println!(
        "|alpha_e - alpha_d| = {:.3e} (deterministic bound {:.3e})",
        intensity.r1, intensity.r1_bound
    );
    println!(
        "|alpha_e - E[lambda(L)]| = {:.3e}, |alpha_d - E[mu(L); L>0]| = {:.3e}",
        intensity.r2, intensity.r3
    );
    println!("level-crossing balance sup = {:.3e}", intensity.crossing_sup);

    let boundary = boundary_identity_report(law.masses(), &sys);
    println!(
        "boundary identity: mu(0) sqrt(n) P[L=0] = {:.5} vs -E[b(L_hat)] = {:.5} (rel err {:.4})",
        boundary.lhs, boundary.rhs, boundary.rel_err
    );

    println!("\n{:>6} {:>5} {:>12} {:>12} {:>8}", "x", "q", "H_hat", "Delta_hat", "epochs");
    for &x in &probes {
        let h = estimate_h(&acc, &sys, x);
        let d = estimate_delta(&acc, &law, &sys, x);
        println!(
            "{x:>6} {:>5} {:>12.6} {:>12.6} {:>8}{}",
            h.q,
            h.value,
            d.value,
            h.epochs_used,
            if h.insufficient { "  (insufficient)" } else { "" }
        );
    }
}
