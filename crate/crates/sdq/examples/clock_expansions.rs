//! Clock-equation solutions and their second-order expansions. Shows the
//! exact closed-form match for exponential primitives at infinite cap and
//! the n^(-3/2) decay of the expansion residuals under the standard
//! n^(1/2) truncation.
//!
//! Run with: cargo run --example clock_expansions

use sdq::clocks::{expansion_residual, solve_clocks, solve_clocks_with_cap};
use sdq::primitives::{RenewalSpec, INFINITE_CAP};

fn main() {
    let exp = RenewalSpec::exponential();

    let sol = solve_clocks_with_cap(&exp, &exp, 0.1, 100, INFINITE_CAP).expect("solve");
    println!(
        "theta = 0.1, infinite cap: eta = {:.9} (e^0.1 - 1 = {:.9})",
        sol.eta,
        0.1f64.exp() - 1.0
    );
    println!(
        "                           zeta = {:.9} (e^-0.1 - 1 = {:.9})",
        sol.zeta,
        (-0.1f64).exp() - 1.0
    );

    println!("\nsolutions at cap = n^(1/2):");
    println!("{:>8} {:>8} {:>14} {:>14} {:>10} {:>10}", "theta", "n", "eta", "zeta", "res_eta", "res_zeta");
    for &n in &[100u64, 10_000] {
        for &theta in &[-1.0, 0.0, 1.0] {
            let sol = solve_clocks(&exp, &exp, theta, n).expect("solve");
            println!(
                "{theta:>8} {n:>8} {:>14.9} {:>14.9} {:>10.1e} {:>10.1e}",
                sol.eta, sol.zeta, sol.residual_eta, sol.residual_zeta
            );
        }
    }

    println!("\nexpansion residuals at theta = 1 (decay ~ n^(-3/2)):");
    println!("{:>8} {:>14} {:>14}", "n", "res_eta", "res_zeta");
    let mut prev: Option<(f64, f64)> = None;
    for &n in &[100u64, 1_000, 10_000] {
        let (r_a, r_s) = expansion_residual(&exp, &exp, 1.0, n).expect("residual");
        print!("{n:>8} {r_a:>14.3e} {r_s:>14.3e}");
        if let Some((p_a, _)) = prev {
            print!("   slope {:.3}", (r_a / p_a).ln() / 10f64.ln());
        }
        println!();
        prev = Some((r_a, r_s));
    }
}
