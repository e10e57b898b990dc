//! Closed-form stationary limit density for a single-region and a two-region
//! profile: normalizing constant, density values, and the variance-driven
//! density jump across the level.
//!
//! Run with: cargo run --example limit_density

use sdq::analyzer::limit_density;
use sdq::primitives::RenewalSpec;
use sdq::profile::{RegionRates, Representation, SpeedProfile};

fn main() {
    let exp = RenewalSpec::exponential();

    // lambda = mu = 1 with mu* = 1: drift b = -1, sigma^2 = 2, so h = e^-u
    let single = SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile");
    let d = limit_density(&single, &exp, &exp).expect("density");
    println!("single region: C = {:.6}", d.c());
    println!("{:>6} {:>12} {:>12} {:>12}", "u", "h(u)", "exp(-u)", "H(u)");
    for u in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!(
            "{u:>6} {:>12.8} {:>12.8} {:>12.8}",
            d.h(u),
            (-u).exp(),
            d.cdf(u)
        );
    }

    // two regions split at u = 1: sigma^2 jumps from 2 to 4, beta stays -1,
    // so h drops by the factor sigma_1^2 / sigma_2^2 = 1/2 across the level
    let two = SpeedProfile::new(
        vec![1.0],
        vec![
            RegionRates::balanced(1.0, 0.0, 1.0),
            RegionRates::balanced(2.0, 0.0, 2.0),
        ],
        Representation::MultiLevel,
    )
    .expect("profile");
    let d = limit_density(&two, &exp, &exp).expect("density");
    println!("\ntwo regions: C = {:.6} (1/2 - e^-1/4 = {:.6})", d.c(), 0.5 - (-1.0f64).exp() / 4.0);
    println!("h(0)    = {:.6}", d.h(0.0));
    println!("h(1-)   = {:.6}", d.h(1.0));
    println!("h(1+)   = {:.6}", d.h(1.0 + 1e-12));
    println!("jump ratio h(1+)/h(1-) = {:.6}", d.jump_ratio(0));
}
