//! End-to-end acceptance suite. One test per criterion; each prints a
//! PASS/FAIL line (run with `--nocapture` to see them on success).

use sdq::analyzer::{
    birth_death_oracle, convergence_study, ks_distance, limit_density, Law, LawSource,
};
use sdq::clocks::{expansion_residual, solve_clocks_with_cap};
use sdq::diffusion::{simulate_rbm, RbmOptions};
use sdq::palm::{boundary_identity_report, estimate_h, intensity_identity_report};
use sdq::primitives::{RenewalSpec, INFINITE_CAP};
use sdq::profile::{RegionRates, Representation, ScaledSystem, SpeedProfile};
use sdq::simulator::{run_fluid, run_replicated, run_stationary, RunOptions};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exp_spec() -> RenewalSpec {
    RenewalSpec::exponential()
}

/// Single-region family: lambda = mu = 1, lambda* = 0, mu* = 1.
fn single_region_system(n: u64) -> ScaledSystem {
    ScaledSystem::new(
        n,
        SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile"),
        exp_spec(),
        exp_spec(),
    )
    .expect("system")
}

/// Two-region config: level 1.0; region 1 (1, 1) with mu* = 1, region 2
/// (2, 2) with mu* = 2. With exponential primitives sigma_1^2 = 2,
/// sigma_2^2 = 4.
fn two_region_profile() -> SpeedProfile {
    SpeedProfile::new(
        vec![1.0],
        vec![
            RegionRates::balanced(1.0, 0.0, 1.0),
            RegionRates::balanced(2.0, 0.0, 2.0),
        ],
        Representation::MultiLevel,
    )
    .expect("profile")
}

struct Criterion {
    name: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            checks: Vec::new(),
        }
    }

    fn require(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn finish(self) {
        let pass = self.checks.iter().all(|&(_, ok)| ok);
        println!(
            "ACCEPTANCE {}: {}",
            self.name,
            if pass { "PASS" } else { "FAIL" }
        );
        for (label, ok) in &self.checks {
            println!("  [{}] {label}", if *ok { "ok" } else { "FAIL" });
        }
        assert!(pass, "criterion failed: {}", self.name);
    }
}

#[test]
fn criterion_1_exponential_special_case() {
    let mut c = Criterion::new("1 exponential special case (oracle KS convergence)");
    let profile = SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile");
    let target = limit_density(&profile, &exp_spec(), &exp_spec()).expect("density");
    // the limit is h(u) = e^{-u}
    c.require(
        format!("limit density is Exp(1): C = {}", target.c()),
        (target.c() - 0.5).abs() <= 1e-12 && (target.h(1.0) - (-1.0f64).exp()).abs() <= 1e-12,
    );
    let systems: Vec<ScaledSystem> = [25u64, 100, 400, 10_000]
        .iter()
        .map(|&n| single_region_system(n))
        .collect();
    let table = convergence_study(&systems, &target, &LawSource::Oracle).expect("study");
    let ks: Vec<f64> = table.rows.iter().map(|r| r.ks).collect();
    c.require(
        format!("KS at n=400 is {:.5} <= 0.03", ks[2]),
        ks[2] <= 0.03,
    );
    c.require(
        format!("KS at n=10000 is {:.5} <= 0.01", ks[3]),
        ks[3] <= 0.01,
    );
    c.require(
        format!("strictly decreasing KS column {ks:?}"),
        table.monotone == Some(true),
    );
    c.finish();
}

#[test]
fn criterion_2_simulator_oracle_equivalence() {
    let mut c = Criterion::new("2 simulator-oracle equivalence (n=100, 5e6 events, 8 reps)");
    let sys = single_region_system(100);
    let opts = RunOptions {
        events: 5_000_000,
        burn_in_fraction: 0.1,
        seed: 20_240_601,
        probes: vec![0.25, 0.5],
        ..RunOptions::default()
    };
    let (law, acc) = run_replicated(&sys, &opts, 8).expect("run");
    let oracle = birth_death_oracle(&sys).expect("oracle");
    let ks = ks_distance(
        &Law::Atoms(&law.to_scaled()),
        &Law::Atoms(&oracle.to_scaled()),
    );
    c.require(format!("KS(simulated, birth-death) = {ks:.5} <= 0.01"), ks <= 0.01);
    // criterion 3's bound must hold on this run as well
    let report = intensity_identity_report(&law, &acc, &sys);
    c.require(
        format!("|alpha_e - alpha_d| = {:.3e} <= bound {:.3e}", report.r1, report.r1_bound),
        report.r1 <= report.r1_bound + 1e-15,
    );
    c.finish();
}

#[test]
fn criterion_3_palm_intensity_identities() {
    let mut c = Criterion::new("3 Palm intensity identities (5e6 events)");
    let sys = single_region_system(100);
    let opts = RunOptions {
        events: 5_000_000,
        burn_in_fraction: 0.1,
        seed: 7_654_321,
        probes: vec![0.25, 0.5],
        ..RunOptions::default()
    };
    let (law, acc) = run_stationary(&sys, &opts).expect("run");
    let report = intensity_identity_report(&law, &acc, &sys);
    c.require(
        format!(
            "|alpha_e - alpha_d| = {:.3e} <= (L(0)+L(T))/T = {:.3e} exactly",
            report.r1, report.r1_bound
        ),
        report.r1 <= report.r1_bound + 1e-15,
    );
    c.require(
        format!(
            "|alpha_e - sum lambda P| / alpha_e = {:.5} <= 0.01",
            report.r2 / report.alpha_e
        ),
        report.r2 / report.alpha_e <= 0.01,
    );
    c.require(
        format!(
            "|alpha_d - sum mu P| / alpha_d = {:.5} <= 0.01",
            report.r3 / report.alpha_d
        ),
        report.r3 / report.alpha_d <= 0.01,
    );
    c.finish();
}

#[test]
fn criterion_4_boundary_identity() {
    let mut c = Criterion::new("4 boundary identity (oracle, single-region family)");
    let mut last = f64::INFINITY;
    let mut monotone = true;
    let mut final_err = f64::NAN;
    for n in [25u64, 100, 400, 10_000] {
        let sys = single_region_system(n);
        let oracle = birth_death_oracle(&sys).expect("oracle");
        let report = boundary_identity_report(oracle.masses(), &sys);
        monotone &= report.rel_err < last;
        last = report.rel_err;
        final_err = report.rel_err;
        c.require(
            format!(
                "n={n}: lhs={:.6} rhs={:.6} rel_err={:.5}",
                report.lhs, report.rhs, report.rel_err
            ),
            report.rel_err.is_finite(),
        );
    }
    c.require(
        format!("rel_err at n=10000 is {final_err:.5} <= 0.05"),
        final_err <= 0.05,
    );
    c.require("monotone improvement over n_list".to_string(), monotone);
    c.finish();
}

#[test]
fn criterion_5_clock_expansions() {
    let mut c = Criterion::new("5 clock expansions");
    // closed forms at infinite cap: eta = e^theta_n - 1, zeta = e^-theta_n - 1
    let exp = exp_spec();
    let mut worst = 0.0f64;
    for n in [100u64, 1_000, 10_000] {
        let theta_n = 1.0 / (n as f64).sqrt();
        let sol = solve_clocks_with_cap(&exp, &exp, theta_n, n, INFINITE_CAP).expect("solve");
        worst = worst
            .max((sol.eta - (theta_n.exp() - 1.0)).abs())
            .max((sol.zeta - ((-theta_n).exp() - 1.0)).abs());
    }
    c.require(
        format!("solver matches closed forms to {worst:.2e} <= 1e-10"),
        worst <= 1e-10,
    );
    // expansion residuals decay like n^(-3/2) at theta = 1, cap = n^(1/2)
    let ns = [100u64, 1_000, 10_000];
    let mut residuals = Vec::new();
    for &n in &ns {
        residuals.push(expansion_residual(&exp, &exp, 1.0, n).expect("residual"));
    }
    for (label, pick) in [("eta", 0usize), ("zeta", 1usize)] {
        let r = |i: usize| {
            if pick == 0 {
                residuals[i].0
            } else {
                residuals[i].1
            }
        };
        let slope = (r(2) / r(0)).ln() / ((ns[2] as f64 / ns[0] as f64).ln());
        c.require(
            format!("{label} residual log-log slope {slope:.3} within -1.5 +/- 0.2"),
            (slope + 1.5).abs() <= 0.2,
        );
    }
    c.finish();
}

#[test]
fn criterion_6_multi_level_density_jump() {
    let mut c = Criterion::new("6 multi-level density jump");
    let profile = two_region_profile();
    let density = limit_density(&profile, &exp_spec(), &exp_spec()).expect("density");
    let analytic_ratio = density.h(1.0 + 1e-12) / density.h(1.0);
    c.require(
        format!("analyzer jump ratio h(1+)/h(1-) = {analytic_ratio:.10} = 0.5 exactly"),
        (analytic_ratio - 0.5).abs() <= 1e-9 && density.jump_ratio(0) == 0.5,
    );
    // oracle-scaled law at n = 10^4 reproduces the ratio within 5%
    let sys = ScaledSystem::new(10_000, profile.clone(), exp_spec(), exp_spec()).expect("system");
    let oracle = birth_death_oracle(&sys).expect("oracle");
    let ratio = oracle
        .to_scaled()
        .window_ratio(1.0, 0.02)
        .expect("window ratio");
    c.require(
        format!("oracle window ratio {ratio:.5} within 5% of 0.5"),
        (ratio / 0.5 - 1.0).abs() <= 0.05,
    );
    // |H^(n)_x| decreases across n in {25, 100, 400} at x in {0.5, 1.0}
    for x in [0.5f64, 1.0] {
        let mut values = Vec::new();
        for n in [25u64, 100, 400] {
            let sys =
                ScaledSystem::new(n, profile.clone(), exp_spec(), exp_spec()).expect("system");
            let opts = RunOptions {
                events: 5_000_000,
                burn_in_fraction: 0.1,
                seed: 99_000 + n,
                probes: vec![x],
                ..RunOptions::default()
            };
            let (_, acc) = run_stationary(&sys, &opts).expect("run");
            let h = estimate_h(&acc, &sys, x);
            assert!(!h.insufficient, "insufficient epochs at x={x}, n={n}");
            values.push(h.value.abs());
        }
        c.require(
            format!("|H_x| at x={x}: {values:?} decreasing"),
            values.windows(2).all(|w| w[1] < w[0]),
        );
    }
    c.finish();
}

#[test]
fn criterion_7_fluid_stability() {
    let mut c = Criterion::new("7 fluid stability (lambda=1, mu=1.2, y=1e4)");
    // fixed-rate system embedded at n = 1: gamma_inf = -0.2
    let sys = ScaledSystem::new(
        1,
        SpeedProfile::single_region(1.0, 0.0, 0.2).expect("profile"),
        exp_spec(),
        exp_spec(),
    )
    .expect("system");
    // grid on {0} + [1, 6]: under the prescribed initial state (floor(y), y, y)
    // both initial delays equal y, so the trajectory joins the linear drain
    // once the first clocks fire (t >= 1/lambda = 1); at t = 0 it is exact
    let mut grid = vec![0.0];
    grid.extend((0..=20).map(|i| 1.0 + 0.25 * i as f64));
    let out = run_fluid(&sys, 10_000.0, &grid, 42).expect("fluid");
    let mut sup = 0.0f64;
    for &(t, l_bar) in &out {
        sup = sup.max((l_bar - (1.0 - 0.2 * t).max(0.0)).abs());
    }
    c.require(
        format!("sup over grid of |L_bar(t) - (1 - 0.2 t)^+| = {sup:.4} <= 0.05"),
        sup <= 0.05,
    );
    c.require(
        "trajectory starts at exactly 1".to_string(),
        out[0] == (0.0, 1.0),
    );
    c.finish();
}

#[test]
fn criterion_8_reflected_diffusion() {
    let mut c = Criterion::new("8 reflected diffusion (delta=1e-3, 1e7 steps)");
    let profile = SpeedProfile::single_region(1.0, 0.0, 1.0).expect("profile");
    let density = limit_density(&profile, &exp_spec(), &exp_spec()).expect("density");
    let opts = RbmOptions {
        delta: 1e-3,
        steps: 10_000_000,
        burn_in: 1_000_000,
        seed: 31_337,
        ..RbmOptions::default()
    };
    let run = simulate_rbm(&density, &opts).expect("run");
    let target = |u: f64| 1.0 - (-u).exp();
    let ks = ks_distance(
        &Law::Atoms(&run.law),
        &Law::Cdf {
            cdf: &target,
            upper: 25.0,
        },
    );
    c.require(format!("KS vs Exp(1) = {ks:.5} <= 0.02"), ks <= 0.02);
    c.finish();
}

#[test]
fn criterion_9_normalization_property_suite() {
    let mut c = Criterion::new("9 normalization suite (20 random multi-level profiles)");
    let mut rng = ChaCha8Rng::seed_from_u64(90_210);
    let mut worst_norm = 0.0f64;
    let mut worst_g = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(1..=4usize);
        let mut levels = Vec::with_capacity(k);
        let mut prev = 0.0;
        for _ in 0..k {
            prev += rng.random_range(0.2..1.2);
            levels.push(prev);
        }
        let regions: Vec<RegionRates> = (0..=k)
            .map(|i| {
                let rate = rng.random_range(0.5..2.0);
                let lambda_star = rng.random_range(-1.0..1.0);
                let mu_star = if i == k {
                    // tail drift forced negative
                    lambda_star + rng.random_range(0.1..2.0)
                } else {
                    rng.random_range(-1.0..1.0)
                };
                RegionRates::balanced(rate, lambda_star, mu_star)
            })
            .collect();
        let profile =
            SpeedProfile::new(levels.clone(), regions, Representation::MultiLevel).expect("profile");
        let arrival = exp_spec();
        let service = RenewalSpec::erlang(2).expect("erlang");
        let density = limit_density(&profile, &arrival, &service).expect("b_inf < 0");

        // independent normalization check: composite Simpson per region plus
        // the exact exponential tail integral
        let upper = density.upper_hint();
        let mut cuts = vec![0.0];
        cuts.extend(levels.iter().copied());
        cuts.push(upper);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let panels = 4_000usize;
            let h = (b - a) / panels as f64;
            for i in 0..panels {
                let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
                let mid = 0.5 * (lo + hi);
                // evaluate inside the open panel to stay within one region
                total += (h / 6.0)
                    * (density.h(lo + 1e-12) + 4.0 * density.h(mid) + density.h(hi - 1e-12));
            }
        }
        total += density.h(upper) / density.beta(upper).abs();
        worst_norm = worst_norm.max((total - 1.0).abs());

        // g-continuity across every level
        for &l in &levels {
            let eps = 1e-11;
            let left = density.h(l) * density.sigma2(l);
            let right = density.h(l + eps) * density.sigma2(l + eps);
            worst_g = worst_g.max((left - right).abs() / left.max(1e-300));
        }
    }
    c.require(
        format!("max |integral(h) - 1| = {worst_norm:.2e} <= 1e-8"),
        worst_norm <= 1e-8,
    );
    c.require(
        format!("max relative g-discontinuity across levels = {worst_g:.2e} <= 1e-8"),
        worst_g <= 1e-8,
    );
    c.finish();
}
