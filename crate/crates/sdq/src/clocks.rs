//! Clock equations for the exponential test factor.
//!
//! For a scale index `n` and argument `theta`, the pair `(eta, zeta)` solves
//!
//! ```text
//! e^theta  E[exp(-eta  (T_A ∧ n^(1/2)))] = 1
//! e^-theta E[exp(-zeta (T_S ∧ n^(1/2)))] = 1
//! ```
//!
//! Both maps are strictly decreasing in the unknown, so each root is found by
//! geometric bracket expansion followed by bisection-safeguarded Newton on
//! the multiplicative residual. An infinite cap is accepted for analytic
//! baselines.

use serde::Serialize;
use thiserror::Error;

use crate::primitives::RenewalSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClocksError {
    #[error("|theta| = {theta} exceeds the safe radius 0.5 n^(1/2) = {radius} for n = {n}")]
    ThetaOutOfRange { theta: f64, radius: f64, n: u64 },
    #[error("failed to bracket the clock-equation root (target {target})")]
    BracketFailure { target: f64 },
    #[error("n must be >= 1")]
    BadScale,
}

/// Residual tolerance on `e^(±theta) E[...] − 1` demanded from the solver.
const RESIDUAL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockSolution {
    pub theta: f64,
    pub n: u64,
    pub eta: f64,
    pub zeta: f64,
    /// `e^theta E[exp(-eta Ť_A)] − 1` at the returned root.
    pub residual_eta: f64,
    /// `e^-theta E[exp(-zeta Ť_S)] − 1` at the returned root.
    pub residual_zeta: f64,
}

/// Solves both clock equations with the standard truncation `cap = n^(1/2)`.
pub fn solve_clocks(
    arrival: &RenewalSpec,
    service: &RenewalSpec,
    theta: f64,
    n: u64,
) -> Result<ClockSolution, ClocksError> {
    if n < 1 {
        return Err(ClocksError::BadScale);
    }
    let sqrt_n = (n as f64).sqrt();
    let radius = 0.5 * sqrt_n;
    if theta.abs() > radius {
        return Err(ClocksError::ThetaOutOfRange {
            theta,
            radius,
            n,
        });
    }
    solve_clocks_with_cap(arrival, service, theta, n, sqrt_n)
}

/// Solves the clock equations with an explicit truncation point. `cap` may be
/// `f64::INFINITY` for the analytic (untruncated) baseline.
pub fn solve_clocks_with_cap(
    arrival: &RenewalSpec,
    service: &RenewalSpec,
    theta: f64,
    n: u64,
    cap: f64,
) -> Result<ClockSolution, ClocksError> {
    if n < 1 {
        return Err(ClocksError::BadScale);
    }
    let (eta, residual_eta) = solve_one(arrival, theta, cap)?;
    let (zeta, residual_zeta) = solve_one(service, -theta, cap)?;
    Ok(ClockSolution {
        theta,
        n,
        eta,
        zeta,
        residual_eta,
        residual_zeta,
    })
}

/// Root of `e^w E[exp(-s (T ∧ cap))] = 1` in `s`.
fn solve_one(spec: &RenewalSpec, w: f64, cap: f64) -> Result<(f64, f64), ClocksError> {
    if w == 0.0 {
        return Ok((0.0, 0.0));
    }
    let scale = w.exp();
    let g = |s: f64| scale * spec.truncated_laplace(s, cap) - 1.0;
    // g is strictly decreasing with g(0) = e^w − 1.
    let (mut lo, mut hi) = if w > 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
    let mut expansions = 0;
    loop {
        let (glo, ghi) = (g(lo), g(hi));
        if glo >= 0.0 && ghi <= 0.0 {
            break;
        }
        if w > 0.0 {
            hi *= 2.0;
        } else {
            lo *= 2.0;
        }
        expansions += 1;
        if expansions > 80 {
            return Err(ClocksError::BracketFailure { target: (-w).exp() });
        }
    }

    let mut x = 0.5 * (lo + hi);
    let mut gx = g(x);
    for _ in 0..200 {
        if gx.abs() <= RESIDUAL_TOL {
            break;
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = scale * spec.truncated_laplace_deriv(x, cap);
        let newton = x - gx / slope;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        gx = g(x);
        if hi - lo <= f64::EPSILON * (hi.abs().max(lo.abs()).max(1.0)) {
            break;
        }
    }
    Ok((x, gx))
}

/// Deviations of the solved clocks from their second-order expansions at the
/// scaled argument `n^(-1/2) theta`:
///
/// ```text
/// | eta^(n)(n^(-1/2) theta) − n^(-1/2) theta − sigma_A² theta²/(2n) |
/// | zeta^(n)(n^(-1/2) theta) + n^(-1/2) theta − sigma_S² theta²/(2n) |
/// ```
pub fn expansion_residual(
    arrival: &RenewalSpec,
    service: &RenewalSpec,
    theta: f64,
    n: u64,
) -> Result<(f64, f64), ClocksError> {
    let sqrt_n = (n as f64).sqrt();
    let scaled = theta / sqrt_n;
    let sol = solve_clocks(arrival, service, scaled, n)?;
    let nf = n as f64;
    let r_a = (sol.eta - scaled - arrival.scv * theta * theta / (2.0 * nf)).abs();
    let r_s = (sol.zeta + scaled - service.scv * theta * theta / (2.0 * nf)).abs();
    Ok((r_a, r_s))
}

/// Exponential test factor `g^(n)_theta(v) = exp(-eta (v_1 ∧ cap) - zeta (v_2 ∧ cap))`
/// evaluated at residual values `(v1, v2)`.
pub fn test_factor(sol: &ClockSolution, v1: f64, v2: f64) -> f64 {
    let cap = (sol.n as f64).sqrt();
    (-sol.eta * v1.min(cap) - sol.zeta * v2.min(cap)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{RenewalKind, INFINITE_CAP};
    use approx::assert_relative_eq;

    #[test]
    fn zero_theta_is_exact() {
        let exp = RenewalSpec::exponential();
        let sol = solve_clocks(&exp, &exp, 0.0, 100).unwrap();
        assert_eq!(sol.eta, 0.0);
        assert_eq!(sol.zeta, 0.0);
        assert_eq!(sol.residual_eta, 0.0);
        assert_eq!(sol.residual_zeta, 0.0);
    }

    #[test]
    fn exponential_closed_form_at_infinite_cap() {
        // 1/(1+eta) = e^-theta  =>  eta = e^theta − 1
        // 1/(1+zeta) = e^theta  =>  zeta = e^-theta − 1
        let exp = RenewalSpec::exponential();
        let sol = solve_clocks_with_cap(&exp, &exp, 0.1, 100, INFINITE_CAP).unwrap();
        assert_relative_eq!(sol.eta, 0.1f64.exp() - 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.zeta, (-0.1f64).exp() - 1.0, epsilon = 1e-12);
        assert!(sol.residual_eta.abs() <= 1e-12);
        assert!(sol.residual_zeta.abs() <= 1e-12);
    }

    #[test]
    fn deterministic_expansion_is_exact() {
        // T ∧ cap = 1, so eta(0.1) = 0.1 with zero residual against the
        // expansion (sigma² = 0).
        let det = RenewalSpec::deterministic();
        let exp = RenewalSpec::exponential();
        let (r_a, _) = expansion_residual(&det, &exp, 1.0, 100).unwrap();
        assert!(r_a <= 1e-12, "residual {r_a}");
        let sol = solve_clocks(&det, &exp, 0.1, 100).unwrap();
        assert_relative_eq!(sol.eta, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn expansion_residual_decays_like_n_to_neg_3_2() {
        let exp = RenewalSpec::exponential();
        let ns = [100u64, 1_000, 10_000];
        let mut residuals = Vec::new();
        for &n in &ns {
            let (r_a, r_s) = expansion_residual(&exp, &exp, 1.0, n).unwrap();
            assert!(r_a > 0.0 && r_s > 0.0);
            residuals.push((r_a, r_s));
        }
        let slope = |r0: f64, r1: f64, n0: f64, n1: f64| (r1 / r0).ln() / (n1 / n0).ln();
        for pick in [0usize, 1] {
            let r = |i: usize| {
                if pick == 0 {
                    residuals[i].0
                } else {
                    residuals[i].1
                }
            };
            let s = slope(r(0), r(2), ns[0] as f64, ns[2] as f64);
            assert!(
                (s + 1.5).abs() <= 0.2,
                "log-log slope {s} outside -1.5 ± 0.2"
            );
        }
    }

    #[test]
    fn rejects_theta_outside_safe_radius() {
        let exp = RenewalSpec::exponential();
        assert!(matches!(
            solve_clocks(&exp, &exp, 6.0, 100),
            Err(ClocksError::ThetaOutOfRange { .. })
        ));
    }

    #[test]
    fn solves_all_catalog_kinds() {
        let kinds = [
            RenewalSpec::exponential(),
            RenewalSpec::deterministic(),
            RenewalSpec::erlang(3).unwrap(),
            RenewalSpec::new(RenewalKind::HyperExponential {
                p: 0.4,
                r1: 0.5,
                r2: 3.0,
            })
            .unwrap(),
            RenewalSpec::new(RenewalKind::Uniform { half_width: 0.9 }).unwrap(),
        ];
        for a in &kinds {
            for s in &kinds {
                for theta in [-2.0, -0.3, 0.7, 3.0] {
                    let sol = solve_clocks(a, s, theta, 400).unwrap();
                    assert!(sol.residual_eta.abs() <= 1e-12, "{:?} {theta}", a.kind);
                    assert!(sol.residual_zeta.abs() <= 1e-12, "{:?} {theta}", s.kind);
                }
            }
        }
    }

    #[test]
    fn test_factor_tends_to_one() {
        let exp = RenewalSpec::exponential();
        let mut last = f64::INFINITY;
        for n in [25u64, 100, 400, 1600, 6400] {
            let sol = solve_clocks(&exp, &exp, 1.0 / (n as f64).sqrt(), n).unwrap();
            let gap = (test_factor(&sol, 0.7, 1.3) - 1.0).abs();
            assert!(gap < last, "not improving at n = {n}");
            last = gap;
        }
        // gap decays like 0.6 / sqrt(n)
        assert!(last < 0.01);
    }

    proptest::proptest! {
        /// eta strictly increasing and zeta strictly decreasing in theta.
        #[test]
        fn monotone_in_theta(theta in -3.0f64..3.0, delta in 0.01f64..1.0) {
            let exp = RenewalSpec::exponential();
            let a = solve_clocks(&exp, &exp, theta, 400).unwrap();
            let b = solve_clocks(&exp, &exp, theta + delta, 400).unwrap();
            proptest::prop_assert!(b.eta > a.eta);
            proptest::prop_assert!(b.zeta < a.zeta);
        }
    }

    /// Bound |eta (u1 ∧ √n) + zeta (u2 ∧ √n)| ≤ |theta| (d_A (u1/√n ∧ 1) + d_S (u2/√n ∧ 1))
    /// with constants fitted on one grid and checked on another.
    #[test]
    fn safe_radius_bound_with_fitted_constants() {
        let exp = RenewalSpec::exponential();
        let ns = [100u64, 400, 2_500];
        let thetas = [-2.0, -1.0, -0.25, 0.25, 1.0, 2.0];
        let mut d_a: f64 = 0.0;
        let mut d_s: f64 = 0.0;
        for &n in &ns {
            let sqrt_n = (n as f64).sqrt();
            for &theta in &thetas {
                let sol = solve_clocks(&exp, &exp, theta / sqrt_n, n).unwrap();
                d_a = d_a.max(sol.eta.abs() * sqrt_n / theta.abs());
                d_s = d_s.max(sol.zeta.abs() * sqrt_n / theta.abs());
            }
        }
        // check grid: residual arguments u1, u2 across and beyond the cap
        for &n in &ns {
            let sqrt_n = (n as f64).sqrt();
            for &theta in &[-1.5, 0.6, 1.7] {
                let sol = solve_clocks(&exp, &exp, theta / sqrt_n, n).unwrap();
                for &u1 in &[0.0, 0.5, 3.0, sqrt_n, 10.0 * sqrt_n] {
                    for &u2 in &[0.1, 2.0, sqrt_n, 4.0 * sqrt_n] {
                        let lhs = (sol.eta * u1.min(sqrt_n) + sol.zeta * u2.min(sqrt_n)).abs();
                        let rhs = theta.abs()
                            * (d_a * (u1 / sqrt_n).min(1.0) + d_s * (u2 / sqrt_n).min(1.0));
                        assert!(
                            lhs <= rhs * (1.0 + 1e-9),
                            "bound violated at n={n} theta={theta} u=({u1},{u2})"
                        );
                    }
                }
            }
        }
    }
}
