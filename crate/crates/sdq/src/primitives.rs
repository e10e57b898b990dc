//! Catalog of unit-mean inter-event distributions.
//!
//! Every distribution in the catalog is normalized at construction so that
//! its mean is exactly 1, and carries closed-form second and third moments
//! together with a closed-form truncated Laplace transform
//! `E[exp(-s (T ∧ cap))]`. The catalog is deliberately closed (five kinds) so
//! that the clock-equation solver never has to fall back on Monte Carlo
//! transforms.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardUniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel accepted by [`RenewalSpec::truncated_laplace`] for the
/// untruncated transform.
pub const INFINITE_CAP: f64 = f64::INFINITY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrimitivesError {
    #[error("erlang shape k must be >= 1")]
    ErlangShape,
    #[error("hyper-exponential branch probability must lie in (0, 1), got {0}")]
    BranchProbability(f64),
    #[error("hyper-exponential rates must be positive, got ({0}, {1})")]
    NonPositiveRate(f64, f64),
    #[error("uniform half-width must lie in [0, 1), got {0}")]
    HalfWidth(f64),
    #[error("distribution parameter is not finite")]
    NonFinite,
}

/// Inter-event distribution family. Parameters are stored in normalized form
/// (unit mean); `HyperExponential` rates are rescaled at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenewalKind {
    Exponential,
    Deterministic,
    Erlang { k: u32 },
    HyperExponential { p: f64, r1: f64, r2: f64 },
    Uniform { half_width: f64 },
}

/// A unit-mean inter-event distribution with exact moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalSpec {
    pub kind: RenewalKind,
    /// Variance of `T` (equals the squared coefficient of variation since
    /// the mean is 1).
    pub scv: f64,
    /// `E[T^3]`.
    pub third_moment: f64,
}

impl RenewalSpec {
    /// Builds a spec from raw parameters, normalizing so the mean is 1.
    pub fn new(kind: RenewalKind) -> Result<Self, PrimitivesError> {
        let (kind, scv, third_moment) = match kind {
            RenewalKind::Exponential => (kind, 1.0, 6.0),
            RenewalKind::Deterministic => (kind, 0.0, 1.0),
            RenewalKind::Erlang { k } => {
                if k < 1 {
                    return Err(PrimitivesError::ErlangShape);
                }
                let kf = f64::from(k);
                // E[T^m] = k (k+1) ... (k+m-1) / k^m for rate-k Erlang.
                (kind, 1.0 / kf, (kf + 1.0) * (kf + 2.0) / (kf * kf))
            }
            RenewalKind::HyperExponential { p, r1, r2 } => {
                if !(p.is_finite() && r1.is_finite() && r2.is_finite()) {
                    return Err(PrimitivesError::NonFinite);
                }
                if !(0.0 < p && p < 1.0) {
                    return Err(PrimitivesError::BranchProbability(p));
                }
                if r1 <= 0.0 || r2 <= 0.0 {
                    return Err(PrimitivesError::NonPositiveRate(r1, r2));
                }
                // Rescale both rates by the raw mean so the mixture mean is 1.
                let mean = p / r1 + (1.0 - p) / r2;
                let (a, b) = (r1 * mean, r2 * mean);
                let m2 = 2.0 * (p / (a * a) + (1.0 - p) / (b * b));
                let m3 = 6.0 * (p / (a * a * a) + (1.0 - p) / (b * b * b));
                (
                    RenewalKind::HyperExponential { p, r1: a, r2: b },
                    m2 - 1.0,
                    m3,
                )
            }
            RenewalKind::Uniform { half_width } => {
                if !half_width.is_finite() {
                    return Err(PrimitivesError::NonFinite);
                }
                if !(0.0..1.0).contains(&half_width) {
                    return Err(PrimitivesError::HalfWidth(half_width));
                }
                let w2 = half_width * half_width;
                (kind, w2 / 3.0, 1.0 + w2)
            }
        };
        let spec = RenewalSpec {
            kind,
            scv,
            third_moment,
        };
        debug_assert!((spec.mean() - 1.0).abs() <= 1e-12);
        Ok(spec)
    }

    /// Convenience constructors for the common kinds.
    pub fn exponential() -> Self {
        Self::new(RenewalKind::Exponential).expect("valid")
    }

    pub fn deterministic() -> Self {
        Self::new(RenewalKind::Deterministic).expect("valid")
    }

    pub fn erlang(k: u32) -> Result<Self, PrimitivesError> {
        Self::new(RenewalKind::Erlang { k })
    }

    /// Exact mean of the stored (normalized) parameters.
    pub fn mean(&self) -> f64 {
        match self.kind {
            RenewalKind::HyperExponential { p, r1, r2 } => p / r1 + (1.0 - p) / r2,
            _ => 1.0,
        }
    }

    /// Whether the distribution has a density component (spread-out). Only
    /// `Deterministic` fails this; it is tolerated for at most one of the two
    /// model primitives and flagged by the model assembly.
    pub fn is_spread_out(&self) -> bool {
        !matches!(self.kind, RenewalKind::Deterministic)
            && !matches!(self.kind, RenewalKind::Uniform { half_width } if half_width == 0.0)
    }

    /// Draws one inter-event time. Prefer [`RenewalSampler`] in hot loops.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    /// Prepares a reusable sampler for this distribution.
    pub fn sampler(&self) -> RenewalSampler {
        match self.kind {
            RenewalKind::Exponential => RenewalSampler::Exponential(Exp::new(1.0).expect("rate")),
            RenewalKind::Deterministic => RenewalSampler::Deterministic,
            RenewalKind::Erlang { k } => RenewalSampler::Erlang(
                Gamma::new(f64::from(k), 1.0 / f64::from(k)).expect("shape/scale"),
            ),
            RenewalKind::HyperExponential { p, r1, r2 } => RenewalSampler::HyperExponential {
                p,
                first: Exp::new(r1).expect("rate"),
                second: Exp::new(r2).expect("rate"),
            },
            RenewalKind::Uniform { half_width } => RenewalSampler::Uniform { half_width },
        }
    }

    /// `E[exp(-s (T ∧ cap))]`, exact per kind. `cap` may be
    /// [`INFINITE_CAP`], in which case the untruncated transform is returned
    /// (`+inf` where it diverges).
    pub fn truncated_laplace(&self, s: f64, cap: f64) -> f64 {
        assert!(cap > 0.0, "cap must be positive");
        if s == 0.0 {
            return 1.0;
        }
        match self.kind {
            RenewalKind::Deterministic => (-s * 1.0_f64.min(cap)).exp(),
            RenewalKind::Exponential => exp_rate_tl(1.0, s, cap),
            RenewalKind::Erlang { k } => erlang_tl(k, s, cap),
            RenewalKind::HyperExponential { p, r1, r2 } => {
                p * exp_rate_tl(r1, s, cap) + (1.0 - p) * exp_rate_tl(r2, s, cap)
            }
            RenewalKind::Uniform { half_width } => uniform_tl(half_width, s, cap),
        }
    }

    /// Derivative in `s` of the truncated transform,
    /// `-E[(T ∧ cap) exp(-s (T ∧ cap))]`.
    pub fn truncated_laplace_deriv(&self, s: f64, cap: f64) -> f64 {
        assert!(cap > 0.0, "cap must be positive");
        match self.kind {
            RenewalKind::Deterministic => {
                let m = 1.0_f64.min(cap);
                -m * (-s * m).exp()
            }
            RenewalKind::Exponential => exp_rate_tl_deriv(1.0, s, cap),
            RenewalKind::Erlang { k } => erlang_tl_deriv(k, s, cap),
            RenewalKind::HyperExponential { p, r1, r2 } => {
                p * exp_rate_tl_deriv(r1, s, cap) + (1.0 - p) * exp_rate_tl_deriv(r2, s, cap)
            }
            RenewalKind::Uniform { half_width } => uniform_tl_deriv(half_width, s, cap),
        }
    }
}

/// Prepared sampler; construction hoists the per-distribution setup out of
/// the event loop.
#[derive(Debug, Clone, Copy)]
pub enum RenewalSampler {
    Exponential(Exp<f64>),
    Deterministic,
    Erlang(Gamma<f64>),
    HyperExponential {
        p: f64,
        first: Exp<f64>,
        second: Exp<f64>,
    },
    Uniform {
        half_width: f64,
    },
}

impl RenewalSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let draw = match self {
            RenewalSampler::Exponential(d) => d.sample(rng),
            RenewalSampler::Deterministic => return 1.0,
            RenewalSampler::Erlang(d) => d.sample(rng),
            RenewalSampler::HyperExponential { p, first, second } => {
                let u: f64 = StandardUniform.sample(rng);
                if u < *p {
                    first.sample(rng)
                } else {
                    second.sample(rng)
                }
            }
            RenewalSampler::Uniform { half_width } => {
                let u: f64 = StandardUniform.sample(rng);
                return 1.0 - half_width + 2.0 * half_width * u;
            }
        };
        if draw > 0.0 {
            draw
        } else {
            // Zero draws occur with probability ~2^-53; redraw keeps the
            // strict-positivity invariant.
            self.sample(rng)
        }
    }
}

/// Regularized lower incomplete gamma `P(k, x)` for integer `k >= 1`.
///
/// Split at `x = k` so both branches sum positive terms only.
fn gamma_p(k: u32, x: f64) -> f64 {
    debug_assert!(k >= 1);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let kf = f64::from(k);
    if x >= kf {
        // 1 - e^(-x) sum_{j<k} x^j / j!
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..k {
            term *= x / f64::from(j);
            sum += term;
        }
        1.0 - (-x).exp() * sum
    } else {
        // e^(-x) sum_{j>=k} x^j / j!
        let mut term = 1.0; // builds up to x^k / k!
        for j in 1..=k {
            term *= x / f64::from(j);
        }
        let mut sum = term;
        let mut j = k;
        loop {
            j += 1;
            term *= x / f64::from(j);
            sum += term;
            if term <= 1e-18 * sum || j > k + 200 {
                break;
            }
        }
        (-x).exp() * sum
    }
}

/// `∫_0^c t^(k-1) e^(-a t) dt` for any real `a`, for small `k`.
///
/// For `a c >= k` the integration-by-parts closed form is stable; elsewhere
/// the power series is used (its terms are all positive for `a < 0`).
fn incomplete_power_exp(c: f64, k: u32, a: f64) -> f64 {
    debug_assert!(k >= 1);
    let kf = f64::from(k);
    if a == 0.0 {
        return c.powi(k as i32) / kf;
    }
    if a > 0.0 && a * c >= kf {
        // (k-1)!/a^k - e^(-a c) sum_{j=0}^{k-1} (k-1)!/(k-1-j)! c^(k-1-j)/a^(j+1)
        let mut factorial = 1.0;
        for j in 2..k {
            factorial *= f64::from(j);
        }
        let lead = factorial * a.powi(-(k as i32));
        let mut sum = 0.0;
        let mut coeff = 1.0; // (k-1)! / (k-1-j)!
        for j in 0..k {
            sum += coeff * c.powi((k - 1 - j) as i32) * a.powi(-(j as i32 + 1));
            coeff *= f64::from(k - 1 - j);
        }
        lead - (-a * c).exp() * sum
    } else {
        // sum_m (-a)^m c^(k+m) / (m! (k+m))
        let mut term = c.powi(k as i32); // (-a)^m c^(k+m) / m!
        let mut sum = term / kf;
        let limit = (2.0 * (a * c).abs()) as u32 + 80;
        for m in 1..=limit {
            term *= -a * c / f64::from(m);
            let contrib = term / (kf + f64::from(m));
            sum += contrib;
            if contrib.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }
}

/// Truncated transform of a rate-`r` exponential.
fn exp_rate_tl(r: f64, s: f64, cap: f64) -> f64 {
    let m = r + s;
    if cap.is_infinite() {
        return if m > 0.0 { r / m } else { f64::INFINITY };
    }
    // density part r (1 - e^(-m cap)) / m, plus atom e^(-(r+s) cap)
    let atom = (-m * cap).exp();
    if m == 0.0 {
        r * cap + 1.0
    } else {
        r * (-(-m * cap).exp_m1()) / m + atom
    }
}

fn exp_rate_tl_deriv(r: f64, s: f64, cap: f64) -> f64 {
    let m = r + s;
    if cap.is_infinite() {
        return if m > 0.0 { -r / (m * m) } else { f64::NEG_INFINITY };
    }
    -(r * incomplete_power_exp(cap, 2, m) + cap * (-m * cap).exp())
}

fn erlang_tail(k: u32, c: f64) -> f64 {
    // P[T > c] for rate-k Erlang: e^(-k c) sum_{j<k} (k c)^j / j!
    let kc = f64::from(k) * c;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= kc / f64::from(j);
        sum += term;
    }
    (-kc).exp() * sum
}

/// `k^k/(k-1)! * ∫_0^c t^(k-1+extra) e^(-m t) dt` for `extra ∈ {0, 1}`,
/// with the factorials cancelled analytically so large `k` cannot overflow.
fn erlang_partial(k: u32, m: f64, c: f64, extra: u32) -> f64 {
    let kf = f64::from(k);
    let order = k + extra;
    if m > 0.0 && m * c > 1.0 {
        return (kf / m).powi(order as i32) * gamma_p(order, m * c);
    }
    // Power series; for m <= 0 every term is positive, for small m c the
    // alternation is harmless.
    let mut pf = 1.0; // (k c)^k / k!
    for j in 1..=k {
        pf *= kf * c / f64::from(j);
    }
    let base_num = kf * pf * c.powi(extra as i32);
    let orderf = f64::from(order);
    let mut num = base_num;
    let mut sum = num / orderf;
    let limit = (2.0 * (m * c).abs()) as u32 + 80;
    for j in 1..=limit {
        num *= -m * c / f64::from(j);
        let contrib = num / (orderf + f64::from(j));
        sum += contrib;
        if contrib.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn erlang_tl(k: u32, s: f64, cap: f64) -> f64 {
    let kf = f64::from(k);
    let m = kf + s;
    if cap.is_infinite() {
        return if m > 0.0 {
            (kf / m).powi(k as i32)
        } else {
            f64::INFINITY
        };
    }
    erlang_partial(k, m, cap, 0) + erlang_tail(k, cap) * (-s * cap).exp()
}

fn erlang_tl_deriv(k: u32, s: f64, cap: f64) -> f64 {
    let kf = f64::from(k);
    let m = kf + s;
    if cap.is_infinite() {
        return if m > 0.0 {
            -(kf / m).powi(k as i32 + 1)
        } else {
            f64::NEG_INFINITY
        };
    }
    -(erlang_partial(k, m, cap, 1) + cap * erlang_tail(k, cap) * (-s * cap).exp())
}

fn uniform_tl(w: f64, s: f64, cap: f64) -> f64 {
    if w == 0.0 {
        return (-s * 1.0_f64.min(cap)).exp();
    }
    let a = 1.0 - w;
    let b = 1.0 + w;
    if cap <= a {
        return (-s * cap).exp();
    }
    let x = cap.min(b);
    // (e^(-s a) - e^(-s x)) / (2 w s), written via expm1 for stability
    let density = if s == 0.0 {
        (x - a) / (2.0 * w)
    } else {
        (-s * a).exp() * (-(-s * (x - a)).exp_m1()) / (2.0 * w * s)
    };
    let atom = if cap < b {
        (b - cap) / (2.0 * w) * (-s * cap).exp()
    } else {
        0.0
    };
    density + atom
}

fn uniform_tl_deriv(w: f64, s: f64, cap: f64) -> f64 {
    if w == 0.0 {
        let m = 1.0_f64.min(cap);
        return -m * (-s * m).exp();
    }
    let a = 1.0 - w;
    let b = 1.0 + w;
    if cap <= a {
        return -cap * (-s * cap).exp();
    }
    let x = cap.min(b);
    // ∫_a^x t e^(-s t) dt = e^(-s a) [ I(d;2,s) + a I(d;1,s) ], d = x - a
    let d = x - a;
    let integral = (-s * a).exp()
        * (incomplete_power_exp(d, 2, s) + a * incomplete_power_exp(d, 1, s));
    let atom = if cap < b {
        (b - cap) / (2.0 * w) * cap * (-s * cap).exp()
    } else {
        0.0
    };
    -(integral / (2.0 * w) + atom)
}
