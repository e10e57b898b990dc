//! Queue-length-dependent speed functions and their heavy-traffic family.
//!
//! A [`SpeedProfile`] stores the limit fields `(λ, λ*, μ, μ*)` as step
//! functions over level sets `S_1 = [0, ℓ_1]`, `S_i = (ℓ_{i-1}, ℓ_i]`, plus a
//! tail region. The `n`-th system realizes the family exactly as
//! `λ^(n) = λ + n^(-1/2) λ*` with zero remainder, and instantiates levels at
//! `ℓ^(n)_i = n^(1/2) ℓ_i`, so all drift/variance limits hold with equality
//! on every region.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{RenewalKind, RenewalSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("levels must be strictly increasing and positive (index {0})")]
    LevelsNotIncreasing(usize),
    #[error("expected {expected} regions for {levels} levels, got {got}")]
    RegionCount {
        levels: usize,
        expected: usize,
        got: usize,
    },
    #[error("region {0}: lambda and mu limits must agree (balanced limit)")]
    UnbalancedRegion(usize),
    #[error("region {0}: limit speeds must be positive")]
    NonPositiveSpeed(usize),
    #[error("region {0}: field {1} is not finite")]
    NonFinite(usize, &'static str),
    #[error("n must be >= 1")]
    BadScale,
    #[error("region {region}: n-th system speed {speed} is not positive at n = {n}")]
    NonPositiveScaledSpeed { region: usize, n: u64, speed: f64 },
    #[error("arrival and service distributions are both deterministic (zero total variance)")]
    ZeroVariance,
}

/// Per-region constants of the limit family. `lambda` must equal `mu`; the
/// first-order perturbations `lambda_star`, `mu_star` may take any sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRates {
    pub lambda: f64,
    #[serde(default)]
    pub lambda_star: f64,
    pub mu: f64,
    #[serde(default)]
    pub mu_star: f64,
}

impl RegionRates {
    pub fn balanced(rate: f64, lambda_star: f64, mu_star: f64) -> Self {
        RegionRates {
            lambda: rate,
            lambda_star,
            mu: rate,
            mu_star,
        }
    }

    /// First-order drift `b = λ* − μ*` on this region.
    pub fn b(&self) -> f64 {
        self.lambda_star - self.mu_star
    }
}

/// Which route the analyzer takes for this profile: `MultiLevel` profiles get
/// exact piecewise-exponential formulas, `Tabular` ones go through adaptive
/// quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    MultiLevel,
    Tabular,
}

/// Piecewise-constant speed functions on scaled level sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    /// Strictly increasing positive levels, in scaled (diffusion) units.
    levels: Vec<f64>,
    /// One entry per region; `regions.len() == levels.len() + 1` and the last
    /// entry is the tail constant.
    regions: Vec<RegionRates>,
    #[serde(default)]
    representation: Representation,
    /// Set by the periodic constructor: the declared family continues beyond
    /// the materialized range, so the limit drift has no tail constant.
    #[serde(default)]
    periodic_truncation: bool,
}

impl SpeedProfile {
    pub fn new(
        levels: Vec<f64>,
        regions: Vec<RegionRates>,
        representation: Representation,
    ) -> Result<Self, ProfileError> {
        let mut prev = 0.0;
        for (i, &l) in levels.iter().enumerate() {
            if !l.is_finite() || l <= prev {
                return Err(ProfileError::LevelsNotIncreasing(i));
            }
            prev = l;
        }
        if regions.len() != levels.len() + 1 {
            return Err(ProfileError::RegionCount {
                levels: levels.len(),
                expected: levels.len() + 1,
                got: regions.len(),
            });
        }
        for (i, r) in regions.iter().enumerate() {
            for (name, v) in [
                ("lambda", r.lambda),
                ("lambda_star", r.lambda_star),
                ("mu", r.mu),
                ("mu_star", r.mu_star),
            ] {
                if !v.is_finite() {
                    return Err(ProfileError::NonFinite(i, name));
                }
            }
            if (r.lambda - r.mu).abs() > 1e-12 {
                return Err(ProfileError::UnbalancedRegion(i));
            }
            if r.lambda <= 0.0 || r.mu <= 0.0 {
                return Err(ProfileError::NonPositiveSpeed(i));
            }
        }
        Ok(SpeedProfile {
            levels,
            regions,
            representation,
            periodic_truncation: false,
        })
    }

    /// Single-region profile: constant limit rate with constant perturbations.
    pub fn single_region(rate: f64, lambda_star: f64, mu_star: f64) -> Result<Self, ProfileError> {
        Self::new(
            vec![],
            vec![RegionRates::balanced(rate, lambda_star, mu_star)],
            Representation::MultiLevel,
        )
    }

    /// Countably many levels given by an arithmetic rule, materialized up to
    /// `range` (scaled units). Only finitely many levels are visited over a
    /// finite horizon, so the truncated profile is exact on `[0, range]`; the
    /// tail constant repeats the last cycle entry and the stability report
    /// marks the limit drift as undefined.
    pub fn periodic(
        first_level: f64,
        spacing: f64,
        cycle: Vec<RegionRates>,
        range: f64,
    ) -> Result<Self, ProfileError> {
        if first_level <= 0.0 || spacing <= 0.0 || cycle.is_empty() {
            return Err(ProfileError::LevelsNotIncreasing(0));
        }
        let mut levels = Vec::new();
        let mut l = first_level;
        while l <= range {
            levels.push(l);
            l += spacing;
        }
        let regions: Vec<RegionRates> = (0..=levels.len())
            .map(|i| cycle[i % cycle.len()])
            .collect();
        let mut profile = Self::new(levels, regions, Representation::MultiLevel)?;
        profile.periodic_truncation = true;
        Ok(profile)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn regions(&self) -> &[RegionRates] {
        &self.regions
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn is_periodic_truncation(&self) -> bool {
        self.periodic_truncation
    }

    /// Index of the level set containing scaled level `u`
    /// (left-continuous convention: `u = ℓ_i` belongs to region `i`).
    pub fn region_index(&self, u: f64) -> usize {
        self.levels.partition_point(|&l| l < u)
    }

    pub fn region_at(&self, u: f64) -> &RegionRates {
        &self.regions[self.region_index(u)]
    }

    /// Tail region (beyond the last level).
    pub fn tail(&self) -> &RegionRates {
        self.regions.last().expect("nonempty regions")
    }
}

/// Limit drift and variance fields at scaled level `u`, together with the
/// `n`-th system's hat versions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatFields {
    /// `n^(1/2) (λ̂^(n)(u) − μ̂^(n)(u))`; equals `λ*(u) − μ*(u)` exactly under
    /// the zero-remainder family.
    pub b_hat: f64,
    /// `λ̂^(n)(u) σ_A² + μ̂^(n)(u) σ_S²`.
    pub sigma2_hat: f64,
    /// `2 b̂ / σ̂²`.
    pub beta_hat: f64,
}

/// Stability summary of the `n`-th system and its limit family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Tail drift `λ^(n) − μ^(n)` of the n-th system.
    pub gamma_inf: f64,
    /// Tail limit drift `b_∞ = λ* − μ*`; `None` when the profile is a
    /// periodic truncation (no tail constant exists).
    pub b_inf: Option<f64>,
    pub stable: bool,
    pub ht_stable: bool,
}

/// The `n`-th system: profile plus renewal primitives.
#[derive(Debug, Clone)]
pub struct ScaledSystem {
    pub n: u64,
    pub profile: SpeedProfile,
    pub arrival: RenewalSpec,
    pub service: RenewalSpec,
    sqrt_n: f64,
}

impl ScaledSystem {
    pub fn new(
        n: u64,
        profile: SpeedProfile,
        arrival: RenewalSpec,
        service: RenewalSpec,
    ) -> Result<Self, ProfileError> {
        if n < 1 {
            return Err(ProfileError::BadScale);
        }
        if arrival.scv + service.scv <= 0.0 {
            return Err(ProfileError::ZeroVariance);
        }
        let sqrt_n = (n as f64).sqrt();
        for (i, r) in profile.regions.iter().enumerate() {
            for speed in [
                r.lambda + r.lambda_star / sqrt_n,
                r.mu + r.mu_star / sqrt_n,
            ] {
                if speed <= 0.0 {
                    return Err(ProfileError::NonPositiveScaledSpeed {
                        region: i,
                        n,
                        speed,
                    });
                }
            }
        }
        Ok(ScaledSystem {
            n,
            profile,
            arrival,
            service,
            sqrt_n,
        })
    }

    pub fn sqrt_n(&self) -> f64 {
        self.sqrt_n
    }

    /// Non-blocking advisories about documented-but-unchecked hypotheses.
    pub fn advisories(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if !self.arrival.is_spread_out() {
            notes.push(
                "arrival distribution has no density component; positive recurrence is not \
                 guaranteed by the drift criterion alone"
                    .to_string(),
            );
        }
        notes
    }

    /// Arrival and service speeds of the `n`-th system at integer queue
    /// length `ell`, with `μ^(n)(0) = λ^(n)(0)` by convention.
    pub fn speeds_at(&self, ell: u64) -> (f64, f64) {
        let r = self.profile.region_at(ell as f64 / self.sqrt_n);
        let lam = r.lambda + r.lambda_star / self.sqrt_n;
        let mu = if ell == 0 {
            lam
        } else {
            r.mu + r.mu_star / self.sqrt_n
        };
        (lam, mu)
    }

    /// Diffusion-scaled drift/variance fields at scaled level `u`.
    ///
    /// `b_hat` is computed as `λ*(u) − μ*(u)` directly, which equals
    /// `n^(1/2)(λ̂ − μ̂)` without rounding under the exact family; the
    /// boundary convention at `ell = 0` does not apply here.
    pub fn hat_fields(&self, u: f64) -> HatFields {
        let r = self.profile.region_at(u);
        let lam_hat = r.lambda + r.lambda_star / self.sqrt_n;
        let mu_hat = r.mu + r.mu_star / self.sqrt_n;
        let b_hat = r.lambda_star - r.mu_star;
        let sigma2_hat = lam_hat * self.arrival.scv + mu_hat * self.service.scv;
        HatFields {
            b_hat,
            sigma2_hat,
            beta_hat: 2.0 * b_hat / sigma2_hat,
        }
    }

    /// Limit fields at scaled level `u`: `(b, σ², β)`.
    pub fn limit_fields(&self, u: f64) -> (f64, f64, f64) {
        let r = self.profile.region_at(u);
        let b = r.b();
        let sigma2 = r.lambda * self.arrival.scv + r.mu * self.service.scv;
        (b, sigma2, 2.0 * b / sigma2)
    }

    /// Scaled instantiated level `ℓ^(n)_i = n^(1/2) ℓ_i`.
    pub fn scaled_level(&self, i: usize) -> f64 {
        self.sqrt_n * self.profile.levels[i]
    }

    /// `q^(n)_x = ⌊n^(1/2) x⌋`.
    pub fn q_of(&self, x: f64) -> u64 {
        (self.sqrt_n * x).floor() as u64
    }

    pub fn stability_report(&self) -> StabilityReport {
        let tail = self.profile.tail();
        let gamma_inf = (tail.lambda + tail.lambda_star / self.sqrt_n)
            - (tail.mu + tail.mu_star / self.sqrt_n);
        let b_inf = if self.profile.periodic_truncation {
            None
        } else {
            Some(tail.b())
        };
        StabilityReport {
            gamma_inf,
            b_inf,
            stable: gamma_inf < 0.0,
            ht_stable: b_inf.map(|b| b < 0.0).unwrap_or(false),
        }
    }

    /// Both renewal primitives are exponential (Markovian special case).
    pub fn is_markovian(&self) -> bool {
        matches!(self.arrival.kind, RenewalKind::Exponential)
            && matches!(self.service.kind, RenewalKind::Exponential)
    }
}
