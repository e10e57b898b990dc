//! Event-epoch (Palm) estimators.
//!
//! Palm expectations are realized as epoch averages over one long stationary
//! path: arrival epochs sample the pre-jump state `(L(0-), R_d(0-))`,
//! departure epochs the post-jump state `(L(0), R_e(0))`. Residuals are
//! "checked" at `n^(1/2)` before accumulating. On top of the accumulators
//! this module evaluates the intensity identities, the boundary identity,
//! and the correction statistics `H^(n)_x` and `Delta^(n)_x`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::profile::{ScaledSystem, SpeedProfile};
use crate::simulator::EmpiricalLaw;

/// Minimum epochs hitting a probe filter before an estimate is trusted.
pub const MIN_PROBE_EPOCHS: u64 = 200;

/// Power sums of checked residuals collected at one probe level `q`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
struct ProbeSums {
    arr_epochs: u64,
    /// Sums of `Ř_d(0-)^j`, `j = 1..=4`, over arrivals seeing `L(0-) = q`.
    arr_rd: [f64; 4],
    dep_epochs: u64,
    /// Sums of `Ř_e(0)^j` over departures leaving `L(0) = q`.
    dep_re: [f64; 4],
}

/// Epoch accumulators for one run (mergeable across replications).
#[derive(Debug, Clone, Serialize)]
pub struct PalmAccumulators {
    /// Residual check cap `n^(1/2)`.
    pub cap: f64,
    pub arr_count: u64,
    pub dep_count: u64,
    pub total_time: f64,
    /// Arrival counts by queue length seen on arrival.
    arr_seen: Vec<u64>,
    /// Departure counts by queue length left behind.
    dep_left: Vec<u64>,
    probes: BTreeMap<u64, ProbeSums>,
}

impl PalmAccumulators {
    pub fn new(cap: f64, probe_qs: impl IntoIterator<Item = u64>) -> Self {
        PalmAccumulators {
            cap,
            arr_count: 0,
            dep_count: 0,
            total_time: 0.0,
            arr_seen: Vec::new(),
            dep_left: Vec::new(),
            probes: probe_qs
                .into_iter()
                .map(|q| (q, ProbeSums::default()))
                .collect(),
        }
    }

    pub fn set_total_time(&mut self, t: f64) {
        self.total_time = t;
    }

    pub fn probe_qs(&self) -> impl Iterator<Item = u64> + '_ {
        self.probes.keys().copied()
    }

    fn bump(hist: &mut Vec<u64>, l: u64) {
        let idx = l as usize;
        if idx >= hist.len() {
            hist.resize(idx + 1, 0);
        }
        hist[idx] += 1;
    }

    /// Records an arrival epoch: `l_pre = L(0-)`, `r_d_pre = R_d(0-)`.
    pub fn on_arrival(&mut self, l_pre: u64, r_d_pre: f64) {
        self.arr_count += 1;
        Self::bump(&mut self.arr_seen, l_pre);
        if let Some(sums) = self.probes.get_mut(&l_pre) {
            sums.arr_epochs += 1;
            let r = r_d_pre.min(self.cap);
            let mut p = r;
            for slot in &mut sums.arr_rd {
                *slot += p;
                p *= r;
            }
        }
    }

    /// Records a departure epoch: `l_post = L(0)`, `r_e_post = R_e(0)`.
    pub fn on_departure(&mut self, l_post: u64, r_e_post: f64) {
        self.dep_count += 1;
        Self::bump(&mut self.dep_left, l_post);
        if let Some(sums) = self.probes.get_mut(&l_post) {
            sums.dep_epochs += 1;
            let r = r_e_post.min(self.cap);
            let mut p = r;
            for slot in &mut sums.dep_re {
                *slot += p;
                p *= r;
            }
        }
    }

    /// Exact merge: all fields are counts and sums.
    pub fn merge(&mut self, other: &PalmAccumulators) {
        debug_assert_eq!(self.cap, other.cap);
        self.arr_count += other.arr_count;
        self.dep_count += other.dep_count;
        self.total_time += other.total_time;
        if other.arr_seen.len() > self.arr_seen.len() {
            self.arr_seen.resize(other.arr_seen.len(), 0);
        }
        for (a, &b) in self.arr_seen.iter_mut().zip(&other.arr_seen) {
            *a += b;
        }
        if other.dep_left.len() > self.dep_left.len() {
            self.dep_left.resize(other.dep_left.len(), 0);
        }
        for (a, &b) in self.dep_left.iter_mut().zip(&other.dep_left) {
            *a += b;
        }
        for (q, sums) in &other.probes {
            let entry = self.probes.entry(*q).or_default();
            entry.arr_epochs += sums.arr_epochs;
            entry.dep_epochs += sums.dep_epochs;
            for j in 0..4 {
                entry.arr_rd[j] += sums.arr_rd[j];
                entry.dep_re[j] += sums.dep_re[j];
            }
        }
    }

    /// Arrival intensity estimate.
    pub fn alpha_e(&self) -> f64 {
        if self.total_time > 0.0 {
            self.arr_count as f64 / self.total_time
        } else {
            0.0
        }
    }

    /// Departure intensity estimate.
    pub fn alpha_d(&self) -> f64 {
        if self.total_time > 0.0 {
            self.dep_count as f64 / self.total_time
        } else {
            0.0
        }
    }

    /// Epoch fraction of arrivals seeing `L(0-) = q`.
    pub fn arr_fraction(&self, q: u64) -> f64 {
        if self.arr_count == 0 {
            return 0.0;
        }
        self.arr_seen.get(q as usize).copied().unwrap_or(0) as f64 / self.arr_count as f64
    }

    /// Epoch fraction of departures leaving `L(0) = q`.
    pub fn dep_fraction(&self, q: u64) -> f64 {
        if self.dep_count == 0 {
            return 0.0;
        }
        self.dep_left.get(q as usize).copied().unwrap_or(0) as f64 / self.dep_count as f64
    }

    /// Largest level with any epoch recorded.
    pub fn max_level(&self) -> u64 {
        self.arr_seen.len().max(self.dep_left.len()).saturating_sub(1) as u64
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct IntensityReport {
    pub alpha_e: f64,
    pub alpha_d: f64,
    /// `|alpha_e − alpha_d|`.
    pub r1: f64,
    /// Deterministic bound `(L(0) + L(T)) / T` on `r1`.
    pub r1_bound: f64,
    /// `|alpha_e − Σ_ℓ λ^(n)(ℓ) P̂[L = ℓ]|`.
    pub r2: f64,
    /// `|alpha_d − Σ_{ℓ>=1} μ^(n)(ℓ) P̂[L = ℓ]|`.
    pub r3: f64,
    /// Level-crossing balance: sup over ℓ of the gap between the arrival and
    /// departure epoch CDFs.
    pub crossing_sup: f64,
}

/// Arrival/departure intensity identities on a finished run.
pub fn intensity_identity_report(
    law: &EmpiricalLaw,
    acc: &PalmAccumulators,
    sys: &ScaledSystem,
) -> IntensityReport {
    let alpha_e = acc.alpha_e();
    let alpha_d = acc.alpha_d();
    let r1 = (alpha_e - alpha_d).abs();
    let r1_bound = if law.total_time > 0.0 {
        (law.l_start_sum + law.l_end_sum) as f64 / law.total_time
    } else {
        0.0
    };
    let mut lambda_mean = 0.0;
    let mut mu_mean = 0.0;
    for (ell, p) in law.masses() {
        let (lam, mu) = sys.speeds_at(ell);
        lambda_mean += lam * p;
        if ell >= 1 {
            mu_mean += mu * p;
        }
    }
    let (mut cum_arr, mut cum_dep) = (0.0, 0.0);
    let mut crossing_sup: f64 = 0.0;
    for q in 0..=acc.max_level() {
        cum_arr += acc.arr_fraction(q);
        cum_dep += acc.dep_fraction(q);
        crossing_sup = crossing_sup.max((cum_arr - cum_dep).abs());
    }
    IntensityReport {
        alpha_e,
        alpha_d,
        r1,
        r1_bound,
        r2: (alpha_e - lambda_mean).abs(),
        r3: (alpha_d - mu_mean).abs(),
        crossing_sup,
    }
}

/// One probe estimate; `insufficient` marks fewer than [`MIN_PROBE_EPOCHS`]
/// epochs behind the filter.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeEstimate {
    pub x: f64,
    pub q: u64,
    pub value: f64,
    pub stderr: f64,
    pub epochs_used: u64,
    pub insufficient: bool,
}

fn filtered_mean_and_var(sums: &[f64; 4], count: u64, a: f64) -> (f64, f64) {
    // mean and variance of w = (a ř − ř²) 1(L = q) over `count` epochs
    if count == 0 {
        return (0.0, 0.0);
    }
    let n = count as f64;
    let mean = (a * sums[0] - sums[1]) / n;
    let second = (a * a * sums[1] - 2.0 * a * sums[2] + sums[3]) / n;
    (mean, (second - mean * mean).max(0.0))
}

/// `H^(n)_x`: the second-order Palm correction at probe level `x`.
pub fn estimate_h(acc: &PalmAccumulators, sys: &ScaledSystem, x: f64) -> ProbeEstimate {
    let q = sys.q_of(x);
    let sums = acc.probes.get(&q).copied().unwrap_or_default();
    let alpha_e = acc.alpha_e();
    let (term_e, var_e) = filtered_mean_and_var(&sums.arr_rd, acc.arr_count, sys.service.scv);
    let (term_d, var_d) =
        filtered_mean_and_var(&sums.dep_re, acc.dep_count, sys.arrival.scv + 2.0);
    let value = 0.5 * alpha_e * (term_e - term_d);
    let se = 0.5
        * alpha_e
        * ((var_e / (acc.arr_count.max(1) as f64)) + (var_d / (acc.dep_count.max(1) as f64)))
            .sqrt();
    let epochs_used = sums.arr_epochs + sums.dep_epochs;
    ProbeEstimate {
        x,
        q,
        value,
        stderr: se,
        epochs_used,
        insufficient: epochs_used < MIN_PROBE_EPOCHS,
    }
}

/// `Delta^(n)_x`: the Palm/time-stationary bridging quantity at probe `x`.
pub fn estimate_delta(
    acc: &PalmAccumulators,
    _law: &EmpiricalLaw,
    sys: &ScaledSystem,
    x: f64,
) -> ProbeEstimate {
    let q = sys.q_of(x);
    let sums = acc.probes.get(&q).copied().unwrap_or_default();
    let alpha_e = acc.alpha_e();
    let n_arr = acc.arr_count.max(1) as f64;
    let n_dep = acc.dep_count.max(1) as f64;
    let mean_rd = sums.arr_rd[0] / n_arr;
    let mean_re = sums.dep_re[0] / n_dep;
    let p_e = acc.arr_fraction(q);
    let value = alpha_e * (mean_rd + mean_re - p_e);
    // plug-in variances of the three epoch averages
    let var_rd = (sums.arr_rd[1] / n_arr - mean_rd * mean_rd).max(0.0);
    let var_re = (sums.dep_re[1] / n_dep - mean_re * mean_re).max(0.0);
    let var_pe = p_e * (1.0 - p_e);
    let se = alpha_e * (var_rd / n_arr + var_re / n_dep + var_pe / n_arr).sqrt();
    let epochs_used = sums.arr_epochs + sums.dep_epochs;
    ProbeEstimate {
        x,
        q,
        value,
        stderr: se,
        epochs_used,
        insufficient: epochs_used < MIN_PROBE_EPOCHS,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryReport {
    /// `μ^(n)(0) n^(1/2) P̂[L = 0]`.
    pub lhs: f64,
    /// `−Σ_ℓ b̂^(n)(n^(-1/2) ℓ) P̂[L = ℓ]`.
    pub rhs: f64,
    pub rel_err: f64,
}

/// Boundary identity evaluated on any discrete law over queue lengths
/// (simulated or oracle). The drift is the diffusion-scaled hat field at
/// `u = n^(-1/2) ℓ`, which does not carry the `μ^(n)(0) = λ^(n)(0)` boundary
/// convention.
pub fn boundary_identity_report(
    masses: impl Iterator<Item = (u64, f64)>,
    sys: &ScaledSystem,
) -> BoundaryReport {
    let sqrt_n = sys.sqrt_n();
    let (_, mu0) = sys.speeds_at(0);
    let mut p0 = 0.0;
    let mut drift_mean = 0.0;
    for (ell, p) in masses {
        if ell == 0 {
            p0 = p;
        }
        drift_mean += sys.hat_fields(ell as f64 / sqrt_n).b_hat * p;
    }
    let lhs = mu0 * sqrt_n * p0;
    let rhs = -drift_mean;
    let rel_err = if rhs != 0.0 {
        (lhs - rhs).abs() / rhs.abs()
    } else {
        (lhs - rhs).abs()
    };
    BoundaryReport { lhs, rhs, rel_err }
}

/// Expectation of the pre-limit drift `n^(1/2)(λ^(n)(L) − μ^(n)(L))` split at
/// `q`: returns `(E[· 1(L <= q)], E[· 1(L > q)])`. Uses the integer-speed
/// convention (`μ^(n)(0) = λ^(n)(0)`), under which the split identities for
/// `Delta^(n)_x` are near-exact.
pub fn drift_expectation_split(law: &EmpiricalLaw, sys: &ScaledSystem, q: u64) -> (f64, f64) {
    let sqrt_n = sys.sqrt_n();
    let (mut below, mut above) = (0.0, 0.0);
    for (ell, p) in law.masses() {
        let (lam, mu) = sys.speeds_at(ell);
        let b = sqrt_n * (lam - mu);
        if ell <= q {
            below += b * p;
        } else {
            above += b * p;
        }
    }
    (below, above)
}

/// Default probe levels for a profile: fixed interior points, every level,
/// and region midpoints.
pub fn default_probes(profile: &SpeedProfile) -> Vec<f64> {
    let mut probes = vec![0.25, 0.5];
    let levels = profile.levels();
    for (i, &l) in levels.iter().enumerate() {
        probes.push(l);
        let prev = if i == 0 { 0.0 } else { levels[i - 1] };
        probes.push(0.5 * (prev + l));
    }
    if let Some(&last) = levels.last() {
        probes.push(last + 0.5);
    }
    probes.sort_by(|a, b| a.partial_cmp(b).expect("finite probes"));
    probes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    probes
}
