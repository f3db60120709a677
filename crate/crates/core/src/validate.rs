//! Independent certificate checking and Monte Carlo estimation.
//!
//! The checker re-derives every worst-case expectation from the raw interval
//! bounds with its own greedy routine; it shares no code with the solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::ambiguity::AmbiguitySet;
use crate::bounds::{AffineModel, TransitionBounds};
use crate::geometry::Rect;
use crate::synth::{safety_bound, Certificate};

/// Tolerance for every checked condition.
pub const CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("initial region index {0} out of range")]
    InitialOutOfRange(usize),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("model is not simulable (bounds were imported)")]
    NotSimulable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub passed: bool,
    /// Largest violation found (0 when nothing is violated).
    pub worst_violation: f64,
    /// Region attaining the worst violation, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<usize>,
}

impl ConditionResult {
    fn from_violations(it: impl Iterator<Item = (Option<usize>, f64)>, tol: f64) -> Self {
        let mut worst = 0.0f64;
        let mut region = None;
        for (i, v) in it {
            // NaN counts as an infinite violation.
            let v = if v.is_nan() { f64::INFINITY } else { v };
            if v > worst {
                worst = v;
                region = i;
            }
        }
        Self {
            passed: worst <= tol,
            worst_violation: worst,
            region,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub tolerance: f64,
    /// `b_i >= 0`.
    pub nonneg: ConditionResult,
    /// `b_i <= eta` on initial regions.
    pub initial: ConditionResult,
    /// `max_{p in P_i} sum_j b_j p_j + p_u <= b_i + beta_i`.
    pub martingale: ConditionResult,
    /// `0 <= beta_i <= beta`.
    pub beta_consistency: ConditionResult,
    /// `safety_lower_bound = max(0, 1 - (eta + N beta))`.
    pub bound_arithmetic: ConditionResult,
    pub passed: bool,
}

/// Worst-case `sum_j v_j p_j` over an interval simplex, by sorting every
/// destination (sink included) by value and filling upper bounds in turn.
fn worst_case_expectation(row: &AmbiguitySet, b: &[f64]) -> f64 {
    let k = row.k();
    let mut items: Vec<(f64, f64, f64)> = row
        .entries()
        .map(|(j, lo, hi)| (b[j], lo, hi))
        .collect();
    let (ul, uh) = row.unsafe_interval();
    items.push((1.0, ul, uh));
    debug_assert!(items.len() <= k + 1);
    items.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut value: f64 = items.iter().map(|&(v, lo, _)| v * lo).sum();
    let mut budget = 1.0 - items.iter().map(|&(_, lo, _)| lo).sum::<f64>();
    for &(v, lo, hi) in &items {
        if budget <= 0.0 {
            break;
        }
        let add = (hi - lo).min(budget);
        value += v * add;
        budget -= add;
    }
    value
}

/// Re-verifies the certificate conditions against raw bounds.
pub fn check_certificate(
    cert: &Certificate,
    bounds: &TransitionBounds,
    initial: &[usize],
) -> Result<CheckReport, ValidateError> {
    let k = bounds.k();
    let dims = [
        ("b", cert.b.len()),
        ("beta_per_region", cert.beta_per_region.len()),
        ("K", cert.k),
    ];
    for (what, got) in dims {
        if got != k {
            return Err(ValidateError::DimensionMismatch {
                what,
                expected: k,
                got,
            });
        }
    }
    if let Some(&i) = initial.iter().find(|&&i| i >= k) {
        return Err(ValidateError::InitialOutOfRange(i));
    }
    let tol = CHECK_TOL;
    let b = &cert.b;

    let nonneg = ConditionResult::from_violations(b.iter().enumerate().map(|(i, &v)| (Some(i), -v)), tol);
    let initial_res =
        ConditionResult::from_violations(initial.iter().map(|&i| (Some(i), b[i] - cert.eta)), tol);
    let gaps: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|i| worst_case_expectation(bounds.row(i), b) - b[i] - cert.beta_per_region[i])
        .collect();
    let martingale =
        ConditionResult::from_violations(gaps.into_iter().enumerate().map(|(i, v)| (Some(i), v)), tol);
    let beta_consistency = ConditionResult::from_violations(
        cert.beta_per_region
            .iter()
            .enumerate()
            .map(|(i, &bi)| (Some(i), (bi - cert.beta).max(-bi)))
            .chain(std::iter::once((None, -cert.beta))),
        tol,
    );
    let expected = safety_bound(cert.eta, cert.beta, cert.horizon);
    let bound_arithmetic = ConditionResult::from_violations(
        [
            (None, (cert.safety_lower_bound - expected).abs()),
            (None, -cert.eta),
        ]
        .into_iter(),
        tol,
    );
    let passed = nonneg.passed
        && initial_res.passed
        && martingale.passed
        && beta_consistency.passed
        && bound_arithmetic.passed
        && cert.horizon >= 1;
    Ok(CheckReport {
        tolerance: tol,
        nonneg,
        initial: initial_res,
        martingale,
        beta_consistency,
        bound_arithmetic,
        passed,
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials && trials > 0, "need 0 <= successes <= trials, trials > 0");
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Mean map and noise scale of `x' = f(x) + v`, `v ~ N(0, diag(sigma^2))`.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    fn mean(&self, x: &[f64]) -> Vec<f64>;
    fn sigma(&self) -> &[f64];
}

impl Dynamics for AffineModel {
    fn dim(&self) -> usize {
        AffineModel::dim(self)
    }
    fn mean(&self, x: &[f64]) -> Vec<f64> {
        AffineModel::mean(self, x)
    }
    fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

/// Safe set, initial set and obstacles of a safety query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyQuery {
    pub safe: Rect,
    pub initial: Rect,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

impl SafetyQuery {
    /// Inside the safe box and outside every closed obstacle.
    pub fn is_safe(&self, x: &[f64]) -> bool {
        self.safe.contains(x) && !self.obstacles.iter().any(|o| o.contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub trajectories: u64,
    pub safe_count: u64,
    pub estimate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub confidence: f64,
    pub horizon: usize,
    pub seed: u64,
}

pub const MC_CONFIDENCE: f64 = 0.99;

/// Simulates `trials` trajectories of `horizon` steps from uniform initial
/// states. Trajectory `t` draws from ChaCha8 seeded with `seed` on stream `t`.
pub fn simulate(
    dynamics: &dyn Dynamics,
    query: &SafetyQuery,
    horizon: usize,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, ValidateError> {
    if trials == 0 {
        return Err(ValidateError::NoTrials);
    }
    let n = dynamics.dim();
    for (what, got) in [
        ("safe set", query.safe.dim()),
        ("initial set", query.initial.dim()),
        ("noise", dynamics.sigma().len()),
    ] {
        if got != n {
            return Err(ValidateError::DimensionMismatch {
                what,
                expected: n,
                got,
            });
        }
    }
    let safe_count: u64 = (0..trials)
        .into_par_iter()
        .map(|t| u64::from(run_trajectory(dynamics, query, horizon, seed, t)))
        .sum();
    let (wilson_lo, wilson_hi) = wilson_interval(safe_count, trials, MC_CONFIDENCE);
    Ok(McEstimate {
        trajectories: trials,
        safe_count,
        estimate: safe_count as f64 / trials as f64,
        wilson_lo,
        wilson_hi,
        confidence: MC_CONFIDENCE,
        horizon,
        seed,
    })
}

fn run_trajectory(dynamics: &dyn Dynamics, query: &SafetyQuery, horizon: usize, seed: u64, t: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    let init = &query.initial;
    let mut x: Vec<f64> = (0..init.dim())
        .map(|d| init.lo()[d] + rng.random::<f64>() * init.width(d))
        .collect();
    if !query.is_safe(&x) {
        return false;
    }
    let sigma = dynamics.sigma();
    for _ in 0..horizon {
        x = dynamics.mean(&x);
        for (v, s) in x.iter_mut().zip(sigma) {
            let z: f64 = rng.sample(StandardNormal);
            *v += s * z;
        }
        if !query.is_safe(&x) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Diagnostics, Problem, SolverKind};

    fn two_region() -> (TransitionBounds, Vec<usize>) {
        let r0 = AmbiguitySet::from_dense(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        let r1 = AmbiguitySet::from_dense(&[0.0, 0.95, 0.05], &[0.0, 0.95, 0.05]).unwrap();
        (TransitionBounds::new(vec![r0, r1]).unwrap(), vec![0])
    }

    #[test]
    fn vacuous_certificate_passes() {
        let (bounds, init) = two_region();
        let p = Problem::new(&bounds, &init, 10);
        let c = Certificate::from_barrier(&p, vec![1.0, 1.0], SolverKind::Gd, Diagnostics::default())
            .unwrap();
        assert_eq!(c.eta, 1.0);
        assert_eq!(c.beta, 0.0);
        let r = check_certificate(&c, &bounds, &init).unwrap();
        assert!(r.passed);
        assert_eq!(c.safety_lower_bound, 0.0);
    }

    #[test]
    fn corrupted_barrier_fails() {
        let (bounds, init) = two_region();
        let p = Problem::new(&bounds, &init, 10);
        let mut c =
            Certificate::from_barrier(&p, vec![0.0, 0.0], SolverKind::Dual, Diagnostics::default())
                .unwrap();
        c.b[0] += 0.1;
        let r = check_certificate(&c, &bounds, &init).unwrap();
        assert!(!r.passed);
        assert!(r.initial.worst_violation > 0.0 || r.martingale.worst_violation > 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let (bounds, init) = two_region();
        let p = Problem::new(&bounds, &init, 10);
        let mut c =
            Certificate::from_barrier(&p, vec![0.0, 0.0], SolverKind::Dual, Diagnostics::default())
                .unwrap();
        c.b.pop();
        assert!(matches!(
            check_certificate(&c, &bounds, &init),
            Err(ValidateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn wilson_edges() {
        assert_eq!(wilson_interval(0, 100, 0.99).0, 0.0);
        assert_eq!(wilson_interval(100, 100, 0.99).1, 1.0);
        let (lo, hi) = wilson_interval(50, 100, 0.99);
        assert!(lo < 0.5 && hi > 0.5);
        assert!(((0.5 - lo) - (hi - 0.5)).abs() < 1e-12);
    }
}
