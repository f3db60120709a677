//! Synthesis of piecewise-constant stochastic barrier certificates.
//!
//! A certificate assigns a value `b_i in [0, 1]` to each decision region
//! (unsafe-tagged cells and everything outside the safe set are pinned to 1).
//! With `eta = max_{i initial} b_i` and `beta = max_i beta_i`, where `beta_i` is
//! the worst-case one-step increase of the barrier from region `i`, the
//! probability of staying safe for `N` steps is at least `1 - (eta + N beta)`.
//!
//! Three solvers minimize `eta + N beta`:
//! - [`synth_dual`]: one LP that replaces each robust constraint by its dual.
//! - [`synth_cegs`]: outer LP over accumulated worst-case distributions,
//!   alternated with per-region counterexample extraction.
//! - [`synth_gd`]: projected subgradient descent on a p-norm smoothed loss.

mod cegs;
mod dual;
mod gd;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::Gap;
use crate::bounds::TransitionBounds;
use crate::geometry::Partition;
use crate::lp::LpError;

pub use cegs::{synth_cegs, synth_cegs_with, CegsConfig};
pub use dual::{synth_dual, DualSolution};
pub use gd::{
    init_barrier, loss, smoothed_loss_and_grad, synth_gd, GdConfig, Loss, SmoothedLoss, StepSchedule,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("LP solve failed: {0}")]
    Lp(#[from] LpError),
    #[error("LP reported status {0:?}")]
    LpStatus(crate::lp::LpStatus),
    #[error("CEGS did not converge within {0} iterations")]
    IterationCapExceeded(usize),
    #[error("barrier has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

/// `max(0, 1 - (eta + N beta))`.
pub fn safety_bound(eta: f64, beta: f64, horizon: usize) -> f64 {
    (1.0 - (eta + horizon as f64 * beta)).max(0.0)
}

/// The data every solver needs: transition bounds over `K` decision regions,
/// the decision indices meeting the initial set, and the horizon.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub bounds: &'a TransitionBounds,
    pub initial: &'a [usize],
    pub horizon: usize,
}

impl<'a> Problem<'a> {
    pub fn new(bounds: &'a TransitionBounds, initial: &'a [usize], horizon: usize) -> Self {
        Self {
            bounds,
            initial,
            horizon,
        }
    }

    pub fn k(&self) -> usize {
        self.bounds.k()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.horizon == 0 {
            return Err(SynthError::ZeroHorizon);
        }
        Ok(())
    }

    /// `eta(b)`: largest barrier value over initial regions (0 if none).
    pub fn eta(&self, b: &[f64]) -> f64 {
        self.initial.iter().map(|&i| b[i]).fold(0.0, f64::max)
    }

    /// Martingale gaps of every region at `b`.
    pub fn gaps(&self, b: &[f64]) -> Vec<Gap> {
        (0..self.k())
            .into_par_iter()
            .map(|i| self.bounds.row(i).martingale_gap(b, i))
            .collect()
    }
}

/// Decision indices of the partition's initial regions.
pub fn initial_decisions(partition: &Partition) -> Vec<usize> {
    partition.initial_decision_indices()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dual,
    Cegs,
    Gd,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Dual => "dual",
            SolverKind::Cegs => "cegs",
            SolverKind::Gd => "gd",
        })
    }
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dual" => Ok(SolverKind::Dual),
            "cegs" => Ok(SolverKind::Cegs),
            "gd" => Ok(SolverKind::Gd),
            other => Err(format!("unknown solver `{other}` (expected dual, cegs or gd)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Outer iterations (CEGS), descent steps (GD) or 1 (dual).
    pub iterations: usize,
    pub runtime_secs: f64,
    /// Optimal value reported by the final LP, when one was solved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_pivots: Option<usize>,
    /// Counterexample distributions accumulated by CEGS.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexamples: Option<usize>,
    /// GD: best exact loss after each step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<f64>,
    /// GD initialization rule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
}

/// A barrier vector with its exactly recomputed `eta`, `beta` and bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub solver: SolverKind,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub eta: f64,
    pub beta: f64,
    pub beta_per_region: Vec<f64>,
    pub b: Vec<f64>,
    pub safety_lower_bound: f64,
    pub diagnostics: Diagnostics,
}

impl Certificate {
    /// Builds a certificate from `b`, recomputing `eta` and every `beta_i`
    /// with the worst-case oracle.
    pub fn from_barrier(
        problem: &Problem<'_>,
        b: Vec<f64>,
        solver: SolverKind,
        diagnostics: Diagnostics,
    ) -> Result<Self, SynthError> {
        if b.len() != problem.k() {
            return Err(SynthError::DimensionMismatch {
                expected: problem.k(),
                got: b.len(),
            });
        }
        let eta = problem.eta(&b);
        let beta_per_region: Vec<f64> = problem.gaps(&b).into_iter().map(|g| g.beta).collect();
        let beta = beta_per_region.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            solver,
            k: problem.k(),
            horizon: problem.horizon,
            eta,
            beta,
            beta_per_region,
            b,
            safety_lower_bound: safety_bound(eta, beta, problem.horizon),
            diagnostics,
        })
    }

    /// `eta + N beta`.
    pub fn objective(&self) -> f64 {
        self.eta + self.horizon as f64 * self.beta
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `region_index,b` rows (0-based decision index), optionally followed by
    /// the region's box corners.
    pub fn barrier_csv(&self, partition: Option<&Partition>) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("region_index,b");
        if let Some(p) = partition {
            for d in 0..p.dim() {
                let _ = write!(out, ",lo{d}");
            }
            for d in 0..p.dim() {
                let _ = write!(out, ",hi{d}");
            }
        }
        out.push('\n');
        for (i, v) in self.b.iter().enumerate() {
            let _ = write!(out, "{i},{v:.16e}");
            if let Some(p) = partition {
                let r = p.decision_region(i);
                for x in r.lo().iter().chain(r.hi()) {
                    let _ = write!(out, ",{x}");
                }
            }
            out.push('\n');
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safety_bound_arithmetic() {
        assert_eq!(safety_bound(0.0, 0.0, 10), 1.0);
        assert!((safety_bound(0.05, 0.005, 10) - 0.90).abs() < 1e-15);
        assert_eq!(safety_bound(0.9, 0.1, 10), 0.0);
    }

    #[test]
    fn certificate_recomputes_gaps() {
        let (bounds, init) = fixtures::two_region();
        let p = Problem::new(&bounds, &init, 10);
        let c = Certificate::from_barrier(&p, vec![0.0, 0.0], SolverKind::Gd, Diagnostics::default())
            .unwrap();
        assert_eq!(c.eta, 0.0);
        assert!((c.beta - 0.05).abs() < 1e-15);
        assert!((c.safety_lower_bound - 0.5).abs() < 1e-12);
        let back = Certificate::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn solver_kind_parse() {
        assert_eq!("CEGS".parse::<SolverKind>().unwrap(), SolverKind::Cegs);
        assert!("simplex".parse::<SolverKind>().is_err());
    }
}
