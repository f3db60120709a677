//! Dual LP: each robust martingale constraint replaced by its LP dual.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Certificate, Diagnostics, Problem, SolverKind, SynthError};
use crate::lp::{solve_lp, LinearProgram, LpStatus};

/// Per-region multipliers of the dual reformulation.
///
/// `lambda[i]` has length `2(K+1)+2` in the row order of
/// [`AmbiguitySet::to_hpolytope`](crate::ambiguity::AmbiguitySet::to_hpolytope):
/// upper-bound rows, lower-bound rows, `sum <= 1`, `-sum <= -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub lambda: Vec<Vec<f64>>,
    /// `beta_i` as returned by the LP (an upper bound on the exact gap).
    pub beta_lp: Vec<f64>,
    pub eta_lp: f64,
    pub beta_max_lp: f64,
    pub objective: f64,
}

impl DualSolution {
    /// Largest violation of `h_i^T lambda_i <= b_i + beta_i`, `H_i^T lambda_i = (b, 1)`
    /// and `lambda_i >= 0` over all regions.
    pub fn max_violation(&self, problem: &Problem<'_>, b: &[f64]) -> f64 {
        let k = problem.k();
        let mut worst = 0.0f64;
        for (i, lam) in self.lambda.iter().enumerate() {
            let row = problem.bounds.row(i);
            let poly = row.to_hpolytope();
            let mut ht = 0.0;
            let mut hl = vec![0.0; k + 1];
            for (r, (coeffs, &h)) in poly.rows.iter().zip(&poly.rhs).enumerate() {
                ht += h * lam[r];
                for (acc, c) in hl.iter_mut().zip(coeffs) {
                    *acc += c * lam[r];
                }
            }
            worst = worst.max(ht - b[i] - self.beta_lp[i]);
            for (j, v) in hl.iter().enumerate() {
                let target = if j == k { 1.0 } else { b[j] };
                worst = worst.max((v - target).abs());
            }
            for &l in lam {
                worst = worst.max(-l);
            }
        }
        worst
    }
}

/// Variable layout of one region's multipliers in the reduced LP.
struct RegionVars {
    /// Destinations kept in the LP: listed targets then the sink (`K`).
    dests: Vec<usize>,
    upper: Vec<usize>,
    lower: Vec<usize>,
    sum_pos: usize,
    sum_neg: usize,
}

/// Solves the dual LP and returns the certificate together with the
/// multipliers.
///
/// Coordinates with `lower = upper = 0` have a free equality row that can
/// always be satisfied by its own pair of multipliers at zero cost; they are
/// left out of the LP and reconstructed afterwards.
pub fn synth_dual(problem: &Problem<'_>) -> Result<(Certificate, DualSolution), SynthError> {
    problem.validate()?;
    let start = Instant::now();
    let k = problem.k();
    let n_big = problem.horizon as f64;

    // b_0..b_{K-1}, eta, beta, beta_0..beta_{K-1}, then multipliers.
    let eta = k;
    let beta = k + 1;
    let beta_i = |i: usize| k + 2 + i;
    let mut next = 2 * k + 2;
    let mut regions = Vec::with_capacity(k);
    for i in 0..k {
        let row = problem.bounds.row(i);
        let mut dests: Vec<usize> = row.entries().map(|(j, _, _)| j).collect();
        dests.push(k);
        let s = dests.len();
        let upper = (next..next + s).collect();
        let lower = (next + s..next + 2 * s).collect();
        regions.push(RegionVars {
            dests,
            upper,
            lower,
            sum_pos: next + 2 * s,
            sum_neg: next + 2 * s + 1,
        });
        next += 2 * s + 2;
    }

    let mut lp = LinearProgram::new(next);
    lp.set_cost(eta, 1.0);
    lp.set_cost(beta, n_big);
    for i in 0..k {
        lp.set_bounds(i, 0.0, 1.0)?;
    }
    for &i in problem.initial {
        lp.add_le(vec![(i, 1.0), (eta, -1.0)], 0.0)?;
    }
    for (i, rv) in regions.iter().enumerate() {
        let row = problem.bounds.row(i);
        lp.add_le(vec![(beta_i(i), 1.0), (beta, -1.0)], 0.0)?;

        // h_i^T lambda_i <= b_i + beta_i
        let mut coeffs = Vec::with_capacity(2 * rv.dests.len() + 4);
        for (t, &j) in rv.dests.iter().enumerate() {
            let (lo, hi) = row.interval(j);
            if hi != 0.0 {
                coeffs.push((rv.upper[t], hi));
            }
            if lo != 0.0 {
                coeffs.push((rv.lower[t], -lo));
            }
        }
        coeffs.push((rv.sum_pos, 1.0));
        coeffs.push((rv.sum_neg, -1.0));
        coeffs.push((i, -1.0));
        coeffs.push((beta_i(i), -1.0));
        lp.add_le(coeffs, 0.0)?;

        // H_i^T lambda_i = (b, 1) on the kept coordinates
        for (t, &j) in rv.dests.iter().enumerate() {
            let mut coeffs = vec![
                (rv.upper[t], 1.0),
                (rv.lower[t], -1.0),
                (rv.sum_pos, 1.0),
                (rv.sum_neg, -1.0),
            ];
            let rhs = if j == k {
                1.0
            } else {
                coeffs.push((j, -1.0));
                0.0
            };
            lp.add_eq(coeffs, rhs)?;
        }
    }

    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SynthError::LpStatus(sol.status));
    }
    let x = &sol.x;
    let b: Vec<f64> = x[..k].iter().map(|v| v.clamp(0.0, 1.0)).collect();

    let n_rows = 2 * (k + 1) + 2;
    let lambda = regions
        .iter()
        .map(|rv| {
            let mut lam = vec![0.0; n_rows];
            let s = x[rv.sum_pos] - x[rv.sum_neg];
            lam[2 * (k + 1)] = x[rv.sum_pos];
            lam[2 * (k + 1) + 1] = x[rv.sum_neg];
            let mut kept = vec![false; k + 1];
            for (t, &j) in rv.dests.iter().enumerate() {
                kept[j] = true;
                lam[j] = x[rv.upper[t]].max(0.0);
                lam[k + 1 + j] = x[rv.lower[t]].max(0.0);
            }
            for j in (0..k).filter(|&j| !kept[j]) {
                let d = x[j] - s;
                lam[j] = d.max(0.0);
                lam[k + 1 + j] = (-d).max(0.0);
            }
            lam
        })
        .collect();

    let dual = DualSolution {
        lambda,
        beta_lp: (0..k).map(|i| x[beta_i(i)]).collect(),
        eta_lp: x[eta],
        beta_max_lp: x[beta],
        objective: sol.objective_value,
    };
    let diagnostics = Diagnostics {
        iterations: 1,
        runtime_secs: start.elapsed().as_secs_f64(),
        lp_objective: Some(sol.objective_value),
        lp_pivots: Some(sol.pivots),
        ..Diagnostics::default()
    };
    let cert = Certificate::from_barrier(problem, b, SolverKind::Dual, diagnostics)?;
    Ok((cert, dual))
}
