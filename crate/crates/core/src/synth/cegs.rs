//! Counterexample-guided synthesis.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Certificate, Diagnostics, Problem, SolverKind, SynthError};
use crate::ambiguity::Distribution;
use crate::lp::{solve_lp, LinearProgram, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CegsConfig {
    /// Stop once `beta* >= max_i beta_i - termination_tol`.
    pub termination_tol: f64,
    pub max_iters: usize,
}

impl Default for CegsConfig {
    fn default() -> Self {
        Self {
            termination_tol: 1e-9,
            max_iters: 1000,
        }
    }
}

/// Tolerance for treating two pool distributions as the same vertex.
const SAME_VERTEX_TOL: f64 = 1e-12;

pub fn synth_cegs(problem: &Problem<'_>) -> Result<Certificate, SynthError> {
    synth_cegs_with(problem, &CegsConfig::default())
}

pub fn synth_cegs_with(problem: &Problem<'_>, config: &CegsConfig) -> Result<Certificate, SynthError> {
    problem.validate()?;
    if config.termination_tol.is_nan() || config.termination_tol < 0.0 || config.max_iters == 0 {
        return Err(SynthError::InvalidConfig(
            "termination_tol must be >= 0 and max_iters >= 1".into(),
        ));
    }
    let start = Instant::now();
    let k = problem.k();
    let mut pools: Vec<Vec<Distribution>> = problem
        .bounds
        .rows()
        .iter()
        .map(|row| vec![row.index_order_point()])
        .collect();

    let mut total = k;
    let mut pivots = 0;
    for iter in 1..=config.max_iters {
        let (b, beta_star, objective, piv) = solve_outer(problem, &pools)?;
        pivots += piv;
        let gaps = problem.gaps(&b);
        let max_gap = gaps.iter().map(|g| g.beta).fold(0.0, f64::max);
        let done = beta_star >= max_gap - config.termination_tol;

        let mut added = 0;
        if !done {
            for (i, gap) in gaps.into_iter().enumerate() {
                if gap.beta <= beta_star + config.termination_tol {
                    continue;
                }
                let pool = &mut pools[i];
                if !pool.iter().any(|q| q.approx_eq(&gap.argmax, SAME_VERTEX_TOL)) {
                    pool.push(gap.argmax);
                    added += 1;
                }
            }
        }
        total += added;
        if done || added == 0 {
            let diagnostics = Diagnostics {
                iterations: iter,
                runtime_secs: start.elapsed().as_secs_f64(),
                lp_objective: Some(objective),
                lp_pivots: Some(pivots),
                counterexamples: Some(total),
                stop_reason: Some(
                    if done { "converged" } else { "no fresh counterexample" }.into(),
                ),
                ..Diagnostics::default()
            };
            return Certificate::from_barrier(problem, b, SolverKind::Cegs, diagnostics);
        }
    }
    Err(SynthError::IterationCapExceeded(config.max_iters))
}

/// Outer LP over the accumulated pools. Returns `(b, beta, objective, pivots)`.
fn solve_outer(
    problem: &Problem<'_>,
    pools: &[Vec<Distribution>],
) -> Result<(Vec<f64>, f64, f64, usize), SynthError> {
    let k = problem.k();
    let eta = k;
    let beta = k + 1;
    let beta_i = |i: usize| k + 2 + i;
    let mut lp = LinearProgram::new(2 * k + 2);
    lp.set_cost(eta, 1.0);
    lp.set_cost(beta, problem.horizon as f64);
    for i in 0..k {
        lp.set_bounds(i, 0.0, 1.0)?;
    }
    for &i in problem.initial {
        lp.add_le(vec![(i, 1.0), (eta, -1.0)], 0.0)?;
    }
    for (i, pool) in pools.iter().enumerate() {
        lp.add_le(vec![(beta_i(i), 1.0), (beta, -1.0)], 0.0)?;
        // sum_j p_j b_j + p_u <= b_i + beta_i
        for p in pool {
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(p.iter().count() + 2);
            let mut self_coeff = -1.0;
            for (j, pj) in p.iter() {
                if j == i {
                    self_coeff += pj;
                } else if pj != 0.0 {
                    coeffs.push((j, pj));
                }
            }
            if self_coeff != 0.0 {
                coeffs.push((i, self_coeff));
            }
            coeffs.push((beta_i(i), -1.0));
            lp.add_le(coeffs, -p.unsafe_prob())?;
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SynthError::LpStatus(sol.status));
    }
    let b = sol.x[..k].iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok((b, sol.x[beta], sol.objective_value, sol.pivots))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures;
    use super::*;

    #[test]
    fn absorbing_one_iteration() {
        let (bounds, init) = fixtures::absorbing();
        let p = Problem::new(&bounds, &init, 10);
        let c = synth_cegs(&p).unwrap();
        assert_eq!(c.safety_lower_bound, 1.0);
        assert_eq!(c.diagnostics.iterations, 1);
    }

    #[test]
    fn two_region_singletons_converge_immediately() {
        let (bounds, init) = fixtures::two_region();
        let p = Problem::new(&bounds, &init, 10);
        let c = synth_cegs(&p).unwrap();
        assert!((c.objective() - fixtures::TWO_REGION_OPT).abs() < 1e-9);
        assert_eq!(c.diagnostics.iterations, 1);
    }

    #[test]
    fn iteration_cap() {
        use crate::ambiguity::AmbiguitySet;
        use crate::bounds::TransitionBounds;
        let r0 = AmbiguitySet::from_dense(&[0.0, 0.0, 0.0], &[1.0, 1.0, 0.2]).unwrap();
        let r1 = AmbiguitySet::from_dense(&[0.0, 0.0, 0.0], &[1.0, 1.0, 0.3]).unwrap();
        let bounds = TransitionBounds::new(vec![r0, r1]).unwrap();
        let init = vec![0];
        let p = Problem::new(&bounds, &init, 10);
        let cfg = CegsConfig {
            max_iters: 1,
            ..CegsConfig::default()
        };
        let full = synth_cegs(&p).unwrap();
        assert!(full.diagnostics.iterations > 1);
        assert!(matches!(
            synth_cegs_with(&p, &cfg),
            Err(SynthError::IterationCapExceeded(1))
        ));
    }
}
