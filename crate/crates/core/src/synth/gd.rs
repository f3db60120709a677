//! Projected subgradient descent on the p-norm smoothed loss.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Certificate, Diagnostics, Problem, SolverKind, SynthError};
use crate::ambiguity::{destination_ranks, Gap};
use crate::bounds::TransitionBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `step0 * decay^k`
    Geometric,
    /// `step0 / (k + 1)`; square-summable but not summable.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub norm_p: f64,
    /// Initial step; `None` means `0.1 / N`.
    pub step0: Option<f64>,
    pub decay: f64,
    pub schedule: StepSchedule,
    pub stall_tol: f64,
    pub stall_window: usize,
    pub max_iters: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            norm_p: 16.0,
            step0: None,
            decay: 0.999,
            schedule: StepSchedule::Geometric,
            stall_tol: 1e-6,
            stall_window: 50,
            max_iters: 20_000,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if !(self.norm_p > 1.0 && self.norm_p.is_finite()) {
            return bad("norm_p must be a finite number > 1");
        }
        if self.step0.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("step0 must be positive");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if self.stall_window == 0 || self.max_iters == 0 {
            return bad("stall_window and max_iters must be at least 1");
        }
        if self.stall_tol.is_nan() || self.stall_tol < 0.0 {
            return bad("stall_tol must be >= 0");
        }
        Ok(())
    }

    pub fn step0_for(&self, horizon: usize) -> f64 {
        self.step0.unwrap_or(0.1 / horizon as f64)
    }

    fn step(&self, k: usize, step0: f64) -> f64 {
        match self.schedule {
            StepSchedule::Geometric => step0 * self.decay.powi(k.min(i32::MAX as usize) as i32),
            StepSchedule::Harmonic => step0 / (k as f64 + 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub eta: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedLoss {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// `L(b) = eta(b) + N beta(b)`.
pub fn loss(problem: &Problem<'_>, b: &[f64]) -> Loss {
    exact_loss(problem, b, &problem.gaps(b))
}

fn exact_loss(problem: &Problem<'_>, b: &[f64], gaps: &[Gap]) -> Loss {
    let eta = problem.eta(b);
    let beta = gaps.iter().map(|g| g.beta).fold(0.0, f64::max);
    Loss {
        value: eta + problem.horizon as f64 * beta,
        eta,
        beta,
    }
}

/// `||y||_p` computed with the largest entry factored out.
fn p_norm(y: impl Iterator<Item = f64> + Clone, p: f64) -> f64 {
    let m = y.clone().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * y.map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `L~(b) = ||eta~||_p + N ||beta~||_p` and its subgradient.
pub fn smoothed_loss_and_grad(problem: &Problem<'_>, b: &[f64], norm_p: f64) -> SmoothedLoss {
    let mut ws = Workspace::new(problem);
    ws.evaluate(problem, b);
    ws.smoothed(problem, b, norm_p)
}

/// Buffers reused across iterations: per-row maximizers stored flat, row
/// `i` at `probs[offsets[i]..offsets[i + 1]]` with the sink last.
struct Workspace {
    offsets: Vec<usize>,
    probs: Vec<f64>,
    order: Vec<(u32, u32)>,
    betas: Vec<f64>,
}

impl Workspace {
    fn new(problem: &Problem<'_>) -> Self {
        let mut offsets = Vec::with_capacity(problem.k() + 1);
        offsets.push(0);
        for row in problem.bounds.rows() {
            offsets.push(offsets.last().unwrap() + row.support_len() + 1);
        }
        Self {
            probs: vec![0.0; *offsets.last().unwrap()],
            offsets,
            order: Vec::new(),
            betas: vec![0.0; problem.k()],
        }
    }

    /// Fills the gaps and maximizers at `b`; returns the exact loss.
    fn evaluate(&mut self, problem: &Problem<'_>, b: &[f64]) -> Loss {
        let rank = destination_ranks(b);
        for (i, row) in problem.bounds.rows().iter().enumerate() {
            let probs = &mut self.probs[self.offsets[i]..self.offsets[i + 1]];
            let v = row.worst_case_ranked(b, &rank, &mut self.order, probs);
            self.betas[i] = (v - b[i]).max(0.0);
        }
        let eta = problem.eta(b);
        let beta = self.betas.iter().copied().fold(0.0, f64::max);
        Loss {
            value: eta + problem.horizon as f64 * beta,
            eta,
            beta,
        }
    }

    fn smoothed(&self, problem: &Problem<'_>, b: &[f64], p: f64) -> SmoothedLoss {
        let k = problem.k();
        let n_big = problem.horizon as f64;
        let mut grad = vec![0.0; k];

        let eta_norm = p_norm(problem.initial.iter().map(|&i| b[i]), p);
        if eta_norm > 0.0 {
            for &i in problem.initial {
                grad[i] += (b[i] / eta_norm).powf(p - 1.0);
            }
        }

        let beta_norm = p_norm(self.betas.iter().copied(), p);
        if beta_norm > 0.0 {
            for (i, row) in problem.bounds.rows().iter().enumerate() {
                let beta = self.betas[i];
                if beta <= 0.0 {
                    continue;
                }
                let w = n_big * (beta / beta_norm).powf(p - 1.0);
                let probs = &self.probs[self.offsets[i]..self.offsets[i + 1]];
                for ((j, _, _), pj) in row.entries().zip(probs) {
                    grad[j] += w * pj;
                }
                grad[i] -= w;
            }
        }
        SmoothedLoss {
            value: eta_norm + n_big * beta_norm,
            grad,
        }
    }
}

/// `(p_up_1u, ..., p_up_Ku)` clamped to `[0, 1]`.
pub fn init_barrier(bounds: &TransitionBounds) -> Vec<f64> {
    bounds
        .rows()
        .iter()
        .map(|r| r.unsafe_interval().1.clamp(0.0, 1.0))
        .collect()
}

pub fn synth_gd(problem: &Problem<'_>, config: &GdConfig) -> Result<Certificate, SynthError> {
    problem.validate()?;
    config.validate()?;
    let start = Instant::now();
    let step0 = config.step0_for(problem.horizon);

    let mut b = init_barrier(problem.bounds);
    let mut best_b = b.clone();
    let mut best = f64::INFINITY;
    let mut history = Vec::new();
    let mut max_betas: Vec<f64> = Vec::new();
    let mut steps = 0;
    let mut stop = "max_iters";

    let mut ws = Workspace::new(problem);
    loop {
        let exact = ws.evaluate(problem, &b);
        if exact.value < best {
            best = exact.value;
            best_b.clone_from(&b);
        }
        history.push(best);
        max_betas.push(exact.beta);

        if best == 0.0 {
            stop = "zero loss";
            break;
        }
        let n = max_betas.len();
        if n > config.stall_window {
            let window = &max_betas[n - 1 - config.stall_window..];
            let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
            if hi - lo < config.stall_tol {
                stop = "stall";
                break;
            }
        }
        if steps == config.max_iters {
            break;
        }

        let s = ws.smoothed(problem, &b, config.norm_p);
        let alpha = config.step(steps, step0);
        for (v, g) in b.iter_mut().zip(&s.grad) {
            *v = (*v - alpha * g).clamp(0.0, 1.0);
        }
        steps += 1;
    }

    let diagnostics = Diagnostics {
        iterations: steps,
        runtime_secs: start.elapsed().as_secs_f64(),
        loss_history: history,
        init: Some("upper one-step unsafe probability".into()),
        stop_reason: Some(stop.into()),
        ..Diagnostics::default()
    };
    Certificate::from_barrier(problem, best_b, SolverKind::Gd, diagnostics)
}
