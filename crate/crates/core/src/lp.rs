//! Dense two-phase bounded-variable primal simplex.
//!
//! Programs are stated as `min c.x` subject to sparse `<=` and `=` rows and
//! per-variable bounds (infinite bounds allowed). The solver converts to
//! standard form (`0 <= y <= u`, one slack per inequality, artificials where
//! the slack basis is infeasible), runs phase 1 on the artificial sum and
//! phase 2 on the true objective. Entering columns follow Dantzig's rule with
//! a Harris ratio test; after a run of degenerate pivots the solver switches
//! to Bland's rule until the objective moves again, which rules out cycling.
//!
//! Every optimal point is re-checked against the original rows by
//! [`check_feasible`]; a residual above [`FEASIBILITY_TOL`] is reported as a
//! numerical failure instead of being returned.

use std::fmt::Write as _;

use thiserror::Error;

pub const PIVOT_TOL: f64 = 1e-9;
pub const FEASIBILITY_TOL: f64 = 1e-8;
const OPTIMALITY_TOL: f64 = 1e-9;
/// Pivot candidates below this fraction of the column's largest entry are
/// treated as zero.
const RELATIVE_PIVOT_TOL: f64 = 1e-7;
const DEFAULT_MAX_PIVOTS: usize = 1_000_000;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 1000;
/// Bound relaxation of the Harris ratio test.
const HARRIS_TOL: f64 = 1e-9;
/// Residual above which the final basis is re-solved from the original rows.
const REFINE_THRESHOLD: f64 = 1e-11;
/// Reduced costs are rebuilt from the original objective this often.
const COST_REFRESH_PIVOTS: usize = 200;
/// Largest dense tableau (`rows x columns`) the solver will allocate.
pub const MAX_TABLEAU_ENTRIES: usize = 150_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable index {index} out of range for {n} variables")]
    VariableOutOfRange { index: usize, n: usize },
    #[error("objective has {got} entries for {n} variables")]
    ObjectiveLength { got: usize, n: usize },
    #[error("variable {0} has lower bound above upper bound")]
    InvalidBounds(usize),
    #[error("non-finite coefficient in row {0}")]
    NonFinite(usize),
    #[error("numerical failure: residual {residual:e} after {pivots} pivots")]
    NumericalFailure { residual: f64, pivots: usize },
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
    #[error("LP too large for the dense solver: {rows} rows x {cols} columns")]
    TooLarge { rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// One sparse constraint row `sum coeffs.x (<= | =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// `min c.x  s.t.  G x <= g,  E x = e,  lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    ineq: Vec<Row>,
    eq: Vec<Row>,
    bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub pivots: usize,
    /// Max scaled primal residual of `x` on the original rows.
    pub residual: f64,
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
}

impl LinearProgram {
    /// `n` variables, zero objective, default bounds `[0, +inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            objective: vec![0.0; n],
            ineq: Vec::new(),
            eq: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn ineq_rows(&self) -> &[Row] {
        &self.ineq
    }

    pub fn eq_rows(&self) -> &[Row] {
        &self.eq
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn set_objective(&mut self, c: Vec<f64>) -> Result<(), LpError> {
        if c.len() != self.n {
            return Err(LpError::ObjectiveLength {
                got: c.len(),
                n: self.n,
            });
        }
        self.objective = c;
        Ok(())
    }

    pub fn set_cost(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<(), LpError> {
        if j >= self.n {
            return Err(LpError::VariableOutOfRange { index: j, n: self.n });
        }
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(LpError::InvalidBounds(j));
        }
        self.bounds[j] = (lo, hi);
        Ok(())
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> Result<(), LpError> {
        let row = self.make_row(coeffs, rhs, self.ineq.len() + self.eq.len())?;
        self.ineq.push(row);
        Ok(())
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> Result<(), LpError> {
        let row = self.make_row(coeffs, rhs, self.ineq.len() + self.eq.len())?;
        self.eq.push(row);
        Ok(())
    }

    fn make_row(&self, coeffs: Vec<(usize, f64)>, rhs: f64, id: usize) -> Result<Row, LpError> {
        if let Some(&(j, _)) = coeffs.iter().find(|(j, _)| *j >= self.n) {
            return Err(LpError::VariableOutOfRange { index: j, n: self.n });
        }
        if !rhs.is_finite() || coeffs.iter().any(|(_, a)| !a.is_finite()) {
            return Err(LpError::NonFinite(id));
        }
        Ok(Row { coeffs, rhs })
    }

    /// Plain-text dump: objective row, then one line per constraint.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vars {}", self.n);
        let _ = write!(out, "min");
        for (j, c) in self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            let _ = write!(out, " {c:+e}*x{j}");
        }
        let _ = writeln!(out);
        for (kind, rows) in [("<=", &self.ineq), ("=", &self.eq)] {
            for row in rows.iter() {
                for (j, a) in &row.coeffs {
                    let _ = write!(out, "{a:+e}*x{j} ");
                }
                let _ = writeln!(out, "{kind} {:e}", row.rhs);
            }
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(out, "{lo:e} <= x{j} <= {hi:e}");
        }
        out
    }
}

/// True iff every row and bound of `lp` holds at `x` within `tol`, with each
/// row scaled by its largest coefficient magnitude.
pub fn check_feasible(lp: &LinearProgram, x: &[f64], tol: f64) -> bool {
    x.len() == lp.n && max_residual(lp, x) <= tol
}

/// Largest scaled violation of any row or bound.
pub fn max_residual(lp: &LinearProgram, x: &[f64]) -> f64 {
    let scaled = |row: &Row| {
        let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        let scale = row
            .coeffs
            .iter()
            .fold(0.0f64, |m, (_, a)| m.max(a.abs()))
            .max(1e-300);
        (lhs - row.rhs) / scale
    };
    let mut worst = 0.0f64;
    for row in &lp.ineq {
        worst = worst.max(scaled(row));
    }
    for row in &lp.eq {
        worst = worst.max(scaled(row).abs());
    }
    for (v, &(lo, hi)) in x.iter().zip(&lp.bounds) {
        worst = worst.max(lo - v).max(v - hi);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    worst
}

/// Solves `lp` with the default pivot limit.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with_limit(lp, DEFAULT_MAX_PIVOTS)
}

pub fn solve_lp_with_limit(lp: &LinearProgram, max_pivots: usize) -> Result<LpSolution, LpError> {
    let std = StandardForm::build(lp);
    let (rows, cols) = std.tableau_shape();
    if rows.saturating_mul(cols) > MAX_TABLEAU_ENTRIES {
        return Err(LpError::TooLarge { rows, cols });
    }
    let mut tab = Tableau::new(&std);
    let status = tab.run(max_pivots)?;
    let pivots = tab.pivots;
    let mut sol = LpSolution {
        status,
        x: vec![],
        objective_value: f64::NAN,
        pivots,
        residual: f64::NAN,
        pivot_tol: PIVOT_TOL,
        feasibility_tol: FEASIBILITY_TOL,
    };
    if status != LpStatus::Optimal {
        return Ok(sol);
    }
    let (mut x, mut residual) = finish(lp, &std, &tab.column_values());
    if residual > REFINE_THRESHOLD {
        if let Some(cols) = tab.refined_values(&std) {
            let (x2, r2) = finish(lp, &std, &cols);
            if r2 < residual {
                x = x2;
                residual = r2;
            }
        }
    }
    if residual > FEASIBILITY_TOL {
        return Err(LpError::NumericalFailure { residual, pivots });
    }
    sol.objective_value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    sol.x = x;
    sol.residual = residual;
    Ok(sol)
}

/// Maps column values back to the original variables, snaps values within
/// tolerance of a bound onto it and returns the residual.
fn finish(lp: &LinearProgram, std: &StandardForm, cols: &[f64]) -> (Vec<f64>, f64) {
    let mut x = std.recover(cols);
    for (v, &(lo, hi)) in x.iter_mut().zip(&lp.bounds) {
        if *v < lo && *v > lo - FEASIBILITY_TOL {
            *v = lo;
        }
        if *v > hi && *v < hi + FEASIBILITY_TOL {
            *v = hi;
        }
    }
    let residual = max_residual(lp, &x);
    (x, residual)
}

/// How an original variable maps to standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + sign * col
    Shifted { col: usize, offset: f64, sign: f64 },
    /// x = col_pos - col_neg
    Free { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Le,
    Ge,
    Eq,
}

/// `min c.y  s.t.  rows,  0 <= y <= upper`.
struct StandardForm {
    ncols: usize,
    cost: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, RowKind, f64)>,
    map: Vec<VarMap>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let mut ncols = 0;
        let mut map = Vec::with_capacity(lp.n);
        let mut upper = Vec::with_capacity(lp.n);
        for &(lo, hi) in &lp.bounds {
            let m = if lo.is_finite() {
                upper.push(hi - lo);
                ncols += 1;
                VarMap::Shifted { col: ncols - 1, offset: lo, sign: 1.0 }
            } else if hi.is_finite() {
                upper.push(f64::INFINITY);
                ncols += 1;
                VarMap::Shifted { col: ncols - 1, offset: hi, sign: -1.0 }
            } else {
                upper.extend([f64::INFINITY; 2]);
                ncols += 2;
                VarMap::Free { pos: ncols - 2, neg: ncols - 1 }
            };
            map.push(m);
        }

        let mut cost = vec![0.0; ncols];
        for (j, &c) in lp.objective.iter().enumerate() {
            match map[j] {
                VarMap::Shifted { col, sign, .. } => cost[col] += sign * c,
                VarMap::Free { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        let translate = |row: &Row| {
            let mut rhs = row.rhs;
            let mut coeffs = Vec::with_capacity(row.coeffs.len());
            for &(j, a) in &row.coeffs {
                match map[j] {
                    VarMap::Shifted { col, offset, sign } => {
                        rhs -= a * offset;
                        coeffs.push((col, sign * a));
                    }
                    VarMap::Free { pos, neg } => {
                        coeffs.push((pos, a));
                        coeffs.push((neg, -a));
                    }
                }
            }
            (coeffs, rhs)
        };

        let mut rows = Vec::with_capacity(lp.ineq.len() + lp.eq.len());
        for row in &lp.ineq {
            let (coeffs, rhs) = translate(row);
            rows.push((coeffs, RowKind::Le, rhs));
        }
        for row in &lp.eq {
            let (coeffs, rhs) = translate(row);
            rows.push((coeffs, RowKind::Eq, rhs));
        }
        for (coeffs, kind, rhs) in rows.iter_mut() {
            if *rhs < 0.0 {
                *rhs = -*rhs;
                for (_, a) in coeffs.iter_mut() {
                    *a = -*a;
                }
                if *kind == RowKind::Le {
                    *kind = RowKind::Ge;
                }
            }
        }
        Self {
            ncols,
            cost,
            upper,
            rows,
            map,
        }
    }

    /// `(m, n)` of the tableau built from this form, artificials included.
    fn tableau_shape(&self) -> (usize, usize) {
        let m = self.rows.len();
        let n_slack = self.rows.iter().filter(|r| r.1 != RowKind::Eq).count();
        let n_art = self.rows.iter().filter(|r| r.1 != RowKind::Le).count();
        (m, self.ncols + n_slack + n_art)
    }

    fn recover(&self, cols: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|m| match *m {
                VarMap::Shifted { col, offset, sign } => offset + sign * cols[col],
                VarMap::Free { pos, neg } => cols[pos] - cols[neg],
            })
            .collect()
    }
}

/// Bounded-variable tableau. Nonbasic columns sit at `0` or at `upper`.
struct Tableau {
    m: usize,
    /// Structural + slack columns; artificials follow.
    n_real: usize,
    n: usize,
    /// Row-major `m x n`, the current `B^-1 A`.
    a: Vec<f64>,
    /// Original columns, sparse, for refinement.
    orig: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    /// Phase-2 and phase-1 reduced costs.
    cost2: Vec<f64>,
    cost1: Vec<f64>,
    /// Phase-2 and phase-1 objectives.
    obj2: Vec<f64>,
    obj1: Vec<f64>,
    n_art: usize,
    pivots: usize,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let m = std.rows.len();
        let n_slack = std.rows.iter().filter(|r| r.1 != RowKind::Eq).count();
        let n_art = std.rows.iter().filter(|r| r.1 != RowKind::Le).count();
        let n_real = std.ncols + n_slack;
        let n = n_real + n_art;
        let mut a = vec![0.0; m * n];
        let mut basis = vec![0; m];
        let mut rhs = vec![0.0; m];
        let mut slack = std.ncols;
        let mut art = n_real;
        for (i, (coeffs, kind, b)) in std.rows.iter().enumerate() {
            let row = &mut a[i * n..(i + 1) * n];
            for &(c, v) in coeffs {
                row[c] += v;
            }
            rhs[i] = *b;
            match kind {
                RowKind::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                RowKind::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                RowKind::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let mut orig = vec![Vec::new(); n];
        for i in 0..m {
            for (j, &v) in a[i * n..(i + 1) * n].iter().enumerate() {
                if v != 0.0 {
                    orig[j].push((i, v));
                }
            }
        }
        let mut is_basic = vec![false; n];
        for &b in &basis {
            is_basic[b] = true;
        }
        let mut upper = std.upper.clone();
        upper.resize(n, f64::INFINITY);

        let mut cost2 = vec![0.0; n];
        cost2[..std.ncols].copy_from_slice(&std.cost);
        let mut cost1 = vec![0.0; n];
        for c in cost1.iter_mut().skip(n_real) {
            *c = 1.0;
        }
        let obj2 = cost2.clone();
        let obj1 = cost1.clone();
        for i in 0..m {
            if basis[i] >= n_real {
                for (c, v) in cost1.iter_mut().zip(&a[i * n..(i + 1) * n]) {
                    *c -= v;
                }
            }
        }
        Self {
            m,
            n_real,
            n,
            a,
            orig,
            xb: rhs.clone(),
            rhs,
            basis,
            is_basic,
            at_upper: vec![false; n],
            upper,
            cost2,
            cost1,
            obj2,
            obj1,
            n_art,
            pivots: 0,
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<LpStatus, LpError> {
        if self.n_art > 0 {
            match self.optimize(true, max_pivots)? {
                PhaseResult::Optimal => {}
                PhaseResult::Unbounded => {
                    return Err(LpError::NumericalFailure {
                        residual: f64::INFINITY,
                        pivots: self.pivots,
                    })
                }
            }
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.n_real)
                .map(|i| self.xb[i].max(0.0))
                .sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if infeas > FEASIBILITY_TOL * scale {
                return Ok(LpStatus::Infeasible);
            }
            self.drive_out_artificials();
            for j in self.n_real..self.n {
                self.upper[j] = 0.0;
            }
        }
        match self.optimize(false, max_pivots)? {
            PhaseResult::Optimal => Ok(LpStatus::Optimal),
            PhaseResult::Unbounded => Ok(LpStatus::Unbounded),
        }
    }

    /// `d = c - c_B B^-1 A` from the current tableau, discarding drift in
    /// the incrementally updated rows.
    fn refresh_costs(&mut self) {
        let n = self.n;
        for (cost, obj) in [(&mut self.cost2, &self.obj2), (&mut self.cost1, &self.obj1)] {
            cost.copy_from_slice(obj);
            for i in 0..self.m {
                let cb = obj[self.basis[i]];
                if cb != 0.0 {
                    for (c, v) in cost.iter_mut().zip(&self.a[i * n..(i + 1) * n]) {
                        *c -= cb * v;
                    }
                }
            }
            for &b in &self.basis {
                cost[b] = 0.0;
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn optimize(&mut self, phase1: bool, max_pivots: usize) -> Result<PhaseResult, LpError> {
        let allowed = if phase1 { self.n } else { self.n_real };
        let n = self.n;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        // Columns set aside because every blocking entry was below the pivot
        // tolerance; cleared on the next successful step.
        let mut rejected = vec![false; n];
        let mut any_rejected = false;
        let mut costs_fresh = false;
        let mut last_refresh = self.pivots;
        loop {
            if self.pivots >= last_refresh + COST_REFRESH_PIVOTS {
                self.refresh_costs();
                last_refresh = self.pivots;
            }
            let cost = if phase1 { &self.cost1 } else { &self.cost2 };
            let mut entering = None;
            let mut best = OPTIMALITY_TOL;
            for j in 0..allowed {
                if self.is_basic[j] || self.upper[j] == 0.0 || rejected[j] {
                    continue;
                }
                let viol = if self.at_upper[j] { cost[j] } else { -cost[j] };
                if viol > best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = viol;
                }
            }
            let Some(col) = entering else {
                if !costs_fresh {
                    // Confirm optimality on exact reduced costs.
                    self.refresh_costs();
                    last_refresh = self.pivots;
                    costs_fresh = true;
                    rejected.iter_mut().for_each(|r| *r = false);
                    any_rejected = false;
                    continue;
                }
                return Ok(PhaseResult::Optimal);
            };
            let dir = if self.at_upper[col] { -1.0 } else { 1.0 };
            let col_max = (0..self.m).fold(0.0f64, |m, i| m.max(self.a[i * n + col].abs()));
            let min_pivot = (RELATIVE_PIVOT_TOL * col_max).max(PIVOT_TOL);

            // Exact ratio of row i for a step along `dir`, or None if the
            // basic variable does not block.
            let ratio = |t: &Self, i: usize, slack: f64| -> Option<(f64, f64)> {
                let alpha = dir * t.a[i * n + col];
                if alpha > min_pivot {
                    Some(((t.xb[i] + slack).max(0.0) / alpha, alpha))
                } else if alpha < -min_pivot {
                    let ub = t.upper[t.basis[i]];
                    ub.is_finite()
                        .then(|| ((ub - t.xb[i] + slack).max(0.0) / -alpha, alpha))
                } else {
                    None
                }
            };

            let mut leave: Option<(usize, f64)> = None;
            if bland {
                let mut best_t = f64::INFINITY;
                for i in 0..self.m {
                    if let Some((t, _)) = ratio(self, i, 0.0) {
                        let better = match leave {
                            None => true,
                            Some((r, _)) => {
                                t < best_t - 1e-12 * (1.0 + best_t)
                                    || (t <= best_t + 1e-12 * (1.0 + best_t)
                                        && self.basis[i] < self.basis[r])
                            }
                        };
                        if better {
                            best_t = best_t.min(t);
                            leave = Some((i, t));
                        }
                    }
                }
            } else {
                // Harris: bound the step with relaxed ratios, then take the
                // largest pivot among rows whose exact ratio fits.
                let mut t_max = f64::INFINITY;
                for i in 0..self.m {
                    if let Some((t, _)) = ratio(self, i, HARRIS_TOL) {
                        t_max = t_max.min(t);
                    }
                }
                let mut best_alpha = 0.0;
                for i in 0..self.m {
                    if let Some((t, alpha)) = ratio(self, i, 0.0) {
                        if t <= t_max && alpha.abs() > best_alpha {
                            best_alpha = alpha.abs();
                            leave = Some((i, t));
                        }
                    }
                }
            }

            if self.pivots >= max_pivots {
                return Err(LpError::PivotLimit(max_pivots));
            }
            let u = self.upper[col];
            let step = match leave {
                Some((_, t)) if t < u => t,
                _ if u.is_finite() => {
                    // Bound flip, no basis change.
                    self.pivots += 1;
                    for i in 0..self.m {
                        self.xb[i] -= dir * self.a[i * n + col] * u;
                    }
                    self.at_upper[col] = !self.at_upper[col];
                    degenerate_run = 0;
                    bland = false;
                    costs_fresh = false;
                    if any_rejected {
                        rejected.iter_mut().for_each(|r| *r = false);
                        any_rejected = false;
                    }
                    continue;
                }
                _ => {
                    if !costs_fresh {
                        self.refresh_costs();
                        last_refresh = self.pivots;
                        costs_fresh = true;
                        continue;
                    }
                    let blocked_by_tiny = (0..self.m).any(|i| {
                        let alpha = dir * self.a[i * n + col];
                        alpha > PIVOT_TOL || (alpha < -PIVOT_TOL && self.upper[self.basis[i]].is_finite())
                    });
                    // Phase 1 is bounded below, so an unblocked ray there is
                    // rounding noise as well.
                    if blocked_by_tiny || phase1 {
                        rejected[col] = true;
                        any_rejected = true;
                        continue;
                    }
                    return Ok(PhaseResult::Unbounded);
                }
            };
            let (row, _) = leave.expect("finite step has a leaving row");
            let entering_value = self.nonbasic_value(col) + dir * step;
            for i in 0..self.m {
                self.xb[i] -= dir * self.a[i * n + col] * step;
            }
            let leaving = self.basis[row];
            self.at_upper[leaving] = dir * self.a[row * n + col] < 0.0;
            self.pivot(row, col);
            self.xb[row] = entering_value;
            costs_fresh = false;
            if any_rejected {
                rejected.iter_mut().for_each(|r| *r = false);
                any_rejected = false;
            }

            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND + self.m {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        self.pivots += 1;
        let n = self.n;
        let p = self.a[row * n + col];
        let inv = 1.0 / p;
        {
            let pr = &mut self.a[row * n..(row + 1) * n];
            for v in pr.iter_mut() {
                *v *= inv;
            }
            pr[col] = 1.0;
        }
        let nz: Vec<usize> = (0..n).filter(|&j| self.a[row * n + j] != 0.0).collect();
        let pivot_row: Vec<f64> = nz.iter().map(|&j| self.a[row * n + j]).collect();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.a[i * n + col];
            if f == 0.0 {
                continue;
            }
            let r = &mut self.a[i * n..(i + 1) * n];
            for (&j, &v) in nz.iter().zip(&pivot_row) {
                r[j] -= f * v;
            }
            r[col] = 0.0;
        }
        for cost in [&mut self.cost1, &mut self.cost2] {
            let f = cost[col];
            if f != 0.0 {
                for (&j, &v) in nz.iter().zip(&pivot_row) {
                    cost[j] -= f * v;
                }
                cost[col] = 0.0;
            }
        }
        let leaving = self.basis[row];
        self.is_basic[leaving] = false;
        self.is_basic[col] = true;
        self.at_upper[col] = false;
        self.basis[row] = col;
    }

    /// Pivots basic artificials out on any usable real column. Rows with no
    /// usable column are redundant and keep their artificial.
    fn drive_out_artificials(&mut self) {
        let n = self.n;
        for i in 0..self.m {
            if self.basis[i] < self.n_real {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_real {
                let v = self.a[i * n + j].abs();
                if !self.is_basic[j] && v > PIVOT_TOL && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                // Move x_j so the artificial reaches exactly zero.
                let theta = self.xb[i] / self.a[i * n + j];
                let value = self.nonbasic_value(j) + theta;
                for k in 0..self.m {
                    self.xb[k] -= self.a[k * n + j] * theta;
                }
                self.at_upper[self.basis[i]] = false;
                self.pivot(i, j);
                self.xb[i] = value;
            }
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = (0..self.n).map(|j| self.nonbasic_value(j)).collect();
        for i in 0..self.m {
            vals[self.basis[i]] = self.xb[i];
        }
        vals
    }

    /// Recomputes the basic values from the original rows by an LU solve
    /// with the final basis. None if the basis is numerically singular.
    fn refined_values(&self, std: &StandardForm) -> Option<Vec<f64>> {
        let m = self.m;
        let mut vals: Vec<f64> = (0..self.n).map(|j| self.nonbasic_value(j)).collect();
        for &b in &self.basis {
            vals[b] = 0.0;
        }
        let mut r: Vec<f64> = std.rows.iter().map(|row| row.2).collect();
        for (j, col) in self.orig.iter().enumerate() {
            if vals[j] != 0.0 {
                for &(i, v) in col {
                    r[i] -= v * vals[j];
                }
            }
        }
        let mut bmat = vec![0.0; m * m];
        for (k, &b) in self.basis.iter().enumerate() {
            for &(i, v) in &self.orig[b] {
                bmat[i * m + k] = v;
            }
        }
        let y = lu_solve(&mut bmat, &mut r, m)?;
        for (k, &b) in self.basis.iter().enumerate() {
            vals[b] = y[k];
        }
        Some(vals)
    }
}

/// Solves `M y = r` in place by Gaussian elimination with partial pivoting.
fn lu_solve(mat: &mut [f64], r: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| mat[x * m + c].abs().total_cmp(&mat[y * m + c].abs()))?;
        if mat[p * m + c].abs() < 1e-13 {
            return None;
        }
        if p != c {
            for j in 0..m {
                mat.swap(p * m + j, c * m + j);
            }
            r.swap(p, c);
        }
        let piv = mat[c * m + c];
        let (top, bottom) = mat.split_at_mut((c + 1) * m);
        let prow = &top[c * m..];
        for i in 0..m - c - 1 {
            let row = &mut bottom[i * m..(i + 1) * m];
            let f = row[c] / piv;
            if f != 0.0 {
                for j in c..m {
                    row[j] -= f * prow[j];
                }
                r[c + 1 + i] -= f * r[c];
            }
        }
    }
    let mut y = vec![0.0; m];
    for c in (0..m).rev() {
        let s: f64 = (c + 1..m).map(|j| mat[c * m + j] * y[j]).sum();
        y[c] = (r[c] - s) / mat[c * m + c];
    }
    y.iter().all(|v| v.is_finite()).then_some(y)
}

enum PhaseResult {
    Optimal,
    Unbounded,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_x_nonneg() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(vec![1.0]).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, vec![0.0]);
        assert_eq!(s.objective_value, 0.0);
    }

    #[test]
    fn max_x_capped() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(vec![-1.0]).unwrap();
        lp.add_le(vec![(0, 1.0)], 1.0).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.objective_value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_le(vec![(0, 1.0)], -1.0).unwrap();
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![-1.0, 0.0]).unwrap();
        lp.add_le(vec![(0, 1.0), (1, -1.0)], 1.0).unwrap();
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_negative_bounds() {
        // min x + y, x free with x >= -3 via a row, y in (-inf, 2], x + y >= -5
        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![1.0, 1.0]).unwrap();
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        lp.set_bounds(1, f64::NEG_INFINITY, 2.0).unwrap();
        lp.add_le(vec![(0, -1.0)], 3.0).unwrap();
        lp.add_le(vec![(0, -1.0), (1, -1.0)], 5.0).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 5.0).abs() < 1e-10);
        assert!(check_feasible(&lp, &s.x, 1e-8));
    }

    #[test]
    fn equality_rows() {
        // min 2a + 3b + c  s.t. a + b + c = 1, a - b = 0.2, all >= 0
        let mut lp = LinearProgram::new(3);
        lp.set_objective(vec![2.0, 3.0, 1.0]).unwrap();
        lp.add_eq(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 1.0).unwrap();
        lp.add_eq(vec![(0, 1.0), (1, -1.0)], 0.2).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 0.2).abs() < 1e-12);
        assert!(s.x[1].abs() < 1e-12);
        assert!((s.x[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![1.0, 2.0]).unwrap();
        lp.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0).unwrap();
        lp.add_eq(vec![(0, 2.0), (1, 2.0)], 2.0).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn check_feasible_rejects_violation() {
        let mut lp = LinearProgram::new(1);
        lp.add_le(vec![(0, 1.0)], 1.0).unwrap();
        assert!(check_feasible(&lp, &[1.0], 1e-8));
        assert!(!check_feasible(&lp, &[1.001], 1e-8));
        assert!(!check_feasible(&lp, &[-0.001], 1e-8));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling instance under the largest-coefficient rule.
        let mut lp = LinearProgram::new(4);
        lp.set_objective(vec![-0.75, 150.0, -0.02, 6.0]).unwrap();
        lp.add_le(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], 0.0).unwrap();
        lp.add_le(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], 0.0).unwrap();
        lp.add_le(vec![(2, 1.0)], 1.0).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 0.05).abs() < 1e-10);
    }

    #[test]
    fn dump_mentions_every_row() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![1.0, 0.0]).unwrap();
        lp.add_le(vec![(0, 1.0)], 1.0).unwrap();
        lp.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0).unwrap();
        let d = lp.dump();
        assert!(d.contains("<= 1e0"));
        assert!(d.contains("= 1e0"));
        assert!(d.starts_with("vars 2\nmin +1e0*x0"));
    }
}
