//! Interval ambiguity sets over one-step transition distributions.
//!
//! For a source region `i` the set holds every distribution
//! `p = (p_1, .., p_K, p_u)` with `p_lo <= p <= p_hi` componentwise and
//! `sum(p) = 1`. Rows are stored sparsely: destinations that are not listed
//! have the interval `[0, 0]`. The unsafe sink is always present and is
//! addressed by index `K` in dense vectors.
//!
//! The worst-case expectation over the set is computed by sorting
//! destinations by value and filling upper bounds greedily ("O-maximization"),
//! which is `O(s log s)` in the support size `s`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on `sum(lower) <= 1 <= sum(upper)`.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Float drift absorbed by the pivot coordinate of a vertex.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Largest `K` accepted by the brute-force vertex enumeration.
pub const MAX_ENUMERATE_K: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmbiguityError {
    #[error("ambiguity set is empty (sum lower = {sum_lower}, sum upper = {sum_upper})")]
    EmptySet { sum_lower: f64, sum_upper: f64 },
    #[error("interval for destination {dest} is invalid: [{lower}, {upper}]")]
    InvalidInterval { dest: usize, lower: f64, upper: f64 },
    #[error("destination {dest} out of range for K = {k}")]
    DestinationOutOfRange { dest: usize, k: usize },
    #[error("vertex enumeration limited to K <= {MAX_ENUMERATE_K}, got {0}")]
    TooLarge(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Rank of each destination (regions `0..K`, then the sink with value 1)
/// in the O-maximization order: descending value, ties by ascending index.
pub fn destination_ranks(b: &[f64]) -> Vec<u32> {
    let k = b.len();
    let value = |j: usize| if j == k { 1.0 } else { b[j] };
    let mut idx: Vec<usize> = (0..=k).collect();
    idx.sort_by(|&x, &y| {
        value(y)
            .partial_cmp(&value(x))
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.cmp(&y))
    });
    let mut rank = vec![0; k + 1];
    for (r, j) in idx.into_iter().enumerate() {
        rank[j] = r as u32;
    }
    rank
}

/// The feasible transition simplex of one source region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySet {
    k: usize,
    targets: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    unsafe_lower: f64,
    unsafe_upper: f64,
}

/// A distribution over the support of an [`AmbiguitySet`] plus the sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    k: usize,
    targets: Vec<usize>,
    probs: Vec<f64>,
    unsafe_prob: f64,
}

impl Distribution {
    pub fn k(&self) -> usize {
        self.k
    }

    /// `(destination, probability)` pairs over regions; the sink is separate.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.targets.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn unsafe_prob(&self) -> f64 {
        self.unsafe_prob
    }

    /// Dense vector of length `K + 1`, sink last.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k + 1];
        for (j, p) in self.iter() {
            out[j] = p;
        }
        out[self.k] = self.unsafe_prob;
        out
    }

    /// `sum_j b_j p_j + p_u`.
    pub fn expectation(&self, b: &[f64]) -> f64 {
        self.iter().map(|(j, p)| b[j] * p).sum::<f64>() + self.unsafe_prob
    }

    /// Componentwise equality within `tol` (same support assumed).
    pub fn approx_eq(&self, other: &Distribution, tol: f64) -> bool {
        self.targets == other.targets
            && (self.unsafe_prob - other.unsafe_prob).abs() <= tol
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl AmbiguitySet {
    /// Builds a set from sparse `(destination, lower, upper)` entries and the
    /// sink interval. Entries with `upper == 0` are dropped.
    pub fn from_sparse(
        k: usize,
        mut entries: Vec<(usize, f64, f64)>,
        unsafe_interval: (f64, f64),
    ) -> Result<Self, AmbiguityError> {
        entries.sort_by_key(|e| e.0);
        let mut targets = Vec::with_capacity(entries.len());
        let mut lower = Vec::with_capacity(entries.len());
        let mut upper = Vec::with_capacity(entries.len());
        for (j, lo, hi) in entries {
            if j >= k {
                return Err(AmbiguityError::DestinationOutOfRange { dest: j, k });
            }
            check_interval(j, lo, hi)?;
            if targets.last() == Some(&j) {
                return Err(AmbiguityError::InvalidInterval {
                    dest: j,
                    lower: lo,
                    upper: hi,
                });
            }
            if hi > 0.0 {
                targets.push(j);
                lower.push(lo);
                upper.push(hi);
            }
        }
        let (ul, uh) = unsafe_interval;
        check_interval(k, ul, uh)?;
        let set = Self {
            k,
            targets,
            lower,
            upper,
            unsafe_lower: ul,
            unsafe_upper: uh,
        };
        set.check_nonempty()?;
        Ok(set)
    }

    /// Builds a set from dense bounds of length `K + 1`, sink last.
    pub fn from_dense(lower: &[f64], upper: &[f64]) -> Result<Self, AmbiguityError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(AmbiguityError::LengthMismatch {
                expected: lower.len().max(1),
                got: upper.len(),
            });
        }
        let k = lower.len() - 1;
        let entries = (0..k).map(|j| (j, lower[j], upper[j])).collect();
        Self::from_sparse(k, entries, (lower[k], upper[k]))
    }

    fn check_nonempty(&self) -> Result<(), AmbiguityError> {
        let (sl, su) = (self.sum_lower(), self.sum_upper());
        if sl > 1.0 + FEASIBILITY_TOL || su < 1.0 - FEASIBILITY_TOL {
            return Err(AmbiguityError::EmptySet {
                sum_lower: sl,
                sum_upper: su,
            });
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support_len(&self) -> usize {
        self.targets.len()
    }

    /// `(destination, lower, upper)` over listed region destinations.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.targets
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&j, (&l, &u))| (j, l, u))
    }

    pub fn unsafe_interval(&self) -> (f64, f64) {
        (self.unsafe_lower, self.unsafe_upper)
    }

    /// Interval of destination `j` (`j == K` is the sink).
    pub fn interval(&self, j: usize) -> (f64, f64) {
        if j == self.k {
            return self.unsafe_interval();
        }
        match self.targets.binary_search(&j) {
            Ok(pos) => (self.lower[pos], self.upper[pos]),
            Err(_) => (0.0, 0.0),
        }
    }

    pub fn sum_lower(&self) -> f64 {
        self.lower.iter().sum::<f64>() + self.unsafe_lower
    }

    pub fn sum_upper(&self) -> f64 {
        self.upper.iter().sum::<f64>() + self.unsafe_upper
    }

    pub fn dense_lower(&self) -> Vec<f64> {
        (0..=self.k).map(|j| self.interval(j).0).collect()
    }

    pub fn dense_upper(&self) -> Vec<f64> {
        (0..=self.k).map(|j| self.interval(j).1).collect()
    }

    /// Worst-case expectation `max_{p in P} values . p` for a dense value
    /// vector of length `K + 1` (sink last), with its maximizing vertex.
    pub fn worst_case_value(&self, values: &[f64]) -> Result<(f64, Distribution), AmbiguityError> {
        if values.len() != self.k + 1 {
            return Err(AmbiguityError::LengthMismatch {
                expected: self.k + 1,
                got: values.len(),
            });
        }
        Ok(self.o_maximize(|j| values[j]))
    }

    /// Worst-case expectation of the barrier `(b, 1)`.
    pub fn worst_case_barrier(&self, b: &[f64]) -> (f64, Distribution) {
        debug_assert_eq!(b.len(), self.k);
        self.o_maximize(|j| if j == self.k { 1.0 } else { b[j] })
    }

    /// Martingale gap `max(0, max_p sum_j b_j p_j + p_u - b_i)` of region `i`
    /// together with the maximizing distribution and the unclamped gap.
    pub fn martingale_gap(&self, b: &[f64], i: usize) -> Gap {
        let (value, dist) = self.worst_case_barrier(b);
        let raw = value - b[i];
        Gap {
            beta: raw.max(0.0),
            raw,
            argmax: dist,
        }
    }

    /// Greedy fill in the order given by `value_of` (descending, ties by index).
    fn o_maximize(&self, value_of: impl Fn(usize) -> f64) -> (f64, Distribution) {
        let s = self.targets.len();
        // Positions 0..s are listed destinations, position s is the sink.
        let dest = |pos: usize| if pos == s { self.k } else { self.targets[pos] };
        let mut order: Vec<(f64, usize)> = (0..=s).map(|pos| (value_of(dest(pos)), pos)).collect();
        order.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| dest(a.1).cmp(&dest(b.1)))
        });
        self.fill(order.iter().map(|&(v, pos)| (pos, v)), value_of)
    }

    /// Index-order fill starting from the lower bounds; a deterministic
    /// feasible point of the set.
    pub fn index_order_point(&self) -> Distribution {
        let s = self.targets.len();
        // Listed destinations are sorted by index and the sink (index K) is last.
        self.fill((0..=s).map(|pos| (pos, 0.0)), |_| 0.0).1
    }

    fn fill(
        &self,
        order: impl Iterator<Item = (usize, f64)>,
        value_of: impl Fn(usize) -> f64,
    ) -> (f64, Distribution) {
        let mut probs = vec![0.0; self.targets.len() + 1];
        let value = self.fill_into(order.map(|(pos, _)| pos), value_of, &mut probs);
        let unsafe_prob = probs.pop().unwrap_or(0.0);
        (
            value,
            Distribution {
                k: self.k,
                targets: self.targets.clone(),
                probs,
                unsafe_prob,
            },
        )
    }

    /// Greedy fill over positions (`0..s` listed, `s` the sink) into `probs`;
    /// returns the expectation of `value_of`.
    fn fill_into(
        &self,
        order: impl Iterator<Item = usize>,
        value_of: impl Fn(usize) -> f64,
        probs: &mut [f64],
    ) -> f64 {
        let s = self.targets.len();
        let lo = |pos: usize| if pos == s { self.unsafe_lower } else { self.lower[pos] };
        let hi = |pos: usize| if pos == s { self.unsafe_upper } else { self.upper[pos] };
        for (pos, p) in probs.iter_mut().enumerate() {
            *p = lo(pos);
        }
        let mut budget = 1.0 - self.sum_lower();
        let mut pivot = None;
        let mut last = s;
        for pos in order {
            last = pos;
            let room = hi(pos) - lo(pos);
            if room >= budget {
                pivot = Some(pos);
                break;
            }
            probs[pos] = hi(pos);
            budget -= room;
        }
        let r = pivot.unwrap_or(last);
        let others: f64 = probs
            .iter()
            .enumerate()
            .filter(|&(pos, _)| pos != r)
            .map(|(_, p)| p)
            .sum();
        let mut pr = 1.0 - others;
        // Clip float drift; larger excursions cannot occur for a non-empty set
        // beyond FEASIBILITY_TOL.
        if pr < lo(r) && pr >= lo(r) - RESIDUAL_TOL {
            pr = lo(r);
        } else if pr > hi(r) && pr <= hi(r) + RESIDUAL_TOL {
            pr = hi(r);
        }
        probs[r] = pr;

        let dest = |pos: usize| if pos == s { self.k } else { self.targets[pos] };
        probs
            .iter()
            .enumerate()
            .map(|(pos, p)| value_of(dest(pos)) * p)
            .sum()
    }

    /// [`worst_case_barrier`](Self::worst_case_barrier) without allocation.
    ///
    /// `rank` comes from [`destination_ranks`] for the same `b`; `probs`
    /// receives the maximizer over listed destinations with the sink last
    /// and must have length `support_len() + 1`. Bitwise identical to the
    /// allocating version.
    pub fn worst_case_ranked(
        &self,
        b: &[f64],
        rank: &[u32],
        order: &mut Vec<(u32, u32)>,
        probs: &mut [f64],
    ) -> f64 {
        let s = self.targets.len();
        order.clear();
        order.extend(self.targets.iter().enumerate().map(|(pos, &j)| (rank[j], pos as u32)));
        order.push((rank[self.k], s as u32));
        order.sort_unstable();
        self.fill_into(
            order.iter().map(|&(_, pos)| pos as usize),
            |j| if j == self.k { 1.0 } else { b[j] },
            probs,
        )
    }

    /// Membership of a dense distribution within `tol`.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.k + 1
            && ((p.iter().sum::<f64>()) - 1.0).abs() <= tol
            && p.iter().enumerate().all(|(j, &v)| {
                let (l, u) = self.interval(j);
                v >= l - tol && v <= u + tol
            })
    }

    /// Half-space form `H p <= h` over `K + 1` variables: upper bounds,
    /// negated lower bounds, then `sum <= 1` and `-sum <= -1`.
    pub fn to_hpolytope(&self) -> HPolytope {
        let n = self.k + 1;
        let lower = self.dense_lower();
        let upper = self.dense_upper();
        let mut rows = Vec::with_capacity(2 * n + 2);
        let mut rhs = Vec::with_capacity(2 * n + 2);
        for j in 0..n {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            rows.push(r);
            rhs.push(upper[j]);
        }
        for j in 0..n {
            let mut r = vec![0.0; n];
            r[j] = -1.0;
            rows.push(r);
            rhs.push(-lower[j]);
        }
        rows.push(vec![1.0; n]);
        rhs.push(1.0);
        rows.push(vec![-1.0; n]);
        rhs.push(-1.0);
        HPolytope { rows, rhs }
    }

    /// All vertices of the set, by brute force over pivot choices and
    /// lower/upper assignments of the remaining coordinates.
    pub fn vertex_enumerate(&self) -> Result<Vec<Vec<f64>>, AmbiguityError> {
        if self.k > MAX_ENUMERATE_K {
            return Err(AmbiguityError::TooLarge(self.k));
        }
        let n = self.k + 1;
        let lower = self.dense_lower();
        let upper = self.dense_upper();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for r in 0..n {
            for mask in 0u32..(1 << (n - 1)) {
                let mut p = vec![0.0; n];
                let mut bit = 0;
                for j in (0..n).filter(|&j| j != r) {
                    p[j] = if mask >> bit & 1 == 1 { upper[j] } else { lower[j] };
                    bit += 1;
                }
                let others: f64 = p.iter().sum();
                let pr = 1.0 - others;
                if pr < lower[r] - RESIDUAL_TOL || pr > upper[r] + RESIDUAL_TOL {
                    continue;
                }
                p[r] = pr.clamp(lower[r], upper[r]);
                if !out
                    .iter()
                    .any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-12))
                {
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}

/// Martingale gap of one region.
#[derive(Debug, Clone)]
pub struct Gap {
    /// Clamped gap `beta_i >= 0`.
    pub beta: f64,
    /// Unclamped `max_p E[B] - b_i`.
    pub raw: f64,
    /// Worst-case distribution (the counterexample when `raw > 0`).
    pub argmax: Distribution,
}

/// `{p : H p <= h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl HPolytope {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.rows.iter().zip(&self.rhs).all(|(r, &h)| {
            r.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() <= h + tol
        })
    }
}

fn check_interval(dest: usize, lower: f64, upper: f64) -> Result<(), AmbiguityError> {
    if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower > upper {
        return Err(AmbiguityError::InvalidInterval { dest, lower, upper });
    }
    Ok(())
}
