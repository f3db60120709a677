//! Interval bounds on one-step transition probabilities.
//!
//! For additive diagonal Gaussian noise the kernel factorizes per dimension:
//! `T(X_j | x) = prod_d g_d(m_d)` with `m = f(x)` and
//! `g_d(m) = Phi((hi_d - m)/s_d) - Phi((lo_d - m)/s_d)`. Each factor is unimodal
//! in `m` with its peak at the target midpoint, so over a mean-image interval
//! `[ml, mh]` its maximum sits at the clamped midpoint and its minimum at one of
//! the endpoints. Products of per-dimension extremes give `p_hi` and `p_lo`.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

use crate::ambiguity::{AmbiguityError, AmbiguitySet};
use crate::geometry::{Partition, Rect};

/// Upper bounds below this are stored as the interval `[0, 0]`.
pub const SPARSITY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("row {0} has an empty ambiguity set")]
    InfeasibleRow(usize),
    #[error("invariant violated in row {row}: {reason}")]
    InvariantViolation { row: usize, reason: String },
    #[error("no image box supplied for region {0}")]
    MissingImage(usize),
    #[error("model dimension {model} does not match partition dimension {partition}")]
    DimensionMismatch { model: usize, partition: usize },
    #[error("noise standard deviation must be positive (dimension {0})")]
    NonPositiveSigma(usize),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(a <= Z <= b)` for a standard normal `Z`, evaluated on the tail that
/// avoids cancellation.
pub fn std_normal_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let upper_tail = |x: f64| 0.5 * erfc(x / std::f64::consts::SQRT_2);
    let p = if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    };
    p.clamp(0.0, 1.0)
}

/// Probability that `N(mean, diag(sigma^2))` lands in `target`.
pub fn gaussian_box_prob(mean: &[f64], sigma: &[f64], target: &Rect) -> f64 {
    (0..target.dim())
        .map(|d| factor(mean[d], target.lo()[d], target.hi()[d], sigma[d]))
        .product()
}

/// One-dimensional factor `g(m) = P(lo <= m + s Z <= hi)`.
pub fn factor(m: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
    std_normal_mass((lo - m) / sigma, (hi - m) / sigma)
}

/// `(min, max)` of `g` over means in `[ml, mh]`.
pub fn factor_range(ml: f64, mh: f64, lo: f64, hi: f64, sigma: f64) -> (f64, f64) {
    let peak = (0.5 * (lo + hi)).clamp(ml, mh);
    let max = factor(peak, lo, hi, sigma);
    let min = factor(ml, lo, hi, sigma).min(factor(mh, lo, hi, sigma));
    (min, max)
}

/// `x' = A x + c + v`, `v ~ N(0, diag(sigma^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    /// Row-major `n x n`.
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl AffineModel {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        let n = self.dim();
        if self.a.len() != n || self.a.iter().any(|r| r.len() != n) || self.sigma.len() != n {
            return Err(BoundsError::DimensionMismatch {
                model: n,
                partition: self.a.len(),
            });
        }
        check_sigma(&self.sigma)
    }

    pub fn mean(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.c)
            .map(|(row, c)| c + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    /// Box enclosing `{A x + c : x in region}` by interval arithmetic.
    pub fn mean_image(&self, region: &Rect) -> Rect {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (row, c) in self.a.iter().zip(&self.c) {
            let (mut l, mut h) = (*c, *c);
            for (d, &a) in row.iter().enumerate() {
                let (p, q) = (a * region.lo()[d], a * region.hi()[d]);
                l += p.min(q);
                h += p.max(q);
            }
            lo.push(l);
            hi.push(h);
        }
        Rect::new_closed(lo, hi).expect("interval image is well formed")
    }
}

/// User-supplied mean-image boxes, one per decision region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMapModel {
    pub images: Vec<Rect>,
    pub sigma: Vec<f64>,
}

fn check_sigma(sigma: &[f64]) -> Result<(), BoundsError> {
    match sigma.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        Some(d) => Err(BoundsError::NonPositiveSigma(d)),
        None => Ok(()),
    }
}

/// Per-source-region ambiguity rows over the `K` decision regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionBounds {
    k: usize,
    rows: Vec<AmbiguitySet>,
}

impl TransitionBounds {
    pub fn new(rows: Vec<AmbiguitySet>) -> Result<Self, BoundsError> {
        let k = rows.len();
        if let Some(i) = rows.iter().position(|r| r.k() != k) {
            return Err(BoundsError::InvariantViolation {
                row: i,
                reason: format!("row addresses {} regions, expected {k}", rows[i].k()),
            });
        }
        Ok(Self { k, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &AmbiguitySet {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[AmbiguitySet] {
        &self.rows
    }

    /// Total number of stored region entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.support_len()).sum()
    }

    /// Writes `i,j,lower,upper` with 1-based region indices and `u` for the
    /// sink. Every row carries its sink entry so `K` is recoverable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,lower,upper\n");
        for (i, row) in self.rows.iter().enumerate() {
            for (j, l, u) in row.entries() {
                let _ = writeln!(out, "{},{},{:.16e},{:.16e}", i + 1, j + 1, l, u);
            }
            let (l, u) = row.unsafe_interval();
            let _ = writeln!(out, "{},u,{:.16e},{:.16e}", i + 1, l, u);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, BoundsError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "i,j,lower,upper" => {}
            _ => {
                return Err(BoundsError::Parse {
                    line: 1,
                    reason: "expected header `i,j,lower,upper`".into(),
                })
            }
        }
        let mut entries = Vec::new();
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let perr = |reason: &str| BoundsError::Parse {
                line: n + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(perr("expected 4 fields"));
            }
            let i: usize = fields[0].parse().map_err(|_| perr("bad row index"))?;
            let j = if fields[1] == "u" {
                Dest::Sink
            } else {
                Dest::Region(fields[1].parse().map_err(|_| perr("bad column index"))?)
            };
            let lower: f64 = fields[2].parse().map_err(|_| perr("bad lower"))?;
            let upper: f64 = fields[3].parse().map_err(|_| perr("bad upper"))?;
            entries.push(RawEntry { i, j, lower, upper });
        }
        let k = entries.iter().map(|e| e.i).max().unwrap_or(0);
        Self::from_entries(k, entries)
    }

    pub fn to_json(&self) -> String {
        let mut entries = Vec::with_capacity(self.nnz() + self.k);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, lower, upper) in row.entries() {
                entries.push(RawEntry {
                    i: i + 1,
                    j: Dest::Region(j + 1),
                    lower,
                    upper,
                });
            }
            let (lower, upper) = row.unsafe_interval();
            entries.push(RawEntry {
                i: i + 1,
                j: Dest::Sink,
                lower,
                upper,
            });
        }
        serde_json::to_string(&JsonBounds { k: self.k, entries }).expect("bounds serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, BoundsError> {
        let raw: JsonBounds = serde_json::from_str(text)?;
        Self::from_entries(raw.k, raw.entries)
    }

    fn from_entries(k: usize, entries: Vec<RawEntry>) -> Result<Self, BoundsError> {
        let mut per_row: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); k];
        let mut sink: Vec<Option<(f64, f64)>> = vec![None; k];
        for e in entries {
            if e.i == 0 || e.i > k {
                return Err(BoundsError::InvariantViolation {
                    row: e.i,
                    reason: format!("row index outside 1..={k}"),
                });
            }
            if !(e.lower >= 0.0 && e.lower <= e.upper && e.upper <= 1.0) {
                return Err(BoundsError::InvariantViolation {
                    row: e.i,
                    reason: format!("interval [{}, {}] is not ordered within [0, 1]", e.lower, e.upper),
                });
            }
            match e.j {
                Dest::Sink => {
                    if sink[e.i - 1].replace((e.lower, e.upper)).is_some() {
                        return Err(BoundsError::InvariantViolation {
                            row: e.i,
                            reason: "duplicate sink entry".into(),
                        });
                    }
                }
                Dest::Region(j) if j >= 1 && j <= k => {
                    per_row[e.i - 1].push((j - 1, e.lower, e.upper))
                }
                Dest::Region(j) => {
                    return Err(BoundsError::InvariantViolation {
                        row: e.i,
                        reason: format!("column index {j} outside 1..={k}"),
                    })
                }
            }
        }
        let rows = per_row
            .into_iter()
            .zip(sink)
            .enumerate()
            .map(|(i, (row, s))| {
                AmbiguitySet::from_sparse(k, row, s.unwrap_or((0.0, 0.0)))
                    .map_err(|e| row_error(i + 1, e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn write(&self, path: &Path) -> Result<(), BoundsError> {
        let text = if is_json(path) { self.to_json() } else { self.to_csv() };
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, BoundsError> {
        let text = std::fs::read_to_string(path)?;
        if is_json(path) {
            Self::from_json(&text)
        } else {
            Self::from_csv(&text)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn row_error(row: usize, e: AmbiguityError) -> BoundsError {
    match e {
        AmbiguityError::EmptySet { .. } => BoundsError::InfeasibleRow(row),
        other => BoundsError::InvariantViolation {
            row,
            reason: other.to_string(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dest {
    Region(usize),
    Sink,
}

impl Serialize for Dest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Dest::Region(j) => s.serialize_u64(*j as u64),
            Dest::Sink => s.serialize_str("u"),
        }
    }
}

impl<'de> Deserialize<'de> for Dest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "u" => Ok(Dest::Sink),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|j| Dest::Region(j as usize))
                .ok_or_else(|| D::Error::custom("column index must be a positive integer")),
            other => Err(D::Error::custom(format!("expected index or \"u\", got {other}"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawEntry {
    i: usize,
    j: Dest,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonBounds {
    #[serde(rename = "K")]
    k: usize,
    entries: Vec<RawEntry>,
}

/// Bounds for an affine Gaussian system over a grid partition.
pub fn affine_bounds(model: &AffineModel, partition: &Partition) -> Result<TransitionBounds, BoundsError> {
    model.validate()?;
    if model.dim() != partition.dim() {
        return Err(BoundsError::DimensionMismatch {
            model: model.dim(),
            partition: partition.dim(),
        });
    }
    bounds_from_images(
        |k| Ok(model.mean_image(partition.decision_region(k))),
        &model.sigma,
        partition,
    )
}

/// Bounds from supplied mean-image boxes.
pub fn interval_map_bounds(
    model: &IntervalMapModel,
    partition: &Partition,
) -> Result<TransitionBounds, BoundsError> {
    check_sigma(&model.sigma)?;
    if model.sigma.len() != partition.dim() {
        return Err(BoundsError::DimensionMismatch {
            model: model.sigma.len(),
            partition: partition.dim(),
        });
    }
    bounds_from_images(
        |k| {
            let img = model.images.get(k).ok_or(BoundsError::MissingImage(k))?;
            if img.dim() != partition.dim() {
                return Err(BoundsError::DimensionMismatch {
                    model: img.dim(),
                    partition: partition.dim(),
                });
            }
            Ok(img.clone())
        },
        &model.sigma,
        partition,
    )
}

/// Shared row builder: `image(k)` is the mean-image box of decision region `k`.
pub fn bounds_from_images<F>(
    image: F,
    sigma: &[f64],
    partition: &Partition,
) -> Result<TransitionBounds, BoundsError>
where
    F: Fn(usize) -> Result<Rect, BoundsError> + Sync,
{
    let k = partition.num_decision();
    let rows = (0..k)
        .into_par_iter()
        .map(|i| {
            let img = image(i)?;
            bounds_row(i, &img, sigma, partition)
        })
        .collect::<Result<Vec<_>, _>>()?;
    TransitionBounds::new(rows)
}

fn bounds_row(
    i: usize,
    img: &Rect,
    sigma: &[f64],
    partition: &Partition,
) -> Result<AmbiguitySet, BoundsError> {
    let dim = partition.dim();
    let counts = partition.counts();
    // Per-dimension (min, max) factor for every slab.
    let slab_factors: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|d| {
            (0..counts[d])
                .map(|s| {
                    let (lo, hi) = partition.slab(d, s);
                    factor_range(img.lo()[d], img.hi()[d], lo, hi, sigma[d])
                })
                .collect()
        })
        .collect();
    // Suffix products of per-dimension maxima, for pruning.
    let mut tail_max = vec![1.0; dim + 1];
    for d in (0..dim).rev() {
        let m = slab_factors[d].iter().fold(0.0f64, |a, f| a.max(f.1));
        tail_max[d] = tail_max[d + 1] * m;
    }

    let mut entries = Vec::new();
    let mut slabs = vec![0usize; dim];
    enumerate_cells(
        0,
        1.0,
        1.0,
        &slab_factors,
        &tail_max,
        &mut slabs,
        &mut |slabs, lo, hi| {
            let cell = partition.cell_index(slabs);
            if let Some(j) = partition.decision_of_cell(cell) {
                entries.push((j, lo.min(hi), hi));
            }
        },
    );

    let mut obstacle_lo = 0.0;
    let mut obstacle_hi = 0.0;
    for &cell in partition.unsafe_indices() {
        let s = partition.cell_slabs(cell);
        let (mut lo, mut hi) = (1.0, 1.0);
        for d in 0..dim {
            lo *= slab_factors[d][s[d]].0;
            hi *= slab_factors[d][s[d]].1;
        }
        obstacle_lo += lo;
        obstacle_hi += hi;
    }
    let domain = partition.domain();
    let (mut stay_lo, mut stay_hi) = (1.0, 1.0);
    for d in 0..dim {
        let (l, h) = factor_range(img.lo()[d], img.hi()[d], domain.lo()[d], domain.hi()[d], sigma[d]);
        stay_lo *= l;
        stay_hi *= h;
    }
    let unsafe_hi = (1.0 - stay_lo + obstacle_hi).clamp(0.0, 1.0);
    let unsafe_lo = (1.0 - stay_hi + obstacle_lo).clamp(0.0, unsafe_hi);

    AmbiguitySet::from_sparse(partition.num_decision(), entries, (unsafe_lo, unsafe_hi))
        .map_err(|e| row_error(i + 1, e))
}

fn enumerate_cells(
    d: usize,
    lo: f64,
    hi: f64,
    factors: &[Vec<(f64, f64)>],
    tail_max: &[f64],
    slabs: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize], f64, f64),
) {
    if d == factors.len() {
        if hi >= SPARSITY_THRESHOLD {
            visit(slabs, lo, hi);
        }
        return;
    }
    for (s, &(fl, fh)) in factors[d].iter().enumerate() {
        if hi * fh * tail_max[d + 1] < SPARSITY_THRESHOLD {
            continue;
        }
        slabs[d] = s;
        enumerate_cells(d + 1, lo * fl, hi * fh, factors, tail_max, slabs, visit);
    }
}
