//! Axis-aligned boxes and uniform grid partitions of the safe set.
//!
//! A [`Partition`] tiles the safe-set bounding box with `∏ counts` cells in
//! row-major order (first dimension slowest). Cells that overlap an obstacle
//! with positive volume are tagged unsafe; their barrier value is pinned to 1
//! and they are excluded from the decision vector. The remaining cells are the
//! *decision regions*, numbered `0..K` in cell order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box bounds have mismatched lengths ({lo} vs {hi})")]
    LengthMismatch { lo: usize, hi: usize },
    #[error("box must have strictly positive extent in every dimension (dimension {0})")]
    EmptyBox(usize),
    #[error("box must have at least one dimension")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid count for dimension {0} is zero")]
    ZeroCount(usize),
    #[error("initial set is not contained in the domain")]
    InitialOutsideDomain,
    #[error("initial set touches obstacle {0}")]
    InitialIntersectsObstacle(usize),
}

/// A closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct Rect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawBox> for Rect {
    type Error = GeometryError;
    fn try_from(raw: RawBox) -> Result<Self, Self::Error> {
        Rect::new(raw.lo, raw.hi)
    }
}

impl From<Rect> for RawBox {
    fn from(b: Rect) -> Self {
        RawBox { lo: b.lo, hi: b.hi }
    }
}

impl Rect {
    /// Creates a box with strictly positive volume.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        let b = Self::new_closed(lo, hi)?;
        if let Some(d) = (0..b.dim()).find(|&d| b.lo[d] >= b.hi[d]) {
            return Err(GeometryError::EmptyBox(d));
        }
        Ok(b)
    }

    /// Creates a box that may be degenerate (`lo[d] == hi[d]`), e.g. a point
    /// initial set.
    pub fn new_closed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::LengthMismatch {
                lo: lo.len(),
                hi: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if let Some(d) = (0..lo.len()).find(|&d| !(lo[d] <= hi[d])) {
            return Err(GeometryError::EmptyBox(d));
        }
        Ok(Self { lo, hi })
    }

    /// Rect `{x : |x_d - c_d| <= eps_d}`.
    pub fn centered(center: &[f64], half_width: &[f64]) -> Result<Self, GeometryError> {
        if center.len() != half_width.len() {
            return Err(GeometryError::LengthMismatch {
                lo: center.len(),
                hi: half_width.len(),
            });
        }
        Self::new_closed(
            center.iter().zip(half_width).map(|(c, e)| c - e).collect(),
            center.iter().zip(half_width).map(|(c, e)| c + e).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn contains_box(&self, other: &Rect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|d| self.lo[d] <= other.lo[d] && other.hi[d] <= self.hi[d])
    }

    /// Closed-set intersection test (touching faces count).
    pub fn intersects(&self, other: &Rect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|d| self.lo[d] <= other.hi[d] && other.lo[d] <= self.hi[d])
    }

    /// Intersection with strictly positive volume.
    pub fn overlaps(&self, other: &Rect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|d| self.lo[d] < other.hi[d] && other.lo[d] < self.hi[d])
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Rect) -> Rect {
        Rect {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }
}

/// Result of locating a point in a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// Cell index (not decision index).
    Region(usize),
    Unsafe,
}

/// Uniform grid partition of the safe-set bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    domain: Rect,
    counts: Vec<usize>,
    regions: Vec<Rect>,
    initial_indices: BTreeSet<usize>,
    unsafe_indices: BTreeSet<usize>,
    /// Cell index of each decision region.
    decision: Vec<usize>,
    obstacles: Vec<Rect>,
}

impl Partition {
    /// Builds the row-major grid and tags initial and obstacle cells.
    pub fn make_grid(
        domain: Rect,
        counts: &[usize],
        initial: &Rect,
        obstacles: &[Rect],
    ) -> Result<Self, GeometryError> {
        let dim = domain.dim();
        if counts.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: counts.len(),
            });
        }
        if let Some(d) = counts.iter().position(|&c| c == 0) {
            return Err(GeometryError::ZeroCount(d));
        }
        if initial.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: initial.dim(),
            });
        }
        if let Some(o) = obstacles.iter().find(|o| o.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: o.dim(),
            });
        }
        if !domain.contains_box(initial) {
            return Err(GeometryError::InitialOutsideDomain);
        }
        if let Some(m) = obstacles.iter().position(|o| o.intersects(initial)) {
            return Err(GeometryError::InitialIntersectsObstacle(m));
        }

        let total: usize = counts.iter().product();
        let mut regions = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let lo = (0..dim)
                .map(|d| grid_coord(&domain, counts, d, idx[d]))
                .collect();
            let hi = (0..dim)
                .map(|d| grid_coord(&domain, counts, d, idx[d] + 1))
                .collect();
            regions.push(Rect { lo, hi });
            // Row-major increment: last dimension fastest.
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < counts[d] {
                    break;
                }
                idx[d] = 0;
            }
        }

        let initial_indices: BTreeSet<usize> = regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.intersects(initial))
            .map(|(i, _)| i)
            .collect();
        let unsafe_indices: BTreeSet<usize> = regions
            .iter()
            .enumerate()
            .filter(|(_, r)| obstacles.iter().any(|o| r.overlaps(o)))
            .map(|(i, _)| i)
            .collect();
        if let Some(&i) = initial_indices.intersection(&unsafe_indices).next() {
            let m = obstacles
                .iter()
                .position(|o| regions[i].overlaps(o))
                .unwrap_or(0);
            return Err(GeometryError::InitialIntersectsObstacle(m));
        }
        let decision = (0..total).filter(|i| !unsafe_indices.contains(i)).collect();

        Ok(Self {
            domain,
            counts: counts.to_vec(),
            regions,
            initial_indices,
            unsafe_indices,
            decision,
            obstacles: obstacles.to_vec(),
        })
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// All grid cells, including unsafe-tagged ones.
    pub fn regions(&self) -> &[Rect] {
        &self.regions
    }

    pub fn obstacles(&self) -> &[Rect] {
        &self.obstacles
    }

    /// Cell indices whose closed box meets the initial set.
    pub fn initial_indices(&self) -> &BTreeSet<usize> {
        &self.initial_indices
    }

    /// Cell indices overlapping an obstacle.
    pub fn unsafe_indices(&self) -> &BTreeSet<usize> {
        &self.unsafe_indices
    }

    /// Number of decision regions `K`.
    pub fn num_decision(&self) -> usize {
        self.decision.len()
    }

    /// Cell index of decision region `k`.
    pub fn decision_cell(&self, k: usize) -> usize {
        self.decision[k]
    }

    pub fn decision_cells(&self) -> &[usize] {
        &self.decision
    }

    /// Decision index of a cell, `None` for unsafe-tagged cells.
    pub fn decision_of_cell(&self, cell: usize) -> Option<usize> {
        self.decision.binary_search(&cell).ok()
    }

    /// Decision indices of the regions meeting the initial set.
    pub fn initial_decision_indices(&self) -> Vec<usize> {
        self.initial_indices
            .iter()
            .filter_map(|&c| self.decision_of_cell(c))
            .collect()
    }

    /// Cell box of decision region `k`.
    pub fn decision_region(&self, k: usize) -> &Rect {
        &self.regions[self.decision[k]]
    }

    /// Lower/upper edge of grid slab `s` along dimension `d`.
    pub fn slab(&self, d: usize, s: usize) -> (f64, f64) {
        (
            grid_coord(&self.domain, &self.counts, d, s),
            grid_coord(&self.domain, &self.counts, d, s + 1),
        )
    }

    /// Row-major cell index from per-dimension slab indices.
    pub fn cell_index(&self, slabs: &[usize]) -> usize {
        slabs
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (s, n)| acc * n + s)
    }

    /// Per-dimension slab indices of a cell.
    pub fn cell_slabs(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            out[d] = cell % self.counts[d];
            cell /= self.counts[d];
        }
        out
    }

    /// Locates `x`: the lowest-index cell whose closed box contains it, or
    /// `Unsafe` when `x` is outside the domain or that cell is unsafe-tagged.
    pub fn region_of(&self, x: &[f64]) -> Location {
        if !self.domain.contains(x) {
            return Location::Unsafe;
        }
        let mut slabs = Vec::with_capacity(self.dim());
        for (d, &v) in x.iter().enumerate() {
            let n = self.counts[d];
            let w = self.domain.width(d) / n as f64;
            let mut s = (((v - self.domain.lo[d]) / w).floor().max(0.0) as usize).min(n - 1);
            // Guard floating error in the division: move to the neighbour that
            // actually contains v, preferring the lower index on shared faces.
            while s > 0 && v <= grid_coord(&self.domain, &self.counts, d, s) {
                s -= 1;
            }
            while s + 1 < n && v > grid_coord(&self.domain, &self.counts, d, s + 1) {
                s += 1;
            }
            slabs.push(s);
        }
        let cell = self.cell_index(&slabs);
        if self.unsafe_indices.contains(&cell) {
            Location::Unsafe
        } else {
            Location::Region(cell)
        }
    }
}

fn grid_coord(domain: &Rect, counts: &[usize], d: usize, s: usize) -> f64 {
    if s == counts[d] {
        domain.hi[d]
    } else {
        domain.lo[d] + domain.width(d) * s as f64 / counts[d] as f64
    }
}
