//! Fixtures shared by the criterion benches.

use std::path::Path;

use pwc_sbf::{benchmarks, ProblemSpec, TransitionBounds};

/// Built-in spec with its grid replaced.
pub fn spec_with_grid(name: &str, grid: &[usize]) -> ProblemSpec {
    let mut s = benchmarks::by_name(name).expect("known benchmark");
    s.grid = grid.to_vec();
    s
}

/// Transition bounds and initial decision indices for a spec.
pub fn bounds_for(spec: &ProblemSpec) -> (TransitionBounds, Vec<usize>) {
    let part = spec.partition().expect("benchmark partitions");
    let bounds = spec.bounds(&part, Path::new(".")).expect("benchmark bounds");
    (bounds, part.initial_decision_indices())
}
