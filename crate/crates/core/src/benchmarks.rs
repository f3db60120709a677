//! Built-in benchmark specs.

use crate::bounds::AffineModel;
use crate::geometry::Rect;
use crate::models::{quadrotor6d, quadrotor8d, QuadrotorConfig, UnicycleModel};
use crate::pipeline::{ProblemSpec, SolverConfig, SystemModel, SCHEMA_VERSION};
use crate::synth::SolverKind;

pub const NAMES: [&str; 6] = [
    "linear2d_convex",
    "linear2d_obstacles",
    "unicycle4d",
    "quad6d_convex",
    "quad6d_obstacles",
    "quad8d",
];

fn rect(lo: &[f64], hi: &[f64]) -> Rect {
    Rect::new(lo.to_vec(), hi.to_vec()).expect("benchmark boxes are valid")
}

fn centered(c: &[f64], h: &[f64]) -> Rect {
    Rect::centered(c, h).expect("benchmark boxes are valid")
}

fn spec(system: SystemModel, safe: Rect, initial: Rect, obstacles: Vec<Rect>, grid: Vec<usize>) -> ProblemSpec {
    ProblemSpec {
        schema_version: SCHEMA_VERSION,
        system,
        safe,
        initial,
        obstacles,
        grid,
        horizon: 10,
        solver: SolverConfig::default(),
        seed: 0,
        trials: 100_000,
        notes: Vec::new(),
    }
}

fn linear2d() -> SystemModel {
    SystemModel::Affine(AffineModel {
        a: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        c: vec![0.0, 0.0],
        sigma: vec![0.1, 0.1],
    })
}

pub fn linear2d_convex() -> ProblemSpec {
    let mut s = spec(
        linear2d(),
        rect(&[-1.0, -0.5], &[0.5, 0.5]),
        rect(&[-0.8, -0.2], &[-0.6, 0.0]),
        vec![],
        LINEAR2D_CONVEX_GRID.to_vec(),
    );
    s.notes.push("grid resolution is an implementer choice".into());
    s
}

pub fn linear2d_obstacles() -> ProblemSpec {
    let mut s = linear2d_convex();
    s.obstacles = vec![
        centered(&[-0.55, 0.30], &[0.02, 0.02]),
        centered(&[-0.55, -0.15], &[0.02, 0.02]),
    ];
    s.grid = LINEAR2D_OBSTACLES_GRID.to_vec();
    s
}

pub const LINEAR2D_CONVEX_GRID: [usize; 2] = [15, 10];

/// The cell containing `x = -0.6` must end before the obstacles start at
/// `x = -0.57`, so the x count is a multiple of 7.
pub const LINEAR2D_OBSTACLES_GRID: [usize; 2] = [21, 14];

fn gd_solver() -> SolverConfig {
    SolverConfig {
        kind: SolverKind::Gd,
        ..SolverConfig::default()
    }
}

pub fn unicycle4d() -> ProblemSpec {
    let mut s = spec(
        SystemModel::Unicycle(UnicycleModel::default()),
        rect(&[-1.0, -0.5, -1.75, -0.5], &[0.5, 1.0, 0.5, 1.0]),
        centered(&[-0.5, -0.4, 0.0, 0.0], &[0.01; 4]),
        vec![],
        vec![6, 6, 5, 6],
    );
    s.solver = gd_solver();
    s.notes = vec![
        "controller (feedback linearization + LQR gains, v_min, target) is an implementer choice".into(),
        "initial set: box around (-0.5, -0.4, 0, 0) with half-width 0.01; the stated center lies on the y boundary of the safe set".into(),
    ];
    s
}

fn quad6d_safe() -> Rect {
    rect(
        &[-0.5, -1.0, -0.1, -0.1, -0.5, -0.5],
        &[2.0, 1.0, 0.1, 0.1, 3.0, 1.5],
    )
}

fn quad_notes() -> Vec<String> {
    vec![
        "feedback gains and references are implementer choices (poles at -2, equilibrium y = 1, z = 2, x = 2)".into(),
        "initial set is an implementer choice".into(),
    ]
}

pub fn quad6d_convex() -> ProblemSpec {
    let mut s = spec(
        SystemModel::Affine(quadrotor6d(&QuadrotorConfig::default())),
        quad6d_safe(),
        centered(&[0.9, 0.0, 0.0, 0.0, 1.9, 0.0], &[0.05, 0.05, 0.01, 0.01, 0.05, 0.05]),
        vec![],
        vec![5, 2, 2, 2, 5, 2],
    );
    s.solver = gd_solver();
    s.notes = quad_notes();
    s
}

pub fn quad6d_obstacles() -> ProblemSpec {
    let mut s = quad6d_convex();
    s.obstacles = vec![
        centered(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], &[0.01; 6]),
        centered(&[1.0, 0.0, 0.0, 0.0, 2.75, 0.0], &[0.01; 6]),
    ];
    s
}

pub fn quad8d() -> ProblemSpec {
    let mut s = spec(
        SystemModel::Affine(quadrotor8d(&QuadrotorConfig::default())),
        rect(
            &[-0.5, -1.0, -0.1, -0.1, -0.5, -0.5, -0.1, -0.1],
            &[2.0, 1.0, 0.1, 0.1, 4.0, 1.5, 0.1, 0.1],
        ),
        centered(
            &[0.9, 0.0, 0.0, 0.0, 1.9, 0.0, 0.0, 0.0],
            &[0.05, 0.05, 0.01, 0.01, 0.05, 0.05, 0.01, 0.01],
        ),
        vec![],
        vec![3, 2, 2, 2, 3, 2, 2, 2],
    );
    s.solver = gd_solver();
    s.notes = quad_notes();
    s
}

/// Looks up a built-in by name.
pub fn by_name(name: &str) -> Option<ProblemSpec> {
    Some(match name {
        "linear2d_convex" => linear2d_convex(),
        "linear2d_obstacles" => linear2d_obstacles(),
        "unicycle4d" => unicycle4d(),
        "quad6d_convex" => quad6d_convex(),
        "quad6d_obstacles" => quad6d_obstacles(),
        "quad8d" => quad8d(),
        _ => return None,
    })
}
