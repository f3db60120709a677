//! Piecewise-constant stochastic barrier certificates.
//!
//! Pipeline: grid the safe set ([`geometry`]), bound the one-step transition
//! kernel per region pair ([`bounds`]), synthesize barrier values with one of
//! three solvers ([`synth`]), then re-check the result and compare it with
//! simulation ([`validate`]). [`pipeline`] ties the steps together behind a
//! JSON [`ProblemSpec`]; [`benchmarks`] holds the built-in specs.

pub mod ambiguity;
pub mod benchmarks;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod lp;
pub mod models;
pub mod pipeline;
pub mod synth;
pub mod validate;

pub use ambiguity::{AmbiguitySet, Distribution, HPolytope};
pub use bounds::{AffineModel, IntervalMapModel, TransitionBounds};
pub use error::{Error, Result};
pub use geometry::{Location, Partition, Rect};
pub use pipeline::{certify, ProblemSpec, Report, SolverConfig, SystemModel};
pub use synth::{CegsConfig, Certificate, GdConfig, Problem, SolverKind};
pub use validate::{check_certificate, simulate, CheckReport, Dynamics, McEstimate, SafetyQuery};
