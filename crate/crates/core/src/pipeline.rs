//! Problem specifications and the end-to-end certify pipeline.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{affine_bounds, bounds_from_images, interval_map_bounds};
use crate::bounds::{AffineModel, IntervalMapModel, TransitionBounds};
use crate::error::{Error, Result};
use crate::geometry::{Partition, Rect};
use crate::models::UnicycleModel;
use crate::synth::{
    synth_cegs_with, synth_dual, synth_gd, CegsConfig, Certificate, DualSolution, GdConfig, Problem,
    SolverKind,
};
use crate::validate::{check_certificate, simulate, CheckReport, Dynamics, McEstimate, SafetyQuery};

pub const SCHEMA_VERSION: u32 = 1;

/// Dynamics of `x' = f(x) + v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SystemModel {
    Affine(AffineModel),
    Unicycle(UnicycleModel),
    /// Mean-image boxes per decision region; not simulable.
    IntervalMap(IntervalMapModel),
    /// Bounds imported from a CSV or JSON file; not simulable.
    External { path: PathBuf },
}

impl SystemModel {
    pub fn dynamics(&self) -> Option<&dyn Dynamics> {
        match self {
            SystemModel::Affine(m) => Some(m),
            SystemModel::Unicycle(m) => Some(m),
            SystemModel::IntervalMap(_) | SystemModel::External { .. } => None,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            SystemModel::Affine(m) => Some(m.dim()),
            SystemModel::Unicycle(_) => Some(4),
            SystemModel::IntervalMap(m) => Some(m.sigma.len()),
            SystemModel::External { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    #[serde(default)]
    pub cegs: CegsConfig,
    #[serde(default)]
    pub gd: GdConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Cegs,
            cegs: CegsConfig::default(),
            gd: GdConfig::default(),
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_horizon() -> usize {
    10
}

fn default_trials() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub system: SystemModel,
    pub safe: Rect,
    pub initial: Rect,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    pub grid: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo trajectories; 0 disables simulation.
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Free-form remarks, e.g. which parameters are implementer choices.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Spec(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Spec("horizon must be at least 1".into()));
        }
        if let Some(n) = self.system.dim() {
            if n != self.safe.dim() {
                return Err(Error::Spec(format!(
                    "system dimension {n} does not match safe set dimension {}",
                    self.safe.dim()
                )));
            }
        }
        if let SystemModel::Affine(m) = &self.system {
            m.validate()?;
        }
        self.solver.gd.validate()?;
        Ok(())
    }

    /// Copy with every solver default filled in.
    pub fn resolved(&self) -> Self {
        let mut s = self.clone();
        s.solver.gd.step0 = Some(self.solver.gd.step0_for(self.horizon));
        s
    }

    pub fn query(&self) -> SafetyQuery {
        SafetyQuery {
            safe: self.safe.clone(),
            initial: self.initial.clone(),
            obstacles: self.obstacles.clone(),
        }
    }

    pub fn partition(&self) -> Result<Partition> {
        Ok(Partition::make_grid(
            self.safe.clone(),
            &self.grid,
            &self.initial,
            &self.obstacles,
        )?)
    }

    /// Transition bounds over the partition's decision regions. Relative
    /// external paths resolve against `base_dir`.
    pub fn bounds(&self, partition: &Partition, base_dir: &Path) -> Result<TransitionBounds> {
        let bounds = match &self.system {
            SystemModel::Affine(m) => affine_bounds(m, partition)?,
            SystemModel::Unicycle(m) => bounds_from_images(
                |k| Ok(m.mean_image(partition.decision_region(k))),
                &m.sigma,
                partition,
            )?,
            SystemModel::IntervalMap(m) => interval_map_bounds(m, partition)?,
            SystemModel::External { path } => TransitionBounds::read(&base_dir.join(path))?,
        };
        if bounds.k() != partition.num_decision() {
            return Err(Error::Spec(format!(
                "bounds have K = {} but the partition has {} decision regions",
                bounds.k(),
                partition.num_decision()
            )));
        }
        Ok(bounds)
    }
}

/// Runs the configured solver.
pub fn synthesize(
    solver: &SolverConfig,
    bounds: &TransitionBounds,
    initial: &[usize],
    horizon: usize,
) -> Result<(Certificate, Option<DualSolution>)> {
    let problem = Problem::new(bounds, initial, horizon);
    Ok(match solver.kind {
        SolverKind::Dual => {
            let (c, d) = synth_dual(&problem)?;
            (c, Some(d))
        }
        SolverKind::Cegs => (synth_cegs_with(&problem, &solver.cegs)?, None),
        SolverKind::Gd => (synth_gd(&problem, &solver.gd)?, None),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub partition_secs: f64,
    pub bounds_secs: f64,
    pub synth_secs: f64,
    pub check_secs: f64,
    pub simulate_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub cells: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub unsafe_cells: usize,
    pub initial_regions: usize,
    pub bounds_nnz: usize,
}

/// Everything `certify` produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ProblemSpec,
    pub partition: PartitionSummary,
    pub certificate: Certificate,
    pub check: CheckReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McEstimate>,
    pub timings: Timings,
}

/// Intermediate products kept for file export.
pub struct Artifacts {
    pub report: Report,
    pub partition: Partition,
    pub bounds: TransitionBounds,
}

/// partition -> bounds -> synthesize -> check -> simulate (when possible).
pub fn certify(spec: &ProblemSpec, base_dir: &Path) -> Result<Artifacts> {
    spec.validate()?;
    let mut timings = Timings::default();
    let t = Instant::now();
    let partition = spec.partition()?;
    timings.partition_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let bounds = spec.bounds(&partition, base_dir)?;
    timings.bounds_secs = t.elapsed().as_secs_f64();

    let initial = partition.initial_decision_indices();
    let t = Instant::now();
    let (certificate, _) = synthesize(&spec.solver, &bounds, &initial, spec.horizon)?;
    timings.synth_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let check = check_certificate(&certificate, &bounds, &initial)?;
    timings.check_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let monte_carlo = match spec.system.dynamics() {
        Some(dyn_model) if spec.trials > 0 => Some(simulate(
            dyn_model,
            &spec.query(),
            spec.horizon,
            spec.trials,
            spec.seed,
        )?),
        _ => None,
    };
    timings.simulate_secs = t.elapsed().as_secs_f64();

    let partition_summary = PartitionSummary {
        cells: partition.regions().len(),
        k: partition.num_decision(),
        unsafe_cells: partition.unsafe_indices().len(),
        initial_regions: initial.len(),
        bounds_nnz: bounds.nnz(),
    };
    Ok(Artifacts {
        report: Report {
            spec: spec.resolved(),
            partition: partition_summary,
            certificate,
            check,
            monte_carlo,
            timings,
        },
        partition,
        bounds,
    })
}
