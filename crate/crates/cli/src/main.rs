//! Command-line front end for `pwc_sbf`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pwc_sbf::pipeline::{certify, synthesize, Artifacts};
use pwc_sbf::{
    benchmarks, check_certificate, simulate, Certificate, ProblemSpec, SolverConfig, SolverKind,
    TransitionBounds,
};

#[derive(Parser)]
#[command(name = "pwc-sbf", version, about = "Piecewise-constant stochastic barrier certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition, bound, synthesize, check and simulate a spec.
    Certify {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compute transition bounds and write bounds.csv (or .json).
    Bounds {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        out: OutArgs,
        /// Write bounds.json instead of bounds.csv.
        #[arg(long)]
        json: bool,
    },
    /// Synthesize a certificate from an imported bounds file.
    Synth {
        /// Bounds file (`.csv` or `.json`).
        #[arg(long)]
        bounds: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-verify a certificate file against a bounds file.
    Check {
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        bounds: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo estimate of the finite-horizon safety probability.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run `certify` on a built-in benchmark.
    Bench {
        /// Benchmark name; omit with --list to print the names.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        /// Write the resolved spec JSON instead of running it.
        #[arg(long)]
        dump_spec: bool,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write bounds.csv next to the report.
    #[arg(long)]
    export_bounds: bool,
}

/// Where initial regions and the horizon come from when working from a
/// bounds file: a spec, or explicit values.
#[derive(Args)]
struct TargetArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated 1-based initial region indices (without --spec).
    #[arg(long, conflicts_with = "spec")]
    initial: Option<String>,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    solver: Option<SolverKind>,
    /// Grid counts per dimension, e.g. "15,10".
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trajectories; 0 disables simulation.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    norm_p: Option<f64>,
    #[arg(long)]
    step0: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    stall_tol: Option<f64>,
    #[arg(long)]
    stall_window: Option<usize>,
}

impl Overrides {
    fn apply(&self, spec: &mut ProblemSpec) -> anyhow::Result<()> {
        if let Some(g) = &self.grid {
            spec.grid = parse_list(g).context("--grid")?;
        }
        if let Some(n) = self.horizon {
            spec.horizon = n;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        self.apply_solver(&mut spec.solver);
        spec.validate()?;
        Ok(())
    }

    fn apply_solver(&self, solver: &mut SolverConfig) {
        if let Some(k) = self.solver {
            solver.kind = k;
        }
        let gd = &mut solver.gd;
        if let Some(p) = self.norm_p {
            gd.norm_p = p;
        }
        if self.step0.is_some() {
            gd.step0 = self.step0;
        }
        if let Some(d) = self.decay {
            gd.decay = d;
        }
        if let Some(t) = self.stall_tol {
            gd.stall_tol = t;
        }
        if let Some(w) = self.stall_window {
            gd.stall_window = w;
        }
    }
}

fn parse_list(text: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("`{t}` is not a non-negative integer"))
        })
        .collect()
}

fn load_spec(path: &Path, over: &Overrides) -> anyhow::Result<ProblemSpec> {
    let mut spec = ProblemSpec::load(path)?;
    over.apply(&mut spec)?;
    Ok(spec)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

/// Initial decision indices (0-based) and solver settings for a command
/// that starts from a bounds file.
struct Target {
    initial: Vec<usize>,
    solver: SolverConfig,
    horizon: usize,
}

fn target(t: &TargetArgs, over: &Overrides, k: usize) -> anyhow::Result<Target> {
    match (&t.spec, &t.initial) {
        (Some(path), _) => {
            let spec = load_spec(path, over)?;
            Ok(Target {
                initial: spec.partition()?.initial_decision_indices(),
                solver: spec.solver,
                horizon: spec.horizon,
            })
        }
        (None, Some(list)) => {
            let initial = parse_list(list)?
                .into_iter()
                .map(|i| {
                    if i == 0 || i > k {
                        bail!("initial region {i} outside 1..={k}");
                    }
                    Ok(i - 1)
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let mut solver = SolverConfig::default();
            over.apply_solver(&mut solver);
            solver.gd.validate()?;
            let horizon = over.horizon.unwrap_or(10);
            if horizon == 0 {
                bail!("horizon must be at least 1");
            }
            Ok(Target {
                initial,
                solver,
                horizon,
            })
        }
        (None, None) => bail!("either --spec or --initial is required"),
    }
}

fn emit_certify(a: &Artifacts, out: &OutArgs) -> anyhow::Result<bool> {
    let r = &a.report;
    write(&out.out, "report.json", &to_json(r))?;
    write(&out.out, "certificate.json", &r.certificate.to_json())?;
    write(&out.out, "barrier.csv", &r.certificate.barrier_csv(Some(&a.partition)))?;
    if out.export_bounds {
        write(&out.out, "bounds.csv", &a.bounds.to_csv())?;
    }
    if let Some(mc) = &r.monte_carlo {
        write(&out.out, "mc.json", &to_json(mc))?;
    }
    let c = &r.certificate;
    println!(
        "{}: K={} eta={:.6} beta={:.3e} safety_lower_bound={:.6} check={} synth={:.2}s",
        c.solver,
        c.k,
        c.eta,
        c.beta,
        c.safety_lower_bound,
        if r.check.passed { "passed" } else { "FAILED" },
        r.timings.synth_secs,
    );
    if let Some(mc) = &r.monte_carlo {
        println!(
            "monte carlo: {:.6} (99% CI [{:.6}, {:.6}], {} trajectories)",
            mc.estimate, mc.wilson_lo, mc.wilson_hi, mc.trajectories
        );
    }
    Ok(r.check.passed)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Certify { spec, over, out } => {
            let s = load_spec(&spec, &over)?;
            let a = certify(&s, &base_dir(&spec))?;
            emit_certify(&a, &out)
        }
        Command::Bench {
            name,
            list,
            dump_spec,
            over,
            out,
        } => {
            if list {
                for n in benchmarks::NAMES {
                    println!("{n}");
                }
                return Ok(true);
            }
            let Some(name) = name else {
                bail!("benchmark name required (one of {})", benchmarks::NAMES.join(", "));
            };
            let Some(mut s) = benchmarks::by_name(&name) else {
                bail!("unknown benchmark `{name}` (one of {})", benchmarks::NAMES.join(", "));
            };
            over.apply(&mut s)?;
            if dump_spec {
                write(&out.out, "spec.json", &s.resolved().to_json())?;
                return Ok(true);
            }
            let a = certify(&s, Path::new("."))?;
            emit_certify(&a, &out)
        }
        Command::Bounds {
            spec,
            over,
            out,
            json,
        } => {
            let s = load_spec(&spec, &over)?;
            let partition = s.partition()?;
            let bounds = s.bounds(&partition, &base_dir(&spec))?;
            let name = if json { "bounds.json" } else { "bounds.csv" };
            fs::create_dir_all(&out.out)?;
            bounds.write(&out.out.join(name))?;
            println!(
                "K={} nnz={} initial={} -> {}",
                bounds.k(),
                bounds.nnz(),
                partition.initial_decision_indices().len(),
                out.out.join(name).display()
            );
            Ok(true)
        }
        Command::Synth {
            bounds,
            target: t,
            over,
            out,
        } => {
            let b = TransitionBounds::read(&bounds)?;
            let t = target(&t, &over, b.k())?;
            let (cert, dual) = synthesize(&t.solver, &b, &t.initial, t.horizon)?;
            let check = check_certificate(&cert, &b, &t.initial)?;
            write(&out.out, "certificate.json", &cert.to_json())?;
            write(&out.out, "barrier.csv", &cert.barrier_csv(None))?;
            write(&out.out, "check.json", &to_json(&check))?;
            if let Some(d) = dual {
                write(&out.out, "dual.json", &to_json(&d))?;
            }
            println!(
                "{}: K={} eta={:.6} beta={:.3e} safety_lower_bound={:.6} check={}",
                cert.solver,
                cert.k,
                cert.eta,
                cert.beta,
                cert.safety_lower_bound,
                if check.passed { "passed" } else { "FAILED" }
            );
            Ok(check.passed)
        }
        Command::Check {
            certificate,
            bounds,
            target: t,
            over,
            out,
        } => {
            let text = fs::read_to_string(&certificate)
                .with_context(|| format!("reading {}", certificate.display()))?;
            let cert = Certificate::from_json(&text)?;
            let b = TransitionBounds::read(&bounds)?;
            let t = target(&t, &over, b.k())?;
            let check = check_certificate(&cert, &b, &t.initial)?;
            write(&out.out, "check.json", &to_json(&check))?;
            println!(
                "check {}: martingale {:.3e}, initial {:.3e}, bound arithmetic {:.3e}",
                if check.passed { "passed" } else { "FAILED" },
                check.martingale.worst_violation,
                check.initial.worst_violation,
                check.bound_arithmetic.worst_violation
            );
            Ok(check.passed)
        }
        Command::Simulate { spec, over, out } => {
            let s = load_spec(&spec, &over)?;
            let Some(dynamics) = s.system.dynamics() else {
                bail!("system model cannot be simulated");
            };
            let trials = if s.trials == 0 { 100_000 } else { s.trials };
            let mc = simulate(dynamics, &s.query(), s.horizon, trials, s.seed)?;
            write(&out.out, "mc.json", &to_json(&mc))?;
            println!(
                "monte carlo: {:.6} (99% CI [{:.6}, {:.6}], {} trajectories)",
                mc.estimate, mc.wilson_lo, mc.wilson_hi, mc.trajectories
            );
            Ok(true)
        }
    }
}

#[derive(Serialize)]
struct ErrorMessage {
    error: String,
    causes: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = ErrorMessage {
                error: e.to_string(),
                causes: e.chain().skip(1).map(|c| c.to_string()).collect(),
            };
            eprintln!("{}", serde_json::to_string(&msg).expect("error serializes"));
            ExitCode::from(2)
        }
    }
}
