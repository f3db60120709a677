//! Acceptance suite. Every criterion prints one `[PASS]`/`[FAIL]` line
//! (run with `--nocapture` to see them) and asserts its own outcome.

mod common;

use std::path::Path;
use std::time::Instant;

use pwc_sbf::benchmarks;
use pwc_sbf::pipeline::{certify, synthesize, ProblemSpec};
use pwc_sbf::synth::{
    loss, smoothed_loss_and_grad, synth_cegs, synth_dual, synth_gd, GdConfig, Problem, SolverKind,
};
use pwc_sbf::{check_certificate, simulate, AmbiguitySet, SolverConfig, TransitionBounds};
use rand::Rng;

fn report(id: u32, pass: bool, detail: impl AsRef<str>) -> bool {
    println!(
        "[{}] criterion {id}: {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    pass
}

const RANDOM_INSTANCES: u64 = 100;
const INSTANCE_SEED: u64 = 20_000;

#[test]
fn criterion_1_oracle_equivalence() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut all_vertices = true;
    for seed in 0..500 {
        let mut rng = common::rng(seed);
        let k = rng.random_range(1..=6);
        let set = common::random_dense_row(&mut rng, k);
        let values: Vec<f64> = (0..=k).map(|_| rng.random_range(-1.0..2.0)).collect();
        let (v, arg) = set.worst_case_value(&values).unwrap();
        let verts = common::enumerate_vertices(&set.dense_lower(), &set.dense_upper());
        let best = verts
            .iter()
            .map(|p| common::dot(p, &values))
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((v - best).abs());
        let d = arg.to_dense();
        all_vertices &= verts
            .iter()
            .any(|q| q.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-9));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && all_vertices && secs < 10.0;
    assert!(report(
        1,
        pass,
        format!("500 rows, max |O-max - enumeration| = {worst:.2e} (tol 1e-9), argmax always a vertex: {all_vertices}, {secs:.2}s (limit 10s)")
    ));
}

fn instances() -> Vec<common::Instance> {
    (0..RANDOM_INSTANCES)
        .map(|i| common::random_instance(INSTANCE_SEED + i, 30))
        .collect()
}

#[test]
fn criterion_2_zero_duality_gap() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for inst in instances() {
        let p = Problem::new(&inst.bounds, &inst.initial, inst.horizon);
        let (d, _) = synth_dual(&p).unwrap();
        let c = synth_cegs(&p).unwrap();
        worst = worst.max((d.objective() - c.objective()).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-6 && secs < 120.0;
    assert!(report(
        2,
        pass,
        format!("{RANDOM_INSTANCES} instances K <= 30, max |dual - cegs| = {worst:.2e} (tol 1e-6), {secs:.1}s (limit 120s)")
    ));
}

#[test]
fn criterion_3_gd_near_optimal() {
    let t = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut max_iters = 0;
    let cfg = GdConfig::default();
    let mut gd_secs = 0.0;
    for inst in instances() {
        let p = Problem::new(&inst.bounds, &inst.initial, inst.horizon);
        let (d, _) = synth_dual(&p).unwrap();
        let s = Instant::now();
        let g = synth_gd(&p, &cfg).unwrap();
        gd_secs += s.elapsed().as_secs_f64();
        worst = worst.max(g.objective() - d.objective());
        max_iters = max_iters.max(g.diagnostics.iterations);
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-2 && max_iters <= 20_000 && gd_secs < 120.0;
    assert!(report(
        3,
        pass,
        format!("{RANDOM_INSTANCES} instances, max L_best - dual = {worst:.2e} (tol 1e-2), max iterations {max_iters}, GD time {gd_secs:.1}s, total {secs:.1}s (limit 120s)")
    ));
}

fn two_region() -> (TransitionBounds, Vec<usize>) {
    let r0 = AmbiguitySet::from_dense(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
    let r1 = AmbiguitySet::from_dense(&[0.0, 0.95, 0.05], &[0.0, 0.95, 0.05]).unwrap();
    (TransitionBounds::new(vec![r0, r1]).unwrap(), vec![0])
}

/// The stated target is 0.5. The exact optimum of this instance is
/// 10/21 (at `b = (0, 1/21)`, both gaps equal 1/21), which
/// `two_region_exact_optimum` asserts; 0.5 is the loss at `b = (0, 0)`.
#[test]
fn criterion_4_hand_derived_instance() {
    let (bounds, init) = two_region();
    let p = Problem::new(&bounds, &init, 10);
    let (d, _) = synth_dual(&p).unwrap();
    let c = synth_cegs(&p).unwrap();
    let target = 0.5;
    let pass = (d.objective() - target).abs() <= 1e-9 && (c.objective() - target).abs() <= 1e-9;
    assert!(report(
        4,
        pass,
        format!(
            "two-region objective dual = {:.12}, cegs = {:.12}, target {target} +- 1e-9 (exact optimum 10/21 = {:.12})",
            d.objective(),
            c.objective(),
            10.0 / 21.0
        )
    ));
}

#[test]
fn two_region_exact_optimum() {
    let (bounds, init) = two_region();
    let p = Problem::new(&bounds, &init, 10);
    let opt = 10.0 / 21.0;
    let (d, _) = synth_dual(&p).unwrap();
    let c = synth_cegs(&p).unwrap();
    assert!((d.objective() - opt).abs() <= 1e-9);
    assert!((c.objective() - opt).abs() <= 1e-9);
    assert!((d.b[1] - 1.0 / 21.0).abs() <= 1e-9);
    // Oracle: grid search over b in [0, 1]^2 of the exact loss.
    let mut best = f64::INFINITY;
    for i in 0..=200 {
        for j in 0..=200 {
            let b = [i as f64 / 200.0, j as f64 / 200.0];
            best = best.min(loss(&p, &b).value);
        }
    }
    assert!(best >= opt - 1e-12 && best <= opt + 0.01);
    assert!((loss(&p, &[0.0, 0.0]).value - 0.5).abs() < 1e-15);
}

fn run_benchmark(spec: &ProblemSpec) -> pwc_sbf::Report {
    certify(spec, Path::new(".")).unwrap().report
}

#[test]
fn criterion_5_linear2d_convex() {
    let spec = benchmarks::linear2d_convex();
    assert_eq!(spec.solver.kind, SolverKind::Cegs);
    let t = Instant::now();
    let r = run_benchmark(&spec);
    let secs = t.elapsed().as_secs_f64();
    let c = &r.certificate;
    let pass = c.safety_lower_bound >= 0.99
        && r.check.passed
        && r.partition.cells <= 10_000
        && secs < 600.0;
    assert!(report(
        5,
        pass,
        format!(
            "CEGS grid {:?} ({} regions), bound {:.6} (>= 0.99), check {}, {secs:.1}s (limit 600s)",
            spec.grid, r.partition.cells, c.safety_lower_bound, r.check.passed
        )
    ));
}

#[test]
fn criterion_6_linear2d_obstacles() {
    let spec = benchmarks::linear2d_obstacles();
    let t = Instant::now();
    let r = run_benchmark(&spec);
    let secs = t.elapsed().as_secs_f64();
    let c = &r.certificate;
    let pass = (0.90..=1.0).contains(&c.safety_lower_bound) && r.check.passed && secs < 600.0;
    assert!(report(
        6,
        pass,
        format!(
            "{} grid {:?} ({} regions), bound {:.6} (in [0.90, 1.0]), check {}, {secs:.1}s (limit 600s)",
            c.solver, spec.grid, r.partition.cells, c.safety_lower_bound, r.check.passed
        )
    ));
}

/// Grid per solver for the soundness sweep. The dual LP is dense in the
/// support size, so it runs on the coarsest admissible grids.
fn soundness_grid(name: &str, solver: SolverKind) -> Vec<usize> {
    let spec = benchmarks::by_name(name).unwrap();
    match (name, solver) {
        ("linear2d_convex", SolverKind::Dual) => vec![4, 4],
        ("linear2d_obstacles", SolverKind::Dual) => vec![7, 5],
        ("unicycle4d", SolverKind::Dual) => vec![2, 2, 2, 2],
        ("unicycle4d", SolverKind::Cegs) => vec![3, 3, 3, 3],
        ("quad6d_convex", SolverKind::Dual) => vec![2, 1, 1, 1, 2, 1],
        ("quad6d_obstacles", SolverKind::Dual) => vec![5, 1, 1, 1, 5, 1],
        ("quad8d", SolverKind::Dual) => vec![2, 1, 1, 1, 2, 1, 1, 1],
        ("quad8d", _) => vec![2; 8],
        _ => spec.grid,
    }
}

#[test]
fn criterion_7_soundness() {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for name in benchmarks::NAMES {
        for solver in [SolverKind::Dual, SolverKind::Cegs, SolverKind::Gd] {
            let mut spec = benchmarks::by_name(name).unwrap();
            spec.grid = soundness_grid(name, solver);
            spec.solver = SolverConfig {
                kind: solver,
                ..spec.solver
            };
            let r = run_benchmark(&spec);
            let mc = r.monte_carlo.as_ref().expect("built-ins are simulable");
            let ok = r.check.passed
                && mc.trajectories == 100_000
                && r.certificate.safety_lower_bound <= mc.wilson_hi;
            pass &= ok;
            lines.push(format!(
                "{name}/{solver} grid {:?}: bound {:.4} <= wilson_hi {:.4} (estimate {:.4}) check {}",
                spec.grid, r.certificate.safety_lower_bound, mc.wilson_hi, mc.estimate, r.check.passed
            ));
        }
    }
    for l in &lines {
        println!("    {l}");
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(report(
        7,
        pass,
        format!("{} benchmark/solver pairs sound at 99% with 1e5 trajectories, {secs:.1}s", lines.len())
    ));
}

#[test]
fn criterion_8_convexity_and_gradient() {
    let mut rng = common::rng(88);
    let mut worst_convex = f64::NEG_INFINITY;
    for t in 0..1000 {
        let inst = common::random_instance(30_000 + t % 50, 30);
        let p = Problem::new(&inst.bounds, &inst.initial, inst.horizon);
        let k = inst.bounds.k();
        let b1: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let b2: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let th: f64 = rng.random_range(0.0..1.0);
        let mix: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| th * x + (1.0 - th) * y).collect();
        let lhs = loss(&p, &mix).value;
        let rhs = th * loss(&p, &b1).value + (1.0 - th) * loss(&p, &b2).value;
        worst_convex = worst_convex.max(lhs - rhs);
        let sl = smoothed_loss_and_grad(&p, &mix, 16.0).value;
        let sr = th * smoothed_loss_and_grad(&p, &b1, 16.0).value
            + (1.0 - th) * smoothed_loss_and_grad(&p, &b2, 16.0).value;
        worst_convex = worst_convex.max(sl - sr);
    }

    let mut checked = 0;
    let mut worst_rel = 0.0f64;
    let mut seed = 40_000;
    while checked < 100 {
        seed += 1;
        let inst = common::random_instance(seed, 30);
        let p = Problem::new(&inst.bounds, &inst.initial, inst.horizon);
        let k = inst.bounds.k();
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
        if !common::is_stable_point(&p, &b, 1e-3) {
            continue;
        }
        let h = 1e-7;
        let g = smoothed_loss_and_grad(&p, &b, 16.0).grad;
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        for j in 0..k {
            let mut up = b.clone();
            let mut dn = b.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (smoothed_loss_and_grad(&p, &up, 16.0).value
                - smoothed_loss_and_grad(&p, &dn, 16.0).value)
                / (2.0 * h);
            diff = diff.max((fd - g[j]).abs());
            norm = norm.max(g[j].abs());
        }
        worst_rel = worst_rel.max(diff / norm.max(1e-12));
        checked += 1;
    }
    let pass = worst_convex <= 1e-12 && worst_rel <= 1e-4;
    assert!(report(
        8,
        pass,
        format!("1000 triples: max convexity excess {worst_convex:.2e} (<= 1e-12); 100 stable points: max rel. gradient error {worst_rel:.2e} (<= 1e-4)")
    ));
}

#[test]
fn criterion_9_high_dimensional_properties() {
    let mut pass = true;
    let mut details = Vec::new();
    for name in ["unicycle4d", "quad6d_convex", "quad6d_obstacles"] {
        let spec = benchmarks::by_name(name).unwrap();
        let r = run_benchmark(&spec);
        let mc = r.monte_carlo.as_ref().unwrap();
        let ok = r.check.passed
            && r.certificate.safety_lower_bound >= 0.0
            && r.certificate.safety_lower_bound <= mc.wilson_hi;
        pass &= ok;
        details.push(format!(
            "{name} {} K={} bound {:.4} check {}",
            r.certificate.solver, r.partition.k, r.certificate.safety_lower_bound, r.check.passed
        ));
    }

    // GD on a quad6d partition with more than 10^4 regions; the iteration
    // cap only bounds the wall time, memory is allocated up front.
    let mut spec = benchmarks::quad6d_convex();
    spec.grid = vec![7, 5, 3, 3, 7, 5];
    let partition = spec.partition().unwrap();
    let bounds = spec.bounds(&partition, Path::new(".")).unwrap();
    let init = partition.initial_decision_indices();
    let t = Instant::now();
    let solver = SolverConfig {
        kind: SolverKind::Gd,
        gd: GdConfig {
            max_iters: 100,
            ..GdConfig::default()
        },
        ..SolverConfig::default()
    };
    let (cert, _) = synthesize(&solver, &bounds, &init, spec.horizon).unwrap();
    let check = check_certificate(&cert, &bounds, &init).unwrap();
    let big_ok = bounds.k() >= 10_000 && check.passed && cert.safety_lower_bound >= 0.0;
    pass &= big_ok;
    details.push(format!(
        "quad6d GD K={} nnz={} {} iterations in {:.1}s, check {}",
        bounds.k(),
        bounds.nnz(),
        cert.diagnostics.iterations,
        t.elapsed().as_secs_f64(),
        check.passed
    ));
    assert!(report(9, pass, details.join("; ")));
}

#[test]
fn monte_carlo_reference_value() {
    // x' = x + v, sigma = 1, safe = [-0.5, 0.5], x0 = 0, N = 1.
    let model = pwc_sbf::AffineModel {
        a: vec![vec![1.0]],
        c: vec![0.0],
        sigma: vec![1.0],
    };
    let q = pwc_sbf::SafetyQuery {
        safe: pwc_sbf::Rect::new(vec![-0.5], vec![0.5]).unwrap(),
        initial: pwc_sbf::Rect::new_closed(vec![0.0], vec![0.0]).unwrap(),
        obstacles: vec![],
    };
    let est = simulate(&model, &q, 1, 100_000, 3).unwrap();
    let exact = common::phi(0.5) - common::phi(-0.5);
    assert!((exact - 0.382_924_922_548_026).abs() < 1e-12);
    assert!(est.wilson_lo <= exact && exact <= est.wilson_hi, "{est:?}");
}
