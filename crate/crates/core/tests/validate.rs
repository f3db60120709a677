mod common;

use pwc_sbf::synth::{synth_dual, Problem};
use pwc_sbf::validate::{wilson_interval, ValidateError};
use pwc_sbf::{check_certificate, simulate, AffineModel, Rect, SafetyQuery};
use statrs::distribution::{ContinuousCDF, Normal};

/// Wilson interval written out from the score-test definition.
fn wilson_oracle(s: u64, n: u64) -> (f64, f64) {
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.995);
    let (s, n) = (s as f64, n as f64);
    let p = s / n;
    let a = p + z * z / (2.0 * n);
    let r = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt();
    let d = 1.0 + z * z / n;
    ((a - r) / d, (a + r) / d)
}

#[test]
fn wilson_interval_values() {
    assert_eq!(wilson_interval(0, 40, 0.99).0, 0.0);
    assert_eq!(wilson_interval(40, 40, 0.99).1, 1.0);
    let (lo, hi) = wilson_interval(50, 100, 0.99);
    let (ol, oh) = wilson_oracle(50, 100);
    assert!((lo - ol).abs() < 1e-12 && (hi - oh).abs() < 1e-12);
    assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
    for (s, n) in [(1, 10), (9, 10), (99_000, 100_000), (3, 7)] {
        let (lo, hi) = wilson_interval(s, n, 0.99);
        let (ol, oh) = wilson_oracle(s, n);
        assert!((lo - ol).abs() < 1e-12 && (hi - oh).abs() < 1e-12, "{s}/{n}");
        assert!(lo <= s as f64 / n as f64 && s as f64 / n as f64 <= hi);
    }
}

#[test]
fn corrupted_certificates_fail_the_named_condition() {
    for seed in 0..20 {
        let inst = common::random_instance(40_000 + seed, 8);
        let p = Problem::new(&inst.bounds, &inst.initial, inst.horizon);
        let (cert, _) = synth_dual(&p).unwrap();
        let check = |c: &pwc_sbf::Certificate| check_certificate(c, &inst.bounds, &inst.initial).unwrap();
        assert!(check(&cert).passed);

        let mut c = cert.clone();
        c.eta -= 1e-3;
        let r = check(&c);
        assert!(!r.passed && !r.initial.passed);

        let mut c = cert.clone();
        c.safety_lower_bound = (c.safety_lower_bound + 1e-3).min(1.0 + 1e-3);
        assert!(!check(&c).bound_arithmetic.passed);

        let mut c = cert.clone();
        c.beta_per_region.iter_mut().for_each(|b| *b = 0.0);
        c.beta = 0.0;
        c.safety_lower_bound = (1.0 - c.eta).max(0.0);
        let r = check(&c);
        // Certificates with zero gaps everywhere stay valid.
        assert_eq!(r.passed, cert.beta_per_region.iter().all(|&b| b <= 1e-8));
        if !r.passed {
            assert!(!r.martingale.passed && r.martingale.region.is_some());
        }

        let mut c = cert.clone();
        c.beta = c.beta_per_region.iter().copied().fold(0.0, f64::max) - 1e-3;
        assert!(!check(&c).beta_consistency.passed);

        let mut c = cert.clone();
        c.b[0] = -1e-3;
        assert!(!check(&c).nonneg.passed);
    }
}

#[test]
fn checker_rejects_mismatched_inputs() {
    let inst = common::random_instance(1, 5);
    let p = Problem::new(&inst.bounds, &inst.initial, inst.horizon);
    let (mut cert, _) = synth_dual(&p).unwrap();
    assert!(matches!(
        check_certificate(&cert, &inst.bounds, &[inst.bounds.k()]),
        Err(ValidateError::InitialOutOfRange(_))
    ));
    cert.b.pop();
    assert!(matches!(
        check_certificate(&cert, &inst.bounds, &inst.initial),
        Err(ValidateError::DimensionMismatch { .. })
    ));
}

fn one_dim() -> (AffineModel, SafetyQuery) {
    let model = AffineModel {
        a: vec![vec![0.5]],
        c: vec![0.0],
        sigma: vec![0.5],
    };
    let query = SafetyQuery {
        safe: Rect::new(vec![-1.0], vec![1.0]).unwrap(),
        initial: Rect::new_closed(vec![0.0], vec![0.0]).unwrap(),
        obstacles: vec![],
    };
    (model, query)
}

#[test]
fn one_step_estimate_brackets_the_exact_probability() {
    let (model, query) = one_dim();
    let mc = simulate(&model, &query, 1, 100_000, 3).unwrap();
    let exact = 2.0 * common::phi(2.0) - 1.0;
    assert!(mc.wilson_lo <= exact && exact <= mc.wilson_hi, "{mc:?} vs {exact}");
    assert_eq!(mc.trajectories, 100_000);
    assert_eq!(mc.confidence, 0.99);
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let (model, query) = one_dim();
    let a = simulate(&model, &query, 5, 20_000, 9).unwrap();
    let b = simulate(&model, &query, 5, 20_000, 9).unwrap();
    assert_eq!(a, b);
    let c = simulate(&model, &query, 5, 20_000, 10).unwrap();
    assert_ne!(a.safe_count, c.safe_count);
    assert!(matches!(simulate(&model, &query, 5, 0, 9), Err(ValidateError::NoTrials)));
}

#[test]
fn obstacles_end_trajectories() {
    let (model, mut query) = one_dim();
    // An obstacle covering the whole safe box leaves nothing safe.
    query.obstacles.push(Rect::new(vec![-2.0], vec![2.0]).unwrap());
    let mc = simulate(&model, &query, 3, 1000, 1).unwrap();
    assert_eq!(mc.safe_count, 0);
}
