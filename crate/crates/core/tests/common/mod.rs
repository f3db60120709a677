#![allow(dead_code)]

use pwc_sbf::bounds::TransitionBounds;
use pwc_sbf::AmbiguitySet;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Interval row around a random nominal distribution over `max_support`
/// random destinations plus the sink.
pub fn random_row(rng: &mut ChaCha8Rng, k: usize, max_support: usize) -> AmbiguitySet {
    let s = rng.random_range(1..=max_support.min(k));
    let mut targets = sample(rng, k, s).into_vec();
    targets.sort_unstable();
    let mut w: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..1.0)).collect();
    w.push(rng.random_range(0.0..0.3));
    let total: f64 = w.iter().sum();
    let radius = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.15) };
    let interval = |p: f64, rng: &mut ChaCha8Rng| {
        let r = radius * rng.random_range(0.0..1.0);
        ((p - r).max(0.0), (p + r).min(1.0))
    };
    let mut entries = Vec::with_capacity(s);
    for (pos, &j) in targets.iter().enumerate() {
        let (lo, hi) = interval(w[pos] / total, rng);
        entries.push((j, lo, hi));
    }
    let sink = interval(w[s] / total, rng);
    AmbiguitySet::from_sparse(k, entries, sink).unwrap()
}

/// Dense random row, every destination listed.
pub fn random_dense_row(rng: &mut ChaCha8Rng, k: usize) -> AmbiguitySet {
    let mut lower = Vec::with_capacity(k + 1);
    let mut upper = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        let a: f64 = rng.random_range(0.0..0.4);
        let b: f64 = rng.random_range(0.0..0.6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lower.push(lo / (k as f64 + 1.0));
        upper.push(if rng.random_bool(0.1) { lo / (k as f64 + 1.0) } else { hi });
    }
    // Make sure the set is non-empty.
    let su: f64 = upper.iter().sum();
    if su < 1.0 {
        let j = rng.random_range(0..=k);
        upper[j] += 1.0 - su;
        upper[j] = upper[j].min(1.0);
        let su: f64 = upper.iter().sum();
        if su < 1.0 {
            upper.iter_mut().for_each(|u| *u = 1.0);
        }
    }
    AmbiguitySet::from_dense(&lower, &upper).unwrap()
}

pub struct Instance {
    pub bounds: TransitionBounds,
    pub initial: Vec<usize>,
    pub horizon: usize,
}

/// Random synthesis instance with `2 <= K <= k_max`.
pub fn random_instance(seed: u64, k_max: usize) -> Instance {
    let mut rng = rng(seed);
    let k = rng.random_range(2..=k_max);
    let rows = (0..k).map(|_| random_row(&mut rng, k, 6)).collect();
    let n_init = rng.random_range(1..=3.min(k));
    let mut initial = sample(&mut rng, k, n_init).into_vec();
    initial.sort_unstable();
    Instance {
        bounds: TransitionBounds::new(rows).unwrap(),
        initial,
        horizon: rng.random_range(1..=10),
    }
}

/// Every vertex of `{lo <= p <= hi, sum p = 1}` by brute force: all
/// coordinates but one at a bound, the remaining one absorbing the residual.
pub fn enumerate_vertices(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let n = lo.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for free in 0..n {
        for mask in 0u32..(1 << (n - 1)) {
            let mut p = vec![0.0; n];
            let mut bit = 0;
            let mut others = 0.0;
            for j in (0..n).filter(|&j| j != free) {
                p[j] = if mask >> bit & 1 == 1 { hi[j] } else { lo[j] };
                others += p[j];
                bit += 1;
            }
            let r = 1.0 - others;
            if r >= lo[free] - 1e-12 && r <= hi[free] + 1e-12 {
                p[free] = r.clamp(lo[free], hi[free]);
                if !out.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-12)) {
                    out.push(p);
                }
            }
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// True if `b` is a point where the smoothed loss is differentiable with a
/// locally constant maximizer: distinct values at least `margin` apart,
/// every raw gap at least `margin` away from zero.
pub fn is_stable_point(problem: &pwc_sbf::synth::Problem<'_>, b: &[f64], margin: f64) -> bool {
    let mut sorted = b.to_vec();
    sorted.push(1.0);
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[1] - w[0] < margin) {
        return false;
    }
    problem.gaps(b).iter().all(|g| g.raw.abs() >= margin)
}
