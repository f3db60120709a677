mod common;

use common::{dot, enumerate_vertices, random_dense_row, random_row};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn o_max_matches_vertex_enumeration(seed in any::<u64>(), k in 1usize..=6) {
        let mut rng = common::rng(seed);
        let set = random_dense_row(&mut rng, k);
        let values: Vec<f64> = (0..=k).map(|_| rng.random_range(-1.0..2.0)).collect();
        let (v, arg) = set.worst_case_value(&values).unwrap();
        let verts = enumerate_vertices(&set.dense_lower(), &set.dense_upper());
        let best = verts.iter().map(|p| dot(p, &values)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((v - best).abs() <= 1e-9, "{v} vs {best}");
        let d = arg.to_dense();
        prop_assert!(verts.iter().any(|q| q.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-9)));
        prop_assert!((dot(&d, &values) - v).abs() <= 1e-12);
    }

    #[test]
    fn argmax_is_feasible(seed in any::<u64>(), k in 1usize..=40) {
        let mut rng = common::rng(seed);
        let set = random_row(&mut rng, k, 8);
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let (_, arg) = set.worst_case_barrier(&b);
        let d = arg.to_dense();
        prop_assert!(set.contains(&d, 1e-12));
        prop_assert!(set.to_hpolytope().contains(&d, 1e-12));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn worst_case_dominates_any_member(seed in any::<u64>(), k in 1usize..=20) {
        let mut rng = common::rng(seed);
        let set = random_row(&mut rng, k, 8);
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let (v, _) = set.worst_case_barrier(&b);
        let mut vals = b.clone();
        vals.push(1.0);
        let p = set.index_order_point().to_dense();
        prop_assert!(set.contains(&p, 1e-12));
        prop_assert!(dot(&p, &vals) <= v + 1e-12);
    }

    #[test]
    fn monotone_in_values(seed in any::<u64>(), k in 1usize..=20, bump in 0.0f64..0.5) {
        let mut rng = common::rng(seed);
        let set = random_row(&mut rng, k, 8);
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.5)).collect();
        let j = rng.random_range(0..k);
        let mut c = b.clone();
        c[j] += bump;
        prop_assert!(set.worst_case_barrier(&c).0 >= set.worst_case_barrier(&b).0 - 1e-12);
    }

    #[test]
    fn gap_is_clamped_raw(seed in any::<u64>(), k in 1usize..=20) {
        let mut rng = common::rng(seed);
        let set = random_row(&mut rng, k, 8);
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let i = rng.random_range(0..k);
        let g = set.martingale_gap(&b, i);
        prop_assert!(g.beta >= 0.0);
        prop_assert_eq!(g.beta, g.raw.max(0.0));
        prop_assert!((g.raw - (g.argmax.expectation(&b) - b[i])).abs() < 1e-12);
    }

    #[test]
    fn enumeration_agrees_with_library(seed in any::<u64>(), k in 1usize..=5) {
        let mut rng = common::rng(seed);
        let set = random_dense_row(&mut rng, k);
        let ours = enumerate_vertices(&set.dense_lower(), &set.dense_upper());
        let lib = set.vertex_enumerate().unwrap();
        for v in &lib {
            prop_assert!(ours.iter().any(|q| q.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-9)));
        }
    }
}

#[test]
fn hpolytope_shape() {
    let mut rng = common::rng(7);
    let set = random_row(&mut rng, 5, 3);
    let h = set.to_hpolytope();
    assert_eq!(h.num_rows(), 2 * 6 + 2);
    assert!(h.rows.iter().all(|r| r.len() == 6));
}
