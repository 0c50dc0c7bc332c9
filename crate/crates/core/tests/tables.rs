mod common;

use common::*;
use gml_core::tables::{solve_typical, typical_objective, TypicalDual, TYPICAL_SMOOTHING};
use gml_core::{entropy, independence_table, typical_table, Histogram};

#[test]
fn typical_table_beats_rejection_samples() {
    let mut rng = rng(30);
    for _ in 0..5 {
        let r = random_histogram(&mut rng, 3, false);
        let c = random_histogram(&mut rng, 3, false);
        let t = typical_table(&r, &c, 1e-11).unwrap();
        let gt = typical_objective(&t.entries);
        let (rs, cs) = (t.row_marginal.values().to_vec(), t.col_marginal.values().to_vec());
        let best_sample = (0..400)
            .map(|_| typical_objective(&sample_transport_3(&mut rng, &rs, &cs)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best_sample <= gt);
        // The sampled maximum should come close to the optimum.
        assert!(gt - best_sample < 0.05);
    }
}

#[test]
fn typical_and_independence_differ_but_agree_on_uniform() {
    let u = Histogram::uniform(5).unwrap();
    let t = typical_table(&u, &u, 1e-10).unwrap();
    let i = independence_table(&u, &u).unwrap();
    assert!(fro(&t.entries, &i.entries) < 1e-12);

    let r = Histogram::new(vec![0.7, 0.2, 0.1]).unwrap();
    let c = Histogram::new(vec![0.1, 0.1, 0.8]).unwrap();
    let t = typical_table(&r, &c, 1e-10).unwrap();
    let i = independence_table(&r, &c).unwrap();
    assert!(fro(&t.entries, &i.entries) > 1e-4);
    assert!(typical_objective(&t.entries) >= typical_objective(&i.entries));
    // The independence table maximizes entropy instead.
    assert!(entropy(&i).unwrap() >= entropy(&t).unwrap());
}

#[test]
fn dual_gradient_matches_finite_differences() {
    let mut rng = rng(31);
    let r = smooth_histogram(&mut rng, 4, 0.05);
    let c = smooth_histogram(&mut rng, 4, 0.05);
    let dual = TypicalDual::new(r.values(), c.values());
    let u = vec![2.0, 2.5, 3.0, 2.2];
    let v = vec![1.8, 2.1, 2.9, 2.4];
    let g = dual.gradient(&u, &v);
    let h = 1e-6;
    for k in 0..8 {
        let (mut up, mut vp, mut um, mut vm) = (u.clone(), v.clone(), u.clone(), v.clone());
        if k < 4 {
            up[k] += h;
            um[k] -= h;
        } else {
            vp[k - 4] += h;
            vm[k - 4] -= h;
        }
        let fd = (dual.value(&up, &vp).unwrap() - dual.value(&um, &vm).unwrap()) / (2.0 * h);
        assert!((fd - g[k]).abs() < 1e-6, "coordinate {k}: {fd} vs {}", g[k]);
    }
}

#[test]
fn sparse_inputs_are_smoothed() {
    let r = Histogram::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let c = Histogram::new(vec![0.0, 0.5, 0.5, 0.0]).unwrap();
    let sol = solve_typical(&r, &c, 1e-10).unwrap();
    assert_eq!(sol.table.row_marginal, r.smoothed(TYPICAL_SMOOTHING));
    assert!(sol.table.entries.iter().all(|&x| x > 0.0));
    assert!(sol.table.marginal_error() < 1e-9);
    assert!(sol.gradient_norm <= 1e-10);
}
