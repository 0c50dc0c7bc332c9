mod common;

use common::*;
use gml_core::{
    emd, eval_criterion, eval_neighbor_sum, normalize_weights, uniform_metric, Histogram, NeighborCount, Sign,
    TrainingSet, UpperTriVector, WarmStarts,
};
use ndarray::Array2;

fn dataset(seed: u64, n: usize, d: usize) -> TrainingSet {
    let mut rng = rng(seed);
    let hist: Vec<Histogram> = (0..n).map(|_| random_histogram(&mut rng, d, false)).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    TrainingSet::from_labels(hist, &labels).unwrap()
}

#[test]
fn all_neighbors_equals_any_large_k() {
    let train = normalize_weights(&dataset(40, 9, 5)).unwrap();
    let m = interior_metric(&mut rng(41), 5);
    let all = eval_criterion(&train, &m, NeighborCount::All).unwrap();
    for k in [8, 9, 50] {
        assert!((eval_criterion(&train, &m, NeighborCount::Finite(k)).unwrap() - all).abs() < 1e-14);
    }
}

#[test]
fn all_neighbors_is_the_weighted_pair_sum_counted_twice() {
    let train = dataset(42, 7, 4);
    let m = interior_metric(&mut rng(43), 4);
    let h = train.histograms();
    let w = train.weights();
    let mut direct = 0.0;
    for i in 0..h.len() {
        for j in 0..h.len() {
            if i != j {
                direct += w[[i, j]] * emd(&m, &h[i], &h[j]).unwrap();
            }
        }
    }
    let c = eval_criterion(&train, &m, NeighborCount::All).unwrap();
    assert!((c - direct).abs() < 1e-12);
}

#[test]
fn neighbor_sum_keeps_the_k_closest() {
    let train = dataset(44, 8, 4);
    let m = interior_metric(&mut rng(45), 4);
    let h = train.histograms();
    let k = 2;
    let mut direct = 0.0;
    for i in 0..h.len() {
        let mut ds: Vec<f64> =
            train.candidates(i, Sign::Similar).iter().map(|&j| emd(&m, &h[i], &h[j]).unwrap()).collect();
        ds.sort_by(f64::total_cmp);
        direct += ds.iter().take(k).sum::<f64>();
    }
    let s = eval_neighbor_sum(&train, &m, Sign::Similar, NeighborCount::Finite(k), None).unwrap();
    assert!((s.value - direct).abs() < 1e-12);
}

#[test]
fn subgradient_pairs_with_metric_to_give_the_value() {
    // Each neighbor sum is positively homogeneous, so <G, M> equals its value.
    let train = normalize_weights(&dataset(46, 10, 6)).unwrap();
    let m = random_metric(&mut rng(47), 6, 1e-11);
    for sign in [Sign::Similar, Sign::Dissimilar] {
        let s = eval_neighbor_sum(&train, &m, sign, NeighborCount::Finite(3), None).unwrap();
        assert!((s.subgrad.dot(&m.upper()) - s.value).abs() < 1e-12);
    }
}

#[test]
fn supergradient_inequality_holds() {
    let train = normalize_weights(&dataset(48, 9, 5)).unwrap();
    let mut rng = rng(49);
    for _ in 0..40 {
        let a = random_metric(&mut rng, 5, 1e-11).into_unit_ball();
        let b = random_metric(&mut rng, 5, 1e-11).into_unit_ball();
        let k = NeighborCount::Finite(2);
        let sa = eval_neighbor_sum(&train, &a, Sign::Similar, k, None).unwrap();
        let sb = eval_neighbor_sum(&train, &b, Sign::Similar, k, None).unwrap();
        let step = UpperTriVector::from_matrix(&(b.as_array() - a.as_array()));
        assert!(sb.value <= sa.value + sa.subgrad.dot(&step) + 1e-12);
    }
}

#[test]
fn warm_starts_do_not_change_values() {
    let train = normalize_weights(&dataset(50, 10, 6)).unwrap();
    let mut rng = rng(51);
    let a = interior_metric(&mut rng, 6);
    let b = interior_metric(&mut rng, 6);
    let k = NeighborCount::Finite(3);
    let first = eval_neighbor_sum(&train, &a, Sign::Dissimilar, k, None).unwrap();
    let warm = eval_neighbor_sum(&train, &b, Sign::Dissimilar, k, Some(&first.plans)).unwrap();
    let cold = eval_neighbor_sum(&train, &b, Sign::Dissimilar, k, Some(&WarmStarts::default())).unwrap();
    assert!((warm.value - cold.value).abs() < 1e-13);
    assert_eq!(warm.plans.len(), train.pairs(Sign::Dissimilar).len());
}

#[test]
fn uniform_metric_criterion_is_half_l1() {
    let train = dataset(52, 6, 8);
    let h = train.histograms();
    let value = eval_neighbor_sum(&train, &uniform_metric(8).unwrap(), Sign::Similar, NeighborCount::All, None)
        .unwrap()
        .value;
    let mut direct = 0.0;
    for (i, j) in train.pairs(Sign::Similar) {
        direct += 2.0 * train.weights()[[i, j]] * half_l1(&h[i], &h[j]);
    }
    assert!((value - direct).abs() < 1e-12);
}

#[test]
fn invalid_training_sets_are_rejected() {
    let h = vec![Histogram::uniform(3).unwrap(), Histogram::uniform(3).unwrap()];
    let asym = ndarray::array![[0.0, 1.0], [-1.0, 0.0]];
    assert!(TrainingSet::new(h.clone(), asym).is_err());
    let diag = ndarray::array![[1.0, 1.0], [1.0, 0.0]];
    assert!(TrainingSet::new(h.clone(), diag).is_err());
    assert!(TrainingSet::new(h.clone(), Array2::zeros((3, 3))).is_err());
    let same = TrainingSet::from_labels(h, &[1, 1]).unwrap();
    assert!(normalize_weights(&same).is_err());
    assert!("0".parse::<NeighborCount>().is_err());
    assert_eq!("all".parse::<NeighborCount>().unwrap(), NeighborCount::All);
}
