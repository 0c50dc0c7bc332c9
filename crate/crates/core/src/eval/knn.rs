use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;

use super::dataset::LabeledDataset;
use super::distance::HistogramDistance;
use crate::error::{Error, Result};
use crate::transport::Histogram;

/// Recall and classification error for `kappa = 1..=kappa_max`; entry
/// `kappa - 1` belongs to `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnCurves {
    pub recall: Vec<f64>,
    pub error: Vec<f64>,
}

impl KnnCurves {
    pub fn kappa_max(&self) -> usize {
        self.recall.len()
    }

    pub fn recall_at(&self, kappa: usize) -> f64 {
        self.recall[kappa - 1]
    }

    pub fn error_at(&self, kappa: usize) -> f64 {
        self.error[kappa - 1]
    }
}

/// `D[t, s] = dist(test[t], train[s])`, rows computed in parallel.
pub fn pairwise_distances(
    dist: &dyn HistogramDistance,
    test: &[Histogram],
    train: &[Histogram],
) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = test
        .par_iter()
        .map(|t| train.iter().map(|s| dist.distance(t, s)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((test.len(), train.len()));
    for (t, row) in rows.into_iter().enumerate() {
        for (s, v) in row.into_iter().enumerate() {
            out[[t, s]] = v;
        }
    }
    Ok(out)
}

/// kNN curves from a precomputed test-by-train distance matrix.
///
/// Neighbors are ordered by distance, then by training index. The vote at
/// each `kappa` goes to the most frequent label, ties toward the smaller one.
pub fn knn_from_distances(
    dists: &Array2<f64>,
    train_labels: &[i64],
    test_labels: &[i64],
    kappa_max: usize,
) -> Result<KnnCurves> {
    let (n_test, n_train) = dists.dim();
    if train_labels.len() != n_train || test_labels.len() != n_test {
        return Err(Error::DimensionMismatch { expected: n_train, found: train_labels.len() });
    }
    if kappa_max == 0 || kappa_max > n_train {
        return Err(Error::KappaTooLarge { kappa: kappa_max, available: n_train });
    }
    if n_test == 0 {
        return Err(Error::Dataset("no test points".into()));
    }
    let mut hits = vec![0.0; kappa_max];
    let mut wrong = vec![0usize; kappa_max];
    for (t, &truth) in test_labels.iter().enumerate() {
        let row = dists.row(t);
        let mut order: Vec<usize> = (0..n_train).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
        let mut same = 0usize;
        for (kk, &s) in order[..kappa_max].iter().enumerate() {
            let l = train_labels[s];
            *votes.entry(l).or_default() += 1;
            if l == truth {
                same += 1;
            }
            let kappa = kk + 1;
            hits[kk] += same as f64 / kappa as f64;
            // BTreeMap iterates labels in increasing order; keep the first maximum.
            let mut winner = (i64::MAX, 0usize);
            for (&label, &count) in &votes {
                if count > winner.1 {
                    winner = (label, count);
                }
            }
            if winner.0 != truth {
                wrong[kk] += 1;
            }
        }
    }
    let m = n_test as f64;
    Ok(KnnCurves {
        recall: hits.into_iter().map(|h| h / m).collect(),
        error: wrong.into_iter().map(|w| w as f64 / m).collect(),
    })
}

pub fn knn_eval(dist: &dyn HistogramDistance, data: &LabeledDataset, kappa_max: usize) -> Result<KnnCurves> {
    let (train, train_labels) = data.train();
    let (test, test_labels) = data.test();
    if kappa_max > train.len() {
        return Err(Error::KappaTooLarge { kappa: kappa_max, available: train.len() });
    }
    let d = pairwise_distances(dist, &test, &train)?;
    knn_from_distances(&d, &train_labels, &test_labels, kappa_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{Baseline, Split};

    fn h(v: &[f64]) -> Histogram {
        Histogram::new(v.to_vec()).unwrap()
    }

    #[test]
    fn separated_clusters() {
        let data = LabeledDataset::new(
            vec![h(&[1.0, 0.0]), h(&[0.0, 1.0]), h(&[0.9, 0.1]), h(&[0.1, 0.9])],
            vec![0, 1, 0, 1],
            vec![Split::Train, Split::Train, Split::Test, Split::Test],
        )
        .unwrap();
        let c = knn_eval(&Baseline::L1, &data, 2).unwrap();
        assert_eq!(c.recall_at(1), 1.0);
        assert_eq!(c.error_at(1), 0.0);
        // At kappa = 2 both labels get one vote and the tie goes to label 0.
        assert_eq!(c.recall_at(2), 0.5);
        assert_eq!(c.error_at(2), 0.5);
        assert!(matches!(knn_eval(&Baseline::L1, &data, 3), Err(Error::KappaTooLarge { .. })));
    }

    #[test]
    fn distance_ties_prefer_smaller_index() {
        let d = ndarray::array![[1.0, 1.0, 2.0]];
        let c = knn_from_distances(&d, &[5, 3, 3], &[5], 1).unwrap();
        assert_eq!(c.error_at(1), 0.0);
        let c = knn_from_distances(&d, &[3, 5, 5], &[5], 1).unwrap();
        assert_eq!(c.error_at(1), 1.0);
    }

    #[test]
    fn recall_at_one_is_one_minus_error() {
        let d = ndarray::array![[0.3, 0.1, 0.5], [0.2, 0.9, 0.4], [0.7, 0.6, 0.1]];
        let c = knn_from_distances(&d, &[0, 1, 1], &[1, 0, 0], 3).unwrap();
        assert!((c.recall_at(1) - (1.0 - c.error_at(1))).abs() < 1e-15);
    }
}
