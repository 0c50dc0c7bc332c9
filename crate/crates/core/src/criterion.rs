//! Training sets and the neighborhood criterion `C_k`.
//!
//! For each histogram `r_i`, `S+_ik` sums `w_ij d_M(r_i, r_j)` over its `k`
//! nearest similar neighbors (`w_ij > 0`) and `S-_ik` over its `k` nearest
//! dissimilar ones (`w_ij < 0`). `C_k = sum_i S+_ik + S-_ik`. Since every
//! `d_M(r_i, r_j)` is concave in `M`, `S-_k` is convex and `S+_k` concave,
//! and optimal transport plans give (super)gradients of both.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricMatrix, UpperTriVector};
use crate::transport::{solve_transport, Basis, Histogram};

/// Which side of the weights a neighbor sum runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    /// `w_ij > 0`
    Similar,
    /// `w_ij < 0`
    Dissimilar,
}

impl Sign {
    fn matches(self, w: f64) -> bool {
        match self {
            Sign::Similar => w > 0.0,
            Sign::Dissimilar => w < 0.0,
        }
    }
}

/// Neighborhood size `k`, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "NeighborCountRepr", into = "NeighborCountRepr")]
pub enum NeighborCount {
    Finite(usize),
    All,
}

impl NeighborCount {
    /// How many of `available` candidates are kept.
    pub fn take(self, available: usize) -> usize {
        match self {
            NeighborCount::Finite(k) => k.min(available),
            NeighborCount::All => available,
        }
    }
}

impl fmt::Display for NeighborCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeighborCount::Finite(k) => write!(f, "{k}"),
            NeighborCount::All => write!(f, "all"),
        }
    }
}

impl FromStr for NeighborCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "inf" | "infinity" => Ok(NeighborCount::All),
            other => match other.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(NeighborCount::Finite(k)),
                _ => Err(Error::InvalidParameter(format!(
                    "neighborhood size must be a positive integer or \"all\", got {s:?}"
                ))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NeighborCountRepr {
    Int(usize),
    Str(String),
}

impl TryFrom<NeighborCountRepr> for NeighborCount {
    type Error = Error;

    fn try_from(r: NeighborCountRepr) -> Result<Self> {
        match r {
            NeighborCountRepr::Int(k) => k.to_string().parse(),
            NeighborCountRepr::Str(s) => s.parse(),
        }
    }
}

impl From<NeighborCount> for NeighborCountRepr {
    fn from(k: NeighborCount) -> Self {
        match k {
            NeighborCount::Finite(k) => NeighborCountRepr::Int(k),
            NeighborCount::All => NeighborCountRepr::Str("all".into()),
        }
    }
}

/// Histograms with a symmetric similarity matrix.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    histograms: Vec<Histogram>,
    weights: Array2<f64>,
}

impl TrainingSet {
    pub fn new(histograms: Vec<Histogram>, weights: Array2<f64>) -> Result<Self> {
        let n = histograms.len();
        if n < 2 {
            return Err(Error::InvalidWeights(format!("need at least two histograms, got {n}")));
        }
        let d = histograms[0].dim();
        if let Some(h) = histograms.iter().find(|h| h.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: h.dim() });
        }
        if weights.dim() != (n, n) {
            return Err(Error::InvalidWeights(format!(
                "weight matrix is {:?}, expected ({n}, {n})",
                weights.dim()
            )));
        }
        for i in 0..n {
            if weights[[i, i]] != 0.0 {
                return Err(Error::InvalidWeights(format!("diagonal weight {i} is nonzero")));
            }
            for j in 0..n {
                let w = weights[[i, j]];
                if !w.is_finite() {
                    return Err(Error::InvalidWeights(format!("weight ({i}, {j}) is not finite")));
                }
                if (w - weights[[j, i]]).abs() > 1e-12 * w.abs().max(1.0) {
                    return Err(Error::InvalidWeights(format!("weights ({i}, {j}) are asymmetric")));
                }
            }
        }
        Ok(TrainingSet { histograms, weights })
    }

    /// Raw class weights: `+1` within a class, `-1` across classes.
    pub fn from_labels<L: PartialEq>(histograms: Vec<Histogram>, labels: &[L]) -> Result<Self> {
        let n = histograms.len();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
        }
        let weights = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                0.0
            } else if labels[i] == labels[j] {
                1.0
            } else {
                -1.0
            }
        });
        TrainingSet::new(histograms, weights)
    }

    pub fn histograms(&self) -> &[Histogram] {
        &self.histograms
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.histograms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histograms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.histograms[0].dim()
    }

    /// Pairs `i < j` whose weight has the given sign.
    pub fn pairs(&self, sign: Sign) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| sign.matches(self.weights[[i, j]]))
            .collect()
    }

    /// Indices `j` with `w_ij` of the given sign, ascending.
    pub fn candidates(&self, i: usize, sign: Sign) -> Vec<usize> {
        (0..self.len()).filter(|&j| j != i && sign.matches(self.weights[[i, j]])).collect()
    }

    pub fn with_weights(&self, weights: Array2<f64>) -> Result<Self> {
        TrainingSet::new(self.histograms.clone(), weights)
    }
}

/// Rescales positive weights to sum to one and negative weights to sum to
/// minus one over pairs `i < j`.
pub fn normalize_weights(train: &TrainingSet) -> Result<TrainingSet> {
    let n = train.len();
    let w = train.weights();
    let (mut pos, mut neg) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            if w[[i, j]] > 0.0 {
                pos += w[[i, j]];
            } else {
                neg -= w[[i, j]];
            }
        }
    }
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::InvalidWeights(
            "need at least one positive and one negative weight".into(),
        ));
    }
    let scaled = w.mapv(|x| if x > 0.0 { x / pos } else { x / neg });
    train.with_weights(scaled)
}

/// Transport bases kept per pair `(i, j)`, `i < j`, between evaluations.
#[derive(Debug, Clone, Default)]
pub struct WarmStarts(HashMap<(usize, usize), Basis>);

impl WarmStarts {
    pub fn get(&self, i: usize, j: usize) -> Option<&Basis> {
        self.0.get(&(i, j))
    }

    pub fn insert(&mut self, i: usize, j: usize, basis: Basis) {
        self.0.insert((i, j), basis);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Value and subgradient of one neighbor sum.
#[derive(Debug, Clone)]
pub struct SubgradEval {
    /// `z = sum w_ij d_M(r_i, r_j)` over selected neighbors.
    pub value: f64,
    /// `sum w_ij X*_ij` symmetrized onto the upper triangle.
    pub subgrad: UpperTriVector,
    /// Optimal bases of every pair solved, for warm starts.
    pub plans: WarmStarts,
    /// Pivots spent across all solves.
    pub pivots: usize,
}

/// Evaluates `S+_k` or `S-_k` at `metric` together with a subgradient.
///
/// Neighbors are ranked by `d_M` at this `metric`, with ties going to the
/// smaller index. When `k` exceeds the number of candidates, all are kept.
pub fn eval_neighbor_sum(
    train: &TrainingSet,
    metric: &MetricMatrix,
    sign: Sign,
    k: NeighborCount,
    warm: Option<&WarmStarts>,
) -> Result<SubgradEval> {
    let d = train.dim();
    if metric.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: metric.dim() });
    }
    let pairs = train.pairs(sign);
    let hist = train.histograms();
    let solved: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let basis = warm.and_then(|w| w.get(i, j));
            solve_transport(metric.as_array(), &hist[i], &hist[j], basis)
                .map_err(|e| Error::PairSolve { i, j, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let n = train.len();
    let mut by_node: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (slot, &(i, j)) in pairs.iter().enumerate() {
        by_node[i].push((j, slot));
        by_node[j].push((i, slot));
    }

    let mut value = 0.0;
    let mut subgrad = UpperTriVector::zeros(d);
    let w = train.weights();
    for (i, cands) in by_node.iter_mut().enumerate() {
        cands.sort_by(|a, b| solved[a.1].value.total_cmp(&solved[b.1].value).then(a.0.cmp(&b.0)));
        let keep = k.take(cands.len());
        for &(j, slot) in &cands[..keep] {
            let wij = w[[i, j]];
            let res = &solved[slot];
            value += wij * res.value;
            let g = subgrad.values_mut();
            for &(p, q) in res.basis.arcs() {
                if p != q {
                    let x = res.plan.entries[[p, q]];
                    g[UpperTriVector::index(d, p.min(q), p.max(q))] += wij * x;
                }
            }
        }
    }

    let mut plans = WarmStarts::default();
    let mut pivots = 0;
    for (&(i, j), res) in pairs.iter().zip(solved) {
        pivots += res.pivots;
        plans.insert(i, j, res.basis);
    }
    Ok(SubgradEval { value, subgrad, plans, pivots })
}

/// `C_k(M) = S+_k(M) + S-_k(M)`.
pub fn eval_criterion(train: &TrainingSet, metric: &MetricMatrix, k: NeighborCount) -> Result<f64> {
    let plus = eval_neighbor_sum(train, metric, Sign::Similar, k, None)?;
    let minus = eval_neighbor_sum(train, metric, Sign::Dissimilar, k, None)?;
    Ok(plus.value + minus.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::uniform_metric;
    use crate::transport::emd;

    fn toy() -> TrainingSet {
        let h = |v: &[f64]| Histogram::new(v.to_vec()).unwrap();
        let hist = vec![
            h(&[0.6, 0.3, 0.1]),
            h(&[0.5, 0.4, 0.1]),
            h(&[0.1, 0.2, 0.7]),
            h(&[0.2, 0.1, 0.7]),
        ];
        normalize_weights(&TrainingSet::from_labels(hist, &[0, 0, 1, 1]).unwrap()).unwrap()
    }

    #[test]
    fn normalization_of_two_by_two_classes() {
        let t = toy();
        let w = t.weights();
        assert_eq!(w[[0, 1]], 0.5);
        assert_eq!(w[[2, 3]], 0.5);
        assert_eq!(w[[0, 2]], -0.25);
        assert_eq!(w[[1, 3]], -0.25);
        let again = normalize_weights(&t).unwrap();
        assert_eq!(again.weights(), t.weights());
    }

    #[test]
    fn normalization_of_balanced_sixty() {
        let hist = vec![Histogram::uniform(2).unwrap(); 60];
        let labels: Vec<usize> = (0..60).map(|i| i / 30).collect();
        let t = normalize_weights(&TrainingSet::from_labels(hist, &labels).unwrap()).unwrap();
        assert!((t.weights()[[0, 1]] - 1.0 / 870.0).abs() < 1e-18);
        assert!((t.weights()[[0, 59]] + 1.0 / 900.0).abs() < 1e-18);
    }

    #[test]
    fn normalization_needs_both_signs() {
        let hist = vec![Histogram::uniform(2).unwrap(); 3];
        let t = TrainingSet::from_labels(hist, &[1, 1, 1]).unwrap();
        assert!(normalize_weights(&t).is_err());
    }

    #[test]
    fn rejects_malformed_weights() {
        let hist = vec![Histogram::uniform(2).unwrap(); 2];
        assert!(TrainingSet::new(hist.clone(), Array2::eye(2)).is_err());
        let asym = ndarray::array![[0.0, 1.0], [-1.0, 0.0]];
        assert!(TrainingSet::new(hist, asym).is_err());
    }

    #[test]
    fn single_dissimilar_pair() {
        let r1 = Histogram::new(vec![0.7, 0.2, 0.1]).unwrap();
        let r2 = Histogram::new(vec![0.1, 0.3, 0.6]).unwrap();
        let w = ndarray::array![[0.0, -1.0], [-1.0, 0.0]];
        let t = TrainingSet::new(vec![r1.clone(), r2.clone()], w).unwrap();
        let m = uniform_metric(3).unwrap();
        let e = eval_neighbor_sum(&t, &m, Sign::Dissimilar, NeighborCount::All, None).unwrap();
        // Each endpoint counts the pair once.
        assert!((e.value + 2.0 * emd(&m, &r1, &r2).unwrap()).abs() < 1e-12);
        let plus = eval_neighbor_sum(&t, &m, Sign::Similar, NeighborCount::All, None).unwrap();
        assert_eq!(plus.value, 0.0);
        assert!(plus.plans.is_empty());
    }

    #[test]
    fn zero_metric_gives_zero() {
        let t = toy();
        let z = MetricMatrix::zeros(3);
        assert_eq!(eval_criterion(&t, &z, NeighborCount::Finite(1)).unwrap(), 0.0);
    }

    #[test]
    fn neighbor_count_parsing() {
        assert_eq!("all".parse::<NeighborCount>().unwrap(), NeighborCount::All);
        assert_eq!("3".parse::<NeighborCount>().unwrap(), NeighborCount::Finite(3));
        assert!("0".parse::<NeighborCount>().is_err());
        assert_eq!(NeighborCount::Finite(3).take(2), 2);
    }
}
