//! Reference transport tables: the independence table `r c^T` and the
//! maximum-entropy-like typical table, plus the weighted aggregate `Xi`
//! used to pick a starting ground metric.

mod typical;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{NeighborCount, Sign, TrainingSet};
use crate::error::{Error, Result};
use crate::transport::{Histogram, TransportPlan};

pub use typical::{
    solve_typical, typical_objective, typical_table, TypicalDual, TypicalSolution,
    TypicalSolverState, DEFAULT_TYPICAL_TOL, TYPICAL_SMOOTHING,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Independence,
    Typical,
}

impl std::str::FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independence" | "indep" => Ok(TableKind::Independence),
            "typical" => Ok(TableKind::Typical),
            _ => Err(Error::InvalidParameter(format!("unknown table kind {s:?}"))),
        }
    }
}

pub fn independence_table(r: &Histogram, c: &Histogram) -> Result<TransportPlan> {
    if r.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: r.dim(), found: c.dim() });
    }
    let d = r.dim();
    let (rv, cv) = (r.values(), c.values());
    Ok(TransportPlan {
        entries: Array2::from_shape_fn((d, d), |(i, j)| rv[i] * cv[j]),
        row_marginal: r.clone(),
        col_marginal: c.clone(),
    })
}

/// Shannon entropy `-sum p log p` of a table, with `0 log 0 = 0`.
pub fn entropy(plan: &TransportPlan) -> Result<f64> {
    let mut h = 0.0;
    for ((i, j), &p) in plan.entries.indexed_iter() {
        if p < 0.0 || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("table entry ({i}, {j}) = {p} is not >= 0")));
        }
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    Ok(h)
}

fn table(kind: TableKind, r: &Histogram, c: &Histogram) -> Result<Array2<f64>> {
    Ok(match kind {
        TableKind::Independence => independence_table(r, c)?.entries,
        TableKind::Typical => typical_table(r, c, DEFAULT_TYPICAL_TOL)?.entries,
    })
}

/// Half the l1 distance, which is the transport distance under the uniform
/// metric.
fn half_l1(a: &Histogram, b: &Histogram) -> f64 {
    0.5 * a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `Xi = sum_i sum_{j in N_i} w_ij T(r_i, r_j)`, where `N_i` holds the `k`
/// nearest similar and `k` nearest dissimilar neighbors of `r_i` under the
/// uniform metric. With `k = All` every ordered pair contributes.
pub fn aggregate_xi(train: &TrainingSet, k: NeighborCount, kind: TableKind) -> Result<Array2<f64>> {
    let n = train.len();
    let d = train.dim();
    let hist = train.histograms();
    // forward[i][j] is true when j is a selected neighbor of i.
    let mut forward = vec![vec![false; n]; n];
    for (i, row) in forward.iter_mut().enumerate() {
        for sign in [Sign::Similar, Sign::Dissimilar] {
            let mut cands: Vec<(f64, usize)> =
                train.candidates(i, sign).into_iter().map(|j| (half_l1(&hist[i], &hist[j]), j)).collect();
            if cands.is_empty() {
                log::warn!("histogram {i} has no {sign:?} neighbors");
                continue;
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in &cands[..k.take(cands.len())] {
                row[j] = true;
            }
        }
    }

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| forward[i][j] || forward[j][i])
        .collect();
    let tables: Vec<Array2<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            table(kind, &hist[i], &hist[j]).map_err(|e| Error::PairSolve { i, j, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let w = train.weights();
    let mut xi = Array2::zeros((d, d));
    for (&(i, j), t) in pairs.iter().zip(&tables) {
        let wij = w[[i, j]];
        if forward[i][j] {
            xi.scaled_add(wij, t);
        }
        if forward[j][i] {
            // T(r_j, r_i) is the transpose of T(r_i, r_j) for both kinds.
            xi.scaled_add(wij, &t.t());
        }
    }
    Ok(xi)
}
