//! Exact transportation distances.
//!
//! [`solve_transport`] solves `min <A, X>` over the transportation polytope
//! `U(r, c)` with a network simplex on the complete bipartite graph between
//! the bins of `r` and the bins of `c`. Every returned plan is a basic
//! solution (a spanning tree of that graph) and the final [`Basis`] can be
//! handed back to warm start a solve with the same marginals and a new cost.

mod brute;
mod simplex;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricMatrix;

pub use brute::{brute_force_transport, BRUTE_FORCE_MAX_DIM};
pub use simplex::Basis;

/// Allowed deviation of a histogram's total mass from one.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A point of the probability simplex.
///
/// Entries are nonnegative and sum to one. Construction rescales the entries
/// by their sum so that the stored mass is one up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Histogram(Vec<f64>);

impl Histogram {
    /// Builds a histogram whose mass is within [`MASS_TOLERANCE`] of one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, MASS_TOLERANCE)
    }

    /// Builds a histogram, accepting a total mass within `tol` of one.
    pub fn with_tolerance(values: Vec<f64>, tol: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidHistogram(format!(
                "dimension must be at least 2, got {}",
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidHistogram(format!("entry {i} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::InvalidHistogram(format!("entry {i} is negative ({v})")));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidHistogram(format!("mass is {sum}, expected 1")));
        }
        Ok(Histogram(values.into_iter().map(|v| v / sum).collect()))
    }

    /// The uniform histogram on `d` bins.
    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Mixes the histogram with the uniform distribution: `(1 - eps) h + eps / d`.
    pub fn smoothed(&self, eps: f64) -> Histogram {
        let d = self.dim() as f64;
        let mixed: Vec<f64> = self.0.iter().map(|&v| (1.0 - eps) * v + eps / d).collect();
        let sum: f64 = mixed.iter().sum();
        Histogram(mixed.into_iter().map(|v| v / sum).collect())
    }
}

impl TryFrom<Vec<f64>> for Histogram {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Histogram::new(values)
    }
}

impl From<Histogram> for Vec<f64> {
    fn from(h: Histogram) -> Self {
        h.0
    }
}

/// A coupling between two histograms: a nonnegative matrix with the given
/// row and column marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub entries: Array2<f64>,
    pub row_marginal: Histogram,
    pub col_marginal: Histogram,
}

impl TransportPlan {
    pub fn dim(&self) -> usize {
        self.row_marginal.dim()
    }

    /// Number of entries strictly greater than `threshold`.
    pub fn support_size(&self, threshold: f64) -> usize {
        self.entries.iter().filter(|&&x| x > threshold).count()
    }

    /// Largest absolute deviation of the row and column sums from the marginals.
    pub fn marginal_error(&self) -> f64 {
        let rows = self.entries.rows().into_iter().map(|row| row.sum());
        let cols = self.entries.columns().into_iter().map(|col| col.sum());
        let row_err = rows
            .zip(self.row_marginal.values())
            .map(|(s, r)| (s - r).abs())
            .fold(0.0, f64::max);
        let col_err = cols
            .zip(self.col_marginal.values())
            .map(|(s, c)| (s - c).abs())
            .fold(0.0, f64::max);
        row_err.max(col_err)
    }

    /// Frobenius dot product with a cost matrix.
    pub fn cost(&self, cost: &Array2<f64>) -> f64 {
        self.entries.iter().zip(cost.iter()).map(|(x, a)| x * a).sum()
    }
}

/// Output of an exact transportation solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Optimal objective `<A, X*>`.
    pub value: f64,
    pub plan: TransportPlan,
    /// Final spanning-tree basis, reusable as a warm start for the same marginals.
    pub basis: Basis,
    /// Number of simplex pivots performed.
    pub pivots: usize,
}

pub(crate) fn check_cost(cost: &Array2<f64>, d: usize) -> Result<()> {
    let (rows, cols) = cost.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows != d {
        return Err(Error::DimensionMismatch { expected: d, found: rows });
    }
    if let Some(((i, j), _)) = cost.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(i, j));
    }
    Ok(())
}

pub(crate) fn check_marginals(r: &Histogram, c: &Histogram) -> Result<usize> {
    if r.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: r.dim(), found: c.dim() });
    }
    Ok(r.dim())
}

/// Solves the transportation LP `min_{X in U(r,c)} <cost, X>` exactly.
///
/// `warm` may carry the basis of a previous solve with the same `(r, c)`;
/// a basis that is not feasible for these marginals is ignored.
pub fn solve_transport(
    cost: &Array2<f64>,
    r: &Histogram,
    c: &Histogram,
    warm: Option<&Basis>,
) -> Result<SolveResult> {
    let d = check_marginals(r, c)?;
    check_cost(cost, d)?;
    let flat: Vec<f64> = cost.iter().copied().collect();
    let outcome = simplex::solve(&flat, r.values(), c.values(), warm)?;
    let mut entries = Array2::zeros((d, d));
    for (&(i, j), &x) in outcome.basis.arcs().iter().zip(&outcome.flows) {
        entries[[i, j]] += x;
    }
    let plan = TransportPlan { entries, row_marginal: r.clone(), col_marginal: c.clone() };
    let value = plan.cost(cost);
    Ok(SolveResult { value, plan, basis: outcome.basis, pivots: outcome.pivots })
}

/// Earth mover's distance `d_M(r, c)` for a ground metric `M`.
pub fn emd(metric: &MetricMatrix, r: &Histogram, c: &Histogram) -> Result<f64> {
    Ok(solve_transport(metric.as_array(), r, c, None)?.value)
}
