//! The cone of metric matrices and projections onto it.

mod projection;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use projection::{
    project_feasible, regularized_projection, triangle_fix, triangle_fix_report,
    ProjectionOptions, ProjectionReport,
};

/// Tolerance used when checking the metric axioms.
pub const METRIC_TOLERANCE: f64 = 1e-7;

/// A `d x d` matrix in the metric cone: zero diagonal, symmetric,
/// nonnegative, and satisfying every triangle inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix(Array2<f64>);

impl MetricMatrix {
    /// Validates `entries` against the metric axioms at tolerance `tol`.
    pub fn new(entries: Array2<f64>, tol: f64) -> Result<Self> {
        let (ok, violations) = is_metric(&entries, tol);
        if !ok {
            let first = violations.first().map(|v| format!("{v:?}")).unwrap_or_default();
            return Err(Error::InvalidMetric(format!(
                "{} violated constraints, first: {first}",
                violations.len()
            )));
        }
        Ok(MetricMatrix(entries))
    }

    /// Wraps a matrix already known to be in the cone.
    pub(crate) fn from_trusted(entries: Array2<f64>) -> Self {
        MetricMatrix(entries)
    }

    pub fn zeros(d: usize) -> Self {
        MetricMatrix(Array2::zeros((d, d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.0)
    }

    /// `t * M`, still a metric for `t >= 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be >= 0, got {t}")));
        }
        Ok(MetricMatrix(&self.0 * t))
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &MetricMatrix, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("mixing weight {alpha} not in [0, 1]")));
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(MetricMatrix(&self.0 * alpha + &other.0 * (1.0 - alpha)))
    }

    /// Rescales to unit Frobenius norm when the norm exceeds one.
    pub fn into_unit_ball(self) -> Self {
        let norm = self.frobenius_norm();
        if norm > 1.0 {
            MetricMatrix(self.0 / norm)
        } else {
            self
        }
    }

    pub fn upper(&self) -> UpperTriVector {
        UpperTriVector::from_matrix(&self.0)
    }
}

pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frobenius_dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Strict upper triangle of a `d x d` matrix, enumerated row by row:
/// `(0,1), (0,2), ..., (0,d-1), (1,2), ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriVector {
    dim: usize,
    values: Vec<f64>,
}

impl UpperTriVector {
    pub fn zeros(dim: usize) -> Self {
        UpperTriVector { dim, values: vec![0.0; dim * (dim - 1) / 2] }
    }

    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        let expected = dim * dim.saturating_sub(1) / 2;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: values.len() });
        }
        Ok(UpperTriVector { dim, values })
    }

    pub fn from_matrix(a: &Array2<f64>) -> Self {
        let d = a.nrows();
        let mut values = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                values.push(a[[i, j]]);
            }
        }
        UpperTriVector { dim: d, values }
    }

    /// Symmetric matrix with zero diagonal whose upper triangle is `self`.
    pub fn to_symmetric(&self) -> Array2<f64> {
        let d = self.dim;
        let mut a = Array2::zeros((d, d));
        let mut k = 0;
        for i in 0..d {
            for j in i + 1..d {
                a[[i, j]] = self.values[k];
                a[[j, i]] = self.values[k];
                k += 1;
            }
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn dot(&self, other: &UpperTriVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Position of `(i, j)`, `i < j`, in the enumeration.
    pub fn index(dim: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < dim);
        i * dim - i * (i + 1) / 2 + (j - i - 1)
    }
}

/// A failed metric axiom.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    NonFinite { i: usize, j: usize },
    Diagonal { i: usize, value: f64 },
    Asymmetric { i: usize, j: usize, magnitude: f64 },
    Negative { i: usize, j: usize, value: f64 },
    /// `M_ij > M_ik + M_kj` by `magnitude`.
    Triangle { i: usize, j: usize, k: usize, magnitude: f64 },
}

/// Checks the metric axioms at tolerance `tol`, listing every violation.
pub fn is_metric(h: &Array2<f64>, tol: f64) -> (bool, Vec<Violation>) {
    let (rows, cols) = h.dim();
    if rows != cols {
        return (false, vec![Violation::NotSquare { rows, cols }]);
    }
    let d = rows;
    let mut out = Vec::new();
    for ((i, j), v) in h.indexed_iter() {
        if !v.is_finite() {
            out.push(Violation::NonFinite { i, j });
        }
    }
    if !out.is_empty() {
        return (false, out);
    }
    for i in 0..d {
        if h[[i, i]].abs() > tol {
            out.push(Violation::Diagonal { i, value: h[[i, i]] });
        }
        for j in 0..d {
            if i < j && (h[[i, j]] - h[[j, i]]).abs() > tol {
                out.push(Violation::Asymmetric { i, j, magnitude: (h[[i, j]] - h[[j, i]]).abs() });
            }
            if i != j && h[[i, j]] < -tol {
                out.push(Violation::Negative { i, j, value: h[[i, j]] });
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            for k in 0..d {
                if k == i || k == j {
                    continue;
                }
                let excess = h[[i, j]] - h[[i, k]] - h[[k, j]];
                if excess > tol {
                    out.push(Violation::Triangle { i, j, k, magnitude: excess });
                }
            }
        }
    }
    (out.is_empty(), out)
}

/// The uniform ground metric: zero on the diagonal, one elsewhere.
pub fn uniform_metric(d: usize) -> Result<MetricMatrix> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {d}")));
    }
    Ok(MetricMatrix(Array2::from_shape_fn((d, d), |(i, j)| if i == j { 0.0 } else { 1.0 })))
}
