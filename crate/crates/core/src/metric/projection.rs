//! Euclidean projection onto the metric cone by triangle fixing.
//!
//! The cone is the intersection of halfspaces `x_ij - x_ik - x_kj <= 0` (one
//! per ordered triangle) and `-x_ij <= 0`, written in the strict upper
//! triangle `x` of a symmetric matrix. Dykstra's method cycles over these
//! halfspaces keeping one dual correction per constraint, and converges to
//! the exact projection rather than just some point of the intersection.

use ndarray::Array2;

use super::{MetricMatrix, UpperTriVector};
use crate::error::{Error, Result};

/// Stopping rule for [`triangle_fix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Bound on both the largest constraint violation and the largest
    /// change of an entry over one sweep.
    pub tol: f64,
    /// Sweep limit; `None` means `10 d^3`.
    pub max_sweeps: Option<usize>,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { tol: 1e-7, max_sweeps: None }
    }
}

impl ProjectionOptions {
    pub fn with_tol(tol: f64) -> Self {
        ProjectionOptions { tol, ..Default::default() }
    }

    fn sweep_limit(&self, d: usize) -> usize {
        self.max_sweeps.unwrap_or(10 * d * d * d).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionReport {
    pub metric: MetricMatrix,
    pub sweeps: usize,
    /// Largest constraint violation after the last sweep.
    pub residual: f64,
}

fn check_square_finite(h: &Array2<f64>) -> Result<usize> {
    let (rows, cols) = h.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {rows}")));
    }
    if let Some(((i, j), _)) = h.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(i, j));
    }
    Ok(rows)
}

/// Projects `h` onto the metric cone in Frobenius norm.
///
/// `h` may be asymmetric, signed, and have a nonzero diagonal: its symmetric
/// part with the diagonal zeroed is projected, which gives the same result.
pub fn triangle_fix(h: &Array2<f64>, opts: &ProjectionOptions) -> Result<MetricMatrix> {
    triangle_fix_report(h, opts).map(|r| r.metric)
}

pub fn triangle_fix_report(h: &Array2<f64>, opts: &ProjectionOptions) -> Result<ProjectionReport> {
    let d = check_square_finite(h)?;
    let mut x = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            x.push(0.5 * (h[[i, j]] + h[[j, i]]));
        }
    }
    let triples = triple_edges(d);
    let mut dual_tri = vec![0.0; 3 * triples.len()];
    let mut dual_pos = vec![0.0; x.len()];
    let mut previous = x.clone();
    let limit = opts.sweep_limit(d);
    let mut residual = f64::INFINITY;

    for sweep in 1..=limit {
        previous.copy_from_slice(&x);
        for (t, &[ij, ik, jk]) in triples.iter().enumerate() {
            for (s, (long, a, b)) in [(ij, ik, jk), (ik, ij, jk), (jk, ij, ik)].into_iter().enumerate() {
                let dual = &mut dual_tri[3 * t + s];
                let slack = x[long] - x[a] - x[b];
                let updated = (*dual + slack / 3.0).max(0.0);
                let delta = *dual - updated;
                if delta != 0.0 {
                    x[long] += delta;
                    x[a] -= delta;
                    x[b] -= delta;
                }
                *dual = updated;
            }
        }
        for (e, dual) in dual_pos.iter_mut().enumerate() {
            let updated = (*dual - x[e]).max(0.0);
            x[e] += updated - *dual;
            *dual = updated;
        }

        residual = max_violation(&x, &triples);
        let change = x.iter().zip(&previous).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= opts.tol && change <= opts.tol {
            let metric = MetricMatrix::from_trusted(
                UpperTriVector::from_values(d, x).expect("sized from d").to_symmetric(),
            );
            return Ok(ProjectionReport { metric, sweeps: sweep, residual });
        }
    }
    Err(Error::ProjectionNotConverged { sweeps: limit, residual })
}

/// Upper-triangle positions of the edges `(ij, ik, jk)` of every triple `i < j < k`.
fn triple_edges(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(d * (d - 1) * (d.saturating_sub(2)) / 6);
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                out.push([
                    UpperTriVector::index(d, i, j),
                    UpperTriVector::index(d, i, k),
                    UpperTriVector::index(d, j, k),
                ]);
            }
        }
    }
    out
}

fn max_violation(x: &[f64], triples: &[[usize; 3]]) -> f64 {
    let mut worst = x.iter().fold(0.0f64, |m, &v| m.max(-v));
    for &[ij, ik, jk] in triples {
        worst = worst
            .max(x[ij] - x[ik] - x[jk])
            .max(x[ik] - x[ij] - x[jk])
            .max(x[jk] - x[ij] - x[ik]);
    }
    worst
}

/// Projection onto the cone followed by a radial rescale into the Frobenius
/// unit ball, giving a point of the feasible set.
pub fn project_feasible(h: &Array2<f64>, opts: &ProjectionOptions) -> Result<MetricMatrix> {
    Ok(triangle_fix(h, opts)?.into_unit_ball())
}

/// Minimizes `|| M + (lambda / 2) xi ||^2` over the metric cone.
pub fn regularized_projection(
    xi: &Array2<f64>,
    lambda: f64,
    opts: &ProjectionOptions,
) -> Result<MetricMatrix> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    triangle_fix(&(xi * (-0.5 * lambda)), opts)
}
