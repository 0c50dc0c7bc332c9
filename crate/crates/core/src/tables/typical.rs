//! Typical tables through their convex dual.
//!
//! For marginals `r, c > 0` the typical table is
//! `T_pq = e^{-u_p - v_q} / (1 - e^{-u_p - v_q})` where `(u, v)` minimizes
//!
//! ```text
//! f(u, v) = <r, u> + <c, v> - sum_pq log(1 - e^{-u_p - v_q}).
//! ```
//!
//! The gradient is `(r - T 1, c - T^T 1)`. The Hessian has diagonal blocks
//! `diag(K 1)` and `diag(K^T 1)` and off-diagonal blocks `K`, `K^T` with
//! `K_pq = T_pq (1 + T_pq)`, so a Hessian-vector product costs `O(d^2)`.
//! Newton directions come from preconditioned conjugate gradients on that
//! product. `f` is invariant along `(1, -1)`; the final iterate is shifted
//! along this direction so that both `u` and `v` are positive.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::transport::{Histogram, TransportPlan};

/// Mixing weight with the uniform histogram applied before solving.
pub const TYPICAL_SMOOTHING: f64 = 1e-6;
pub const DEFAULT_TYPICAL_TOL: f64 = 1e-8;
const MAX_NEWTON_STEPS: usize = 100;
const ARMIJO: f64 = 1e-4;

/// Dual variables of the typical-table program.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSolverState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl TypicalSolverState {
    /// Induced table `e^{-s} / (1 - e^{-s})`, `s = u_p + v_q`.
    pub fn table(&self) -> Array2<f64> {
        let d = self.u.len();
        Array2::from_shape_fn((d, d), |(p, q)| 1.0 / (self.u[p] + self.v[q]).exp_m1())
    }
}

#[derive(Debug, Clone)]
pub struct TypicalSolution {
    pub table: TransportPlan,
    pub state: TypicalSolverState,
    pub iterations: usize,
    /// Infinity norm of the dual gradient at the solution.
    pub gradient_norm: f64,
}

/// The convex dual objective for fixed marginals.
#[derive(Debug, Clone)]
pub struct TypicalDual<'a> {
    r: &'a [f64],
    c: &'a [f64],
}

impl<'a> TypicalDual<'a> {
    pub fn new(r: &'a [f64], c: &'a [f64]) -> Self {
        TypicalDual { r, c }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// `f(u, v)`, or `None` outside the domain `u_p + v_q > 0`.
    pub fn value(&self, u: &[f64], v: &[f64]) -> Option<f64> {
        let mut f: f64 = self.r.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
            + self.c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        for &up in u {
            for &vq in v {
                let s = up + vq;
                if !(s > 0.0) {
                    return None;
                }
                f -= (-(-s).exp_m1()).ln();
            }
        }
        Some(f)
    }

    /// Table `T` and curvature weights `K = T (1 + T)`.
    fn table_and_curvature(&self, u: &[f64], v: &[f64]) -> (Array2<f64>, Array2<f64>) {
        let d = self.dim();
        let t = Array2::from_shape_fn((d, d), |(p, q)| 1.0 / (u[p] + v[q]).exp_m1());
        let k = t.mapv(|x| x * (1.0 + x));
        (t, k)
    }

    /// Gradient `(r - T 1, c - T^T 1)` stacked as one vector of length `2d`.
    pub fn gradient(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let (t, _) = self.table_and_curvature(u, v);
        gradient_from_table(self.r, self.c, &t)
    }

    /// Dense Hessian, for checking the structured solver.
    pub fn dense_hessian(&self, u: &[f64], v: &[f64]) -> Array2<f64> {
        let d = self.dim();
        let (_, k) = self.table_and_curvature(u, v);
        let mut h = Array2::zeros((2 * d, 2 * d));
        for p in 0..d {
            h[[p, p]] = k.row(p).sum();
            h[[d + p, d + p]] = k.column(p).sum();
            for q in 0..d {
                h[[p, d + q]] = k[[p, q]];
                h[[d + q, p]] = k[[p, q]];
            }
        }
        h
    }

    /// Newton direction solving `H x = -g` with the structured Hessian.
    pub fn newton_direction(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let (t, k) = self.table_and_curvature(u, v);
        let g = gradient_from_table(self.r, self.c, &t);
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        StructuredHessian::new(k).solve(&rhs)
    }
}

fn gradient_from_table(r: &[f64], c: &[f64], t: &Array2<f64>) -> Vec<f64> {
    let d = r.len();
    let mut g = Vec::with_capacity(2 * d);
    g.extend((0..d).map(|p| r[p] - t.row(p).sum()));
    g.extend((0..d).map(|q| c[q] - t.column(q).sum()));
    g
}

struct StructuredHessian {
    k: Array2<f64>,
    diag: Vec<f64>,
}

impl StructuredHessian {
    fn new(k: Array2<f64>) -> Self {
        let d = k.nrows();
        let mut diag = Vec::with_capacity(2 * d);
        diag.extend((0..d).map(|p| k.row(p).sum()));
        diag.extend((0..d).map(|q| k.column(q).sum()));
        StructuredHessian { k, diag }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.k.nrows();
        let (xu, xv) = x.split_at(d);
        for p in 0..d {
            let row = self.k.row(p);
            out[p] = self.diag[p] * xu[p] + row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        for q in 0..d {
            out[d + q] = self.diag[d + q] * xv[q];
        }
        for p in 0..d {
            let row = self.k.row(p);
            for q in 0..d {
                out[d + q] += row[q] * xu[p];
            }
        }
    }

    /// Jacobi-preconditioned conjugate gradients. The Hessian is singular
    /// along `(1, -1)`, but a gradient right-hand side is orthogonal to it.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let target = 1e-24 * dot(b, b);
        let mut hp = vec![0.0; n];
        for _ in 0..(2 * n + 10) {
            if dot(&r, &r) <= target {
                break;
            }
            self.apply(&p, &mut hp);
            let curv = dot(&p, &hp);
            if !(curv > 0.0) {
                break;
            }
            let alpha = rz / curv;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Computes the typical table of `(r, c)` after smoothing both marginals.
pub fn solve_typical(r: &Histogram, c: &Histogram, tol: f64) -> Result<TypicalSolution> {
    if r.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: r.dim(), found: c.dim() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let rs = r.smoothed(TYPICAL_SMOOTHING);
    let cs = c.smoothed(TYPICAL_SMOOTHING);
    let d = rs.dim();
    let dual = TypicalDual::new(rs.values(), cs.values());

    // Constant start whose table has total mass one.
    let start = 0.5 * ((d * d) as f64).ln_1p();
    let mut u = vec![start; d];
    let mut v = vec![start; d];
    let mut f = dual.value(&u, &v).ok_or(Error::TypicalDomain)?;
    let mut g = dual.gradient(&u, &v);
    let mut gnorm = inf_norm(&g);
    let mut iterations = 0;

    while gnorm > tol {
        if iterations == MAX_NEWTON_STEPS {
            return Err(Error::TypicalNotConverged { iterations, gradient: gnorm });
        }
        let dir = dual.newton_direction(&u, &v);
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let un: Vec<f64> = u.iter().zip(&dir[..d]).map(|(a, b)| a + step * b).collect();
            let vn: Vec<f64> = v.iter().zip(&dir[d..]).map(|(a, b)| a + step * b).collect();
            if let Some(fnew) = dual.value(&un, &vn) {
                let gnew = dual.gradient(&un, &vn);
                let gnew_norm = inf_norm(&gnew);
                // Near the optimum f stops resolving progress; fall back to the gradient.
                if fnew <= f + ARMIJO * step * slope || gnew_norm < gnorm {
                    u = un;
                    v = vn;
                    f = fnew;
                    g = gnew;
                    gnorm = gnew_norm;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::TypicalDomain);
        }
        iterations += 1;
    }

    let shift = 0.5 * (v.iter().copied().fold(f64::INFINITY, f64::min)
        - u.iter().copied().fold(f64::INFINITY, f64::min));
    u.iter_mut().for_each(|x| *x += shift);
    v.iter_mut().for_each(|x| *x -= shift);
    let state = TypicalSolverState { u, v };
    let table = TransportPlan { entries: state.table(), row_marginal: rs, col_marginal: cs };
    Ok(TypicalSolution { table, state, iterations, gradient_norm: gnorm })
}

/// The typical table of `U(r, c)`.
pub fn typical_table(r: &Histogram, c: &Histogram, tol: f64) -> Result<TransportPlan> {
    solve_typical(r, c, tol).map(|s| s.table)
}

/// The concave functional maximized by the typical table,
/// `g(X) = sum (X + 1) ln(X + 1) - X ln X`.
pub fn typical_objective(x: &Array2<f64>) -> f64 {
    x.iter()
        .map(|&v| {
            let xlogx = if v > 0.0 { v * v.ln() } else { 0.0 };
            (v + 1.0) * v.ln_1p() - xlogx
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_marginals_give_constant_table() {
        for d in [2, 5, 9] {
            let r = Histogram::uniform(d).unwrap();
            let sol = solve_typical(&r, &r, DEFAULT_TYPICAL_TOL).unwrap();
            let target = 1.0 / (d * d) as f64;
            assert!(sol.table.entries.iter().all(|&t| (t - target).abs() < 1e-12));
            assert!(sol.state.u.iter().chain(&sol.state.v).all(|&x| x > 0.0));
        }
    }

    #[test]
    fn marginals_and_positivity() {
        let r = Histogram::new(vec![0.7, 0.2, 0.1, 0.0]).unwrap();
        let c = Histogram::new(vec![0.05, 0.05, 0.3, 0.6]).unwrap();
        let sol = solve_typical(&r, &c, DEFAULT_TYPICAL_TOL).unwrap();
        assert!(sol.table.marginal_error() < 1e-8);
        assert!(sol.state.u.iter().chain(&sol.state.v).all(|&x| x > 0.0));
        assert!(sol.table.entries.iter().all(|&t| t > 0.0 && t.is_finite()));
    }

    #[test]
    fn structured_solve_matches_dense_residual() {
        let r = [0.1, 0.2, 0.3, 0.4];
        let c = [0.25, 0.25, 0.25, 0.25];
        let dual = TypicalDual::new(&r, &c);
        let u = [0.9, 1.3, 0.7, 1.1];
        let v = [1.0, 0.8, 1.4, 0.6];
        let dir = dual.newton_direction(&u, &v);
        let h = dual.dense_hessian(&u, &v);
        let g = dual.gradient(&u, &v);
        for i in 0..8 {
            let hx: f64 = (0..8).map(|j| h[[i, j]] * dir[j]).sum();
            assert!((hx + g[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn objective_values() {
        let x = Array2::from_elem((2, 2), 0.25);
        let expected = 4.0 * (1.25 * 1.25f64.ln() - 0.25 * 0.25f64.ln());
        assert!((typical_objective(&x) - expected).abs() < 1e-15);
        assert_eq!(typical_objective(&Array2::zeros((2, 2))), 0.0);
    }
}
