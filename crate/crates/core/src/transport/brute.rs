//! Exhaustive reference solver for small transportation problems.
//!
//! Enumerates every set of `2d - 1` cells, solves the reduced equality system
//! (row sums, then column sums without the last one) by dense elimination,
//! and keeps the cheapest nonnegative solution. Nonsingular cell sets are
//! exactly the spanning trees of the bipartite network, so this visits every
//! basic feasible solution of the LP.

use ndarray::Array2;

use super::{check_cost, check_marginals, Histogram};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_DIM: usize = 5;

const FEASIBILITY_SLACK: f64 = 1e-12;

/// Exact optimum of the transportation LP by enumeration of basic solutions.
pub fn brute_force_transport(cost: &Array2<f64>, r: &Histogram, c: &Histogram) -> Result<f64> {
    let d = check_marginals(r, c)?;
    if d > BRUTE_FORCE_MAX_DIM {
        return Err(Error::TooLarge { dim: d, max: BRUTE_FORCE_MAX_DIM });
    }
    check_cost(cost, d)?;
    let m = 2 * d - 1;
    let cells = d * d;
    let mut rhs = Vec::with_capacity(m);
    rhs.extend_from_slice(r.values());
    rhs.extend_from_slice(&c.values()[..d - 1]);

    let mut best = f64::INFINITY;
    let mut chosen: Vec<usize> = (0..m).collect();
    loop {
        if let Some(x) = solve_reduced(d, &chosen, &rhs) {
            if x.iter().all(|&v| v >= -FEASIBILITY_SLACK) {
                let value: f64 =
                    chosen.iter().zip(&x).map(|(&cell, &v)| cost[[cell / d, cell % d]] * v).sum();
                best = best.min(value);
            }
        }
        if !next_combination(&mut chosen, cells) {
            break;
        }
    }
    Ok(best)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut pos = k;
    while pos > 0 {
        pos -= 1;
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for q in pos + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn solve_reduced(d: usize, cells: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = cells.len();
    let mut a = vec![0.0; m * (m + 1)];
    let w = m + 1;
    for (col, &cell) in cells.iter().enumerate() {
        let (i, j) = (cell / d, cell % d);
        a[i * w + col] = 1.0;
        if j < d - 1 {
            a[(d + j) * w + col] = 1.0;
        }
    }
    for (row, &b) in rhs.iter().enumerate() {
        a[row * w + m] = b;
    }
    for k in 0..m {
        let piv = (k..m).max_by(|&p, &q| a[p * w + k].abs().total_cmp(&a[q * w + k].abs()))?;
        if a[piv * w + k].abs() < 1e-9 {
            return None;
        }
        if piv != k {
            for col in 0..w {
                a.swap(k * w + col, piv * w + col);
            }
        }
        let p = a[k * w + k];
        for row in 0..m {
            if row == k {
                continue;
            }
            let f = a[row * w + k] / p;
            if f != 0.0 {
                for col in k..w {
                    a[row * w + col] -= f * a[k * w + col];
                }
            }
        }
    }
    Some((0..m).map(|k| a[k * w + m] / a[k * w + k]).collect())
}
