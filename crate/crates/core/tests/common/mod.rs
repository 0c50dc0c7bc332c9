//! Independent reference implementations and random generators shared by
//! the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use gml_core::{triangle_fix, Histogram, MetricMatrix, ProjectionOptions};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random histogram; with some probability a few bins are zeroed to
/// exercise degenerate cases.
pub fn random_histogram(rng: &mut impl Rng, d: usize, sparse: bool) -> Histogram {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        if sparse {
            for x in v.iter_mut() {
                if rng.random::<f64>() < 0.3 {
                    *x = 0.0;
                }
            }
        }
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return Histogram::new(v.into_iter().map(|x| x / s).collect()).unwrap();
        }
    }
}

/// Histogram with every entry at least `floor`.
pub fn smooth_histogram(rng: &mut impl Rng, d: usize, floor: f64) -> Histogram {
    let raw = random_histogram(rng, d, false);
    let v: Vec<f64> = raw.values().iter().map(|x| floor + (1.0 - d as f64 * floor) * x).collect();
    Histogram::new(v).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((d, d), |_| rng.random_range(lo..hi))
}

/// A metric obtained by triangle fixing random noise.
pub fn random_metric(rng: &mut impl Rng, d: usize, tol: f64) -> MetricMatrix {
    let noise = random_matrix(rng, d, -0.5, 1.0);
    triangle_fix(&noise, &ProjectionOptions::with_tol(tol)).unwrap()
}

/// A metric with every triangle inequality strict: half a random metric plus
/// a constant, with a small symmetric jitter so that no two entries tie.
pub fn interior_metric(rng: &mut impl Rng, d: usize) -> MetricMatrix {
    let m = random_metric(rng, d, 1e-12);
    let scale = 0.5 * rng.random_range(0.2..1.0);
    let mut a = Array2::zeros((d, d));
    for i in 0..d {
        for j in i + 1..d {
            let v = 0.5 * m.as_array()[[i, j]] + scale * (1.0 + rng.random_range(0.0..0.2));
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    MetricMatrix::new(a, 1e-9).unwrap()
}

pub fn half_l1(a: &Histogram, b: &Histogram) -> f64 {
    0.5 * a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if (numerically) singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Upper-triangle position of `(i, j)`, `i < j`.
fn pos(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    (0..i).map(|r| d - 1 - r).sum::<usize>() + (j - i - 1)
}

/// Rows `a` of the homogeneous constraints `a . x <= 0` defining the metric
/// cone in upper-triangle coordinates.
pub fn cone_constraints(d: usize) -> Vec<Vec<f64>> {
    let n = d * (d - 1) / 2;
    let mut rows = Vec::new();
    for e in 0..n {
        let mut a = vec![0.0; n];
        a[e] = -1.0;
        rows.push(a);
    }
    for i in 0..d {
        for j in i + 1..d {
            for k in 0..d {
                if k == i || k == j {
                    continue;
                }
                let mut a = vec![0.0; n];
                a[pos(d, i, j)] = 1.0;
                a[pos(d, i, k)] -= 1.0;
                a[pos(d, k, j)] -= 1.0;
                rows.push(a);
            }
        }
    }
    rows
}

fn next_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for p in (0..k).rev() {
        if idx[p] < n - k + p {
            idx[p] += 1;
            for q in p + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Euclidean projection of `y` onto `{x : A x <= 0}` by enumerating active
/// sets: for each set of at most `dim` constraints, project onto their
/// common null space and keep the closest feasible candidate.
pub fn project_polyhedral_cone(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let dist2 = |x: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let feasible = |x: &[f64]| rows.iter().all(|a| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= 1e-9);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        if feasible(&x) {
            let d2 = dist2(&x);
            if best.as_ref().is_none_or(|(b, _)| d2 < *b) {
                best = Some((d2, x));
            }
        }
    };
    consider(y.to_vec());
    for k in 1..=n.min(rows.len()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            // x = y - A_S^T (A_S A_S^T)^{-1} A_S y
            let gram: Vec<Vec<f64>> = idx
                .iter()
                .map(|&p| idx.iter().map(|&q| rows[p].iter().zip(&rows[q]).map(|(a, b)| a * b).sum()).collect())
                .collect();
            let rhs: Vec<f64> = idx.iter().map(|&p| rows[p].iter().zip(y).map(|(a, b)| a * b).sum()).collect();
            if let Some(lam) = solve_linear(gram, rhs) {
                let mut x = y.to_vec();
                for (&p, l) in idx.iter().zip(&lam) {
                    for (xi, a) in x.iter_mut().zip(&rows[p]) {
                        *xi -= l * a;
                    }
                }
                consider(x);
            }
            if !next_subset(&mut idx, rows.len()) {
                break;
            }
        }
    }
    best.expect("zero is always feasible").1
}

/// Reference projection of a full matrix onto the metric cone.
pub fn qp_metric_projection(h: &Array2<f64>) -> Array2<f64> {
    let d = h.nrows();
    let mut y = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            y.push(0.5 * (h[[i, j]] + h[[j, i]]));
        }
    }
    let x = project_polyhedral_cone(&cone_constraints(d), &y);
    Array2::from_shape_fn((d, d), |(i, j)| if i == j { 0.0 } else { x[pos(d, i, j)] })
}

/// Uniform sample from `U(r, c)` at `d = 3` by rejection from the box of the
/// four free entries.
pub fn sample_transport_3(rng: &mut impl Rng, r: &[f64], c: &[f64]) -> Array2<f64> {
    loop {
        let x00 = rng.random_range(0.0..=r[0].min(c[0]));
        let x01 = rng.random_range(0.0..=r[0].min(c[1]));
        let x10 = rng.random_range(0.0..=r[1].min(c[0]));
        let x11 = rng.random_range(0.0..=r[1].min(c[1]));
        let x02 = r[0] - x00 - x01;
        let x12 = r[1] - x10 - x11;
        let x20 = c[0] - x00 - x10;
        let x21 = c[1] - x01 - x11;
        let x22 = r[2] - x20 - x21;
        let x = ndarray::array![[x00, x01, x02], [x10, x11, x12], [x20, x21, x22]];
        if x.iter().all(|&v| v >= 0.0) {
            return x;
        }
    }
}

/// Frobenius distance.
pub fn fro(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().map(|v| v * v).sum::<f64>().sqrt()
}
