//! Dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdc::{ImageRgb, SparseQuadratic, SparseSymmetric};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(m: &SparseSymmetric) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_row_slice(n, n, &m.to_dense())
}

/// Dense Cholesky solve of `M x = r`.
pub fn dense_solve(m: &SparseSymmetric, r: &[f64]) -> Vec<f64> {
    let chol = dense(m).cholesky().expect("oracle matrix is SPD");
    chol.solve(&DVector::from_column_slice(r))
        .as_slice()
        .to_vec()
}

/// Weighted graph Laplacian on a `w x h` grid with random 4-neighbor weights
/// plus a few random long-range edges, returned as upper triplets.
pub fn random_laplacian_triplets(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
) -> Vec<(usize, usize, f64)> {
    let n = w * h;
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                edges.push((i, i + 1, rng.random_range(0.01..5.0)));
            }
            if y + 1 < h {
                edges.push((i, i + w, rng.random_range(0.01..5.0)));
            }
        }
    }
    for _ in 0..n / 4 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push((a.min(b), a.max(b), rng.random_range(0.01..2.0)));
        }
    }
    let mut diag = vec![0.0; n];
    let mut trip = Vec::new();
    for &(a, b, wt) in &edges {
        diag[a] += wt;
        diag[b] += wt;
        trip.push((a, b, -wt));
    }
    for (i, d) in diag.into_iter().enumerate() {
        trip.push((i, i, d));
    }
    trip
}

/// `diag(d) + lambda L` for a random grid Laplacian and random positive `d`.
pub fn random_spd(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SparseSymmetric {
    let n = w * h;
    let lambda = rng.random_range(0.01..3.0);
    let trip: Vec<_> = random_laplacian_triplets(rng, w, h)
        .into_iter()
        .map(|(i, j, v)| (i, j, lambda * v))
        .collect();
    let l = SparseSymmetric::from_upper_triplets(n, &trip).unwrap();
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..4.0)).collect();
    l.scaled_plus_diagonal(1.0, &d)
}

/// QP with a diagonal-plus-Laplacian `Q` and a mixed-sign linear term, so
/// that typical instances have several active constraints.
pub fn random_qp(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SparseQuadratic {
    let q = random_spd(rng, w, h);
    let c = (0..q.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
    SparseQuadratic::new(q, c).unwrap()
}

pub fn objective(q: &DMatrix<f64>, c: &[f64], x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    0.5 * (xv.transpose() * q * &xv)[(0, 0)] + DVector::from_column_slice(c).dot(&xv)
}

/// Exhaustive active-set enumeration: for every free set `S`, solve
/// `Q_SS x_S = -c_S` with the rest fixed at zero, keep primal-feasible
/// candidates and return the one with the smallest objective.
pub fn enumerate_nnqp(qp: &SparseQuadratic) -> (Vec<f64>, f64) {
    let q = dense(&qp.q);
    let n = qp.dim();
    assert!(n <= 20, "enumeration is exponential");
    let mut best = (vec![0.0; n], 0.0);
    for mask in 1u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let k = free.len();
        let sub = DMatrix::from_fn(k, k, |a, b| q[(free[a], free[b])]);
        let rhs = DVector::from_fn(k, |a, _| -qp.c[free[a]]);
        let Some(chol) = sub.cholesky() else { continue };
        let xs = chol.solve(&rhs);
        if xs.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (a, &i) in free.iter().enumerate() {
            x[i] = xs[a];
        }
        let f = objective(&q, &qp.c, &x);
        if f < best.1 {
            best = (x, f);
        }
    }
    best
}

/// Checks the approximate KKT contract of a non-negative QP solution.
pub fn check_kkt(qp: &SparseQuadratic, x: &[f64], tol: f64) -> Result<(), String> {
    let q = dense(&qp.q);
    let g = &q * DVector::from_column_slice(x) + DVector::from_column_slice(&qp.c);
    let c_inf = qp.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..x.len() {
        if x[i] < -tol {
            return Err(format!("x[{i}] = {} below -tol", x[i]));
        }
        if x[i] <= tol && g[i] < -tol {
            return Err(format!("active x[{i}] has gradient {}", g[i]));
        }
        if x[i] > tol && g[i].abs() > tol {
            return Err(format!("free x[{i}] has gradient {}", g[i]));
        }
        if x[i] * g[i].abs() > tol * (1.0 + c_inf) {
            return Err(format!("complementarity at {i}: {}", x[i] * g[i].abs()));
        }
    }
    Ok(())
}

/// Random image with colors in `[0, 1]`; `flat` pixels copy their left neighbor
/// so that some edges sit on the color floor.
pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, flat: f64) -> ImageRgb {
    let mut data: Vec<f64> = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            if x > 0 && rng.random_bool(flat) {
                let i = (y * w + x - 1) * 3;
                let prev = [data[i], data[i + 1], data[i + 2]];
                data.extend_from_slice(&prev);
            } else {
                for _ in 0..3 {
                    data.push(rng.random_range(0.0..1.0));
                }
            }
        }
    }
    ImageRgb::new(w, h, data).unwrap()
}

/// Explicit pairwise smoothness sum over 4-neighbors, each unordered pair once.
pub fn pairwise_smoothness(img: &ImageRgb, t: &[f64], color_floor: f64) -> f64 {
    let (w, h) = img.dims();
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut pair = |j: usize| {
                let (a, b) = (img.pixel_at(i), img.pixel_at(j));
                let d2: f64 = (0..3).map(|c| (a[c] - b[c]).powi(2)).sum();
                sum += (t[i] - t[j]).powi(2) / d2.max(color_floor);
            };
            if x + 1 < w {
                pair(i + 1);
            }
            if y + 1 < h {
                pair(i + w);
            }
        }
    }
    sum
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}
