//! Color weighted grid Laplacian and the quadratic forms built on it.
//!
//! The refinement energy is
//!
//! ```text
//! E(t) = sum_x W(x) (t(x) - t_init(x))^2 + lambda * sum_{x~y} a(x,y) (t(x) - t(y))^2
//! a(x,y) = 1 / max(|I(x) - I(y)|^2, color_floor)
//! ```
//!
//! over 4-connected neighbor pairs, each unordered pair counted once. Its
//! stationary point solves `(diag(W) + lambda L) t = W t_init`. Substituting
//! `t = x + b` gives the non-negative QP `1/2 x'Qx + c'x` with
//! `Q = 2 diag(W) + 2 lambda L` and `c = 2 W (b - t_init) + 2 lambda L b`.

use rayon::prelude::*;

use crate::error::{DehazeError, Result};
use crate::image::{ImageRgb, ScalarMap};

/// Default floor on the squared RGB distance between neighbors.
pub const DEFAULT_COLOR_FLOOR: f64 = 1e-4;

/// Smoothness weight.
pub const DEFAULT_LAMBDA: f64 = 0.02;

/// Symmetric sparse matrix in CSR form, storing both triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from `(row, col, value)` triplets covering both triangles.
    /// Duplicates are summed. Fails if the result is not symmetric.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(DehazeError::InvalidParameter {
                    name: "triplets",
                    reason: format!("index ({i}, {j}) outside {n}x{n}"),
                });
            }
            rows[i].push((j, v));
        }
        let m = Self::from_rows(n, rows);
        for i in 0..n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                let j = m.cols[k];
                if m.get(j, i) != m.vals[k] {
                    return Err(DehazeError::InvalidParameter {
                        name: "triplets",
                        reason: format!("entry ({i}, {j}) has no symmetric counterpart"),
                    });
                }
            }
        }
        Ok(m)
    }

    /// Builds from upper-triangle triplets (`row <= col`), mirroring them.
    pub fn from_upper_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut full = Vec::with_capacity(triplets.len() * 2);
        for &(i, j, v) in triplets {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_triplets(n, &full)
    }

    fn from_rows(n: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            n: diag.len(),
            row_ptr: (0..=diag.len()).collect(),
            cols: (0..diag.len()).collect(),
            vals: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    /// Nonzeros of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = self * x`. Rows are independent, so the parallel split does not
    /// affect the result.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        const CHUNK: usize = 4096;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, ys)| {
            let base = c * CHUNK;
            for (k, yi) in ys.iter_mut().enumerate() {
                let i = base + k;
                let mut acc = 0.0;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[p] * x[self.cols[p]];
                }
                *yi = acc;
            }
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x' self x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `alpha * self + diag(d)`; the sparsity pattern gains any missing diagonal entries.
    pub fn scaled_plus_diagonal(&self, alpha: f64, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let rows = (0..self.n)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = self.row(i).map(|(j, v)| (j, alpha * v)).collect();
                row.push((i, d[i]));
                row
            })
            .collect();
        Self::from_rows(self.n, rows)
    }

    /// Dense row-major copy, meant for small systems and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[i * self.n + j] = v;
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared RGB distance between two pixels.
fn color_dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum()
}

/// Edge weight between neighbors.
pub fn edge_weight(a: [f64; 3], b: [f64; 3], color_floor: f64) -> f64 {
    1.0 / color_dist2(a, b).max(color_floor)
}

/// Graph Laplacian `L = D - A` over the 4-connected pixel grid.
pub fn build_laplacian(img: &ImageRgb, color_floor: f64) -> Result<SparseSymmetric> {
    if !(color_floor > 0.0) {
        return Err(DehazeError::InvalidParameter {
            name: "color_floor",
            reason: format!("must be positive, got {color_floor}"),
        });
    }
    // Weights are snapped to one binary grid, coarse enough that a degree
    // (at most four weights of at most 1/color_floor) is an exact integer
    // multiple of the grid. Row sums then cancel exactly and L 1 = 0 holds
    // bit for bit, while the smallest weights keep about eleven digits.
    let quantum = 2f64.powi((4.0 / color_floor).log2().ceil() as i32 - 52);
    let weight =
        |a: [f64; 3], b: [f64; 3]| (edge_weight(a, b, color_floor) / quantum).round() * quantum;
    let (w, h) = img.dims();
    let n = w * h;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let p = img.pixel_at(i);
            let mut neighbors: [(usize, f64); 4] = [(usize::MAX, 0.0); 4];
            let mut k = 0;
            // ascending column order: up, left, right, down
            if y > 0 {
                neighbors[k] = (i - w, weight(p, img.pixel_at(i - w)));
                k += 1;
            }
            if x > 0 {
                neighbors[k] = (i - 1, weight(p, img.pixel_at(i - 1)));
                k += 1;
            }
            let before_diag = k;
            if x + 1 < w {
                neighbors[k] = (i + 1, weight(p, img.pixel_at(i + 1)));
                k += 1;
            }
            if y + 1 < h {
                neighbors[k] = (i + w, weight(p, img.pixel_at(i + w)));
                k += 1;
            }
            let degree: f64 = neighbors[..k].iter().map(|&(_, a)| a).sum();
            for &(j, a) in &neighbors[..before_diag] {
                cols.push(j);
                vals.push(-a);
            }
            cols.push(i);
            vals.push(degree);
            for &(j, a) in &neighbors[before_diag..k] {
                cols.push(j);
                vals.push(-a);
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(SparseSymmetric {
        n,
        row_ptr,
        cols,
        vals,
    })
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(DehazeError::DimensionMismatch {
            expected: (expected, 1),
            actual: (actual, 1),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(DehazeError::InvalidParameter {
            name: "lambda",
            reason: format!("must be finite and non-negative, got {lambda}"),
        });
    }
    Ok(())
}

/// `M = diag(W) + lambda L` and `r = W * t_init`.
pub fn assemble_wdc_system(
    weights: &ScalarMap,
    t_init: &ScalarMap,
    laplacian: &SparseSymmetric,
    lambda: f64,
) -> Result<(SparseSymmetric, Vec<f64>)> {
    check_lambda(lambda)?;
    weights.ensure_same_dims(t_init.dims())?;
    check_len(laplacian.dim(), weights.len())?;
    let m = laplacian.scaled_plus_diagonal(lambda, weights.data());
    let r = weights
        .data()
        .iter()
        .zip(t_init.data())
        .map(|(w, t)| w * t)
        .collect();
    Ok((m, r))
}

/// Convex quadratic `1/2 x'Qx + c'x`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseQuadratic {
    pub q: SparseSymmetric,
    pub c: Vec<f64>,
}

impl SparseQuadratic {
    pub fn new(q: SparseSymmetric, c: Vec<f64>) -> Result<Self> {
        check_len(q.dim(), c.len())?;
        Ok(Self { q, c })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let qx = self.q.mul_vec(x);
        0.5 * dot(x, &qx) + dot(&self.c, x)
    }

    /// `Qx + c`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.q.mul_vec(x);
        for (gi, ci) in g.iter_mut().zip(&self.c) {
            *gi += ci;
        }
        g
    }
}

/// QP in the gap variable `x = t - b`.
pub fn assemble_cwdc_qp(
    weights: &ScalarMap,
    t_init: &ScalarMap,
    b: &ScalarMap,
    laplacian: &SparseSymmetric,
    lambda: f64,
) -> Result<SparseQuadratic> {
    check_lambda(lambda)?;
    weights.ensure_same_dims(t_init.dims())?;
    weights.ensure_same_dims(b.dims())?;
    check_len(laplacian.dim(), weights.len())?;
    let w2: Vec<f64> = weights.data().iter().map(|w| 2.0 * w).collect();
    let q = laplacian.scaled_plus_diagonal(2.0 * lambda, &w2);
    let lb = laplacian.mul_vec(b.data());
    let c = (0..weights.len())
        .map(|i| w2[i] * (b.data()[i] - t_init.data()[i]) + 2.0 * lambda * lb[i])
        .collect();
    SparseQuadratic::new(q, c)
}

/// Refinement energy of a transmission map, evaluated through the Laplacian.
pub fn refinement_energy(
    weights: &ScalarMap,
    t_init: &ScalarMap,
    laplacian: &SparseSymmetric,
    lambda: f64,
    t: &[f64],
) -> f64 {
    let data: f64 = weights
        .data()
        .iter()
        .zip(t_init.data())
        .zip(t)
        .map(|((w, ti), tv)| w * (tv - ti).powi(2))
        .sum();
    data + lambda * laplacian.quad_form(t)
}
