use std::io::Write;

use crate::{Error, Result};

/// Square sparse matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrixCSR {
    pub dim: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrixCSR {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order so the result is bitwise reproducible.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0; dim + 1];
        let mut col_indices = Vec::with_capacity(triplets.len() / 4);
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 4);
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_offsets[i + 1] += row_offsets[i];
        }
        SparseMatrixCSR {
            dim,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `max |A - A^T|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Coordinate text format, one `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.dim, self.dim, self.nnz())?;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `|Ax - b| / |b|` (true residual, not the recursive one).
    pub residual: f64,
    /// Euclidean size of the constant component removed from `b` (zero-mean mode).
    pub projection: f64,
}

/// Jacobi-preconditioned conjugate gradients.
///
/// With `zero_mean = Some(weights)` the system is treated as singular with
/// the constants as kernel: `b` is projected orthogonal to constants first,
/// and every iterate is shifted so that `sum(weights * x) = 0`.
pub fn solve_cg(
    a: &SparseMatrixCSR,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    zero_mean: Option<&[f64]>,
) -> Result<CgSolution> {
    let n = a.dim;
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "right-hand side has length {}, matrix has dimension {n}",
            b.len()
        )));
    }
    let mut rhs = b.to_vec();
    let mut projection = 0.0;
    if zero_mean.is_some() {
        let mean = rhs.iter().sum::<f64>() / n as f64;
        projection = mean.abs() * (n as f64).sqrt();
        for v in &mut rhs {
            *v -= mean;
        }
    }
    let project = |x: &mut [f64]| {
        if let Some(w) = zero_mean {
            let total: f64 = w.iter().sum();
            let shift = dot(w, x) / total;
            for v in x.iter_mut() {
                *v -= shift;
            }
        }
    };
    let b_norm = norm(&rhs);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: 0.0,
            projection,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = norm(&r) <= tol * b_norm;
    while !converged && iterations < max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut x);
        iterations += 1;
        if norm(&r) <= tol * b_norm {
            converged = true;
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let ax = a.mul(&x);
    let true_res = norm(&ax.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>()) / b_norm;
    // the recursive residual may drift from the true one; accept a small margin
    if !converged || true_res > 10.0 * tol {
        return Err(Error::NonConvergence {
            iterations,
            residual: true_res,
        });
    }
    Ok(CgSolution {
        x,
        iterations,
        residual: true_res,
        projection,
    })
}

/// Sparse Cholesky solve of an SPD system. With `zero_mean = Some(weights)`
/// the constants are the kernel: `b` is projected as in [`solve_cg`], the
/// first unknown is pinned, and the result is shifted to zero weighted mean.
/// `iterations` is reported as 0.
pub fn solve_direct(a: &SparseMatrixCSR, b: &[f64], zero_mean: Option<&[f64]>) -> Result<CgSolution> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};

    let n = a.dim;
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "right-hand side has length {}, matrix has dimension {n}",
            b.len()
        )));
    }
    let mut rhs = b.to_vec();
    let mut projection = 0.0;
    if zero_mean.is_some() {
        let mean = rhs.iter().sum::<f64>() / n as f64;
        projection = mean.abs() * (n as f64).sqrt();
        for v in &mut rhs {
            *v -= mean;
        }
    }
    let b_norm = norm(&rhs);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            projection,
        });
    }
    let pinned = usize::from(zero_mean.is_some());
    let m = n - pinned;
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in pinned..n {
        for (j, v) in a.row(i) {
            if j >= pinned && j <= i {
                triplets.push(Triplet::new(i - pinned, j - pinned, v));
            }
        }
    }
    let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &triplets)
        .map_err(|e| Error::InvalidInput(format!("sparse matrix assembly failed: {e:?}")))?;
    let llt = matrix
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| Error::Domain(format!("matrix is not positive definite: {e:?}")))?;
    let mut col = faer::Mat::<f64>::from_fn(m, 1, |i, _| rhs[i + pinned]);
    llt.solve_in_place(col.as_mut());
    let mut x = vec![0.0; n];
    for i in 0..m {
        x[i + pinned] = col[(i, 0)];
    }
    if let Some(w) = zero_mean {
        let shift = dot(w, &x) / w.iter().sum::<f64>();
        for v in &mut x {
            *v -= shift;
        }
    }
    let ax = a.mul(&x);
    let residual = norm(&ax.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>()) / b_norm;
    if !residual.is_finite() {
        return Err(Error::NonConvergence { iterations: 0, residual });
    }
    Ok(CgSolution {
        x,
        iterations: 0,
        residual,
        projection,
    })
}
