//! Dense symmetric linear algebra.
//!
//! Matrices are row-major. Factorization tries Cholesky first and falls back
//! to LU with partial pivoting for symmetric indefinite input, so invertible
//! but non-positive operators can still be solved and inverted.

use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                defect = defect.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        defect
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self - sigma I`.
    pub fn shifted(&self, sigma: f64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= sigma;
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data.chunks(self.cols).map(|r| dot(r, x)).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `x^T A x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorMethod {
    Cholesky,
    Lu,
}

#[derive(Debug, Clone)]
enum Factors {
    /// Lower factor `L` with `A = L L^T`.
    Cholesky(Matrix),
    /// Unit-lower `L` and upper `U` packed together, with the row permutation.
    Lu { lu: Matrix, perm: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct Factorization {
    factors: Factors,
    matrix: Matrix,
    smallest_pivot: f64,
    /// Column range `[lo, hi)` holding the nonzeros of each row.
    spans: Vec<(usize, usize)>,
}

impl Factorization {
    pub fn method(&self) -> FactorMethod {
        match self.factors {
            Factors::Cholesky(_) => FactorMethod::Cholesky,
            Factors::Lu { .. } => FactorMethod::Lu,
        }
    }

    /// Smallest absolute pivot: `l_jj^2` for Cholesky, `|u_jj|` for LU.
    pub fn smallest_pivot(&self) -> f64 {
        self.smallest_pivot
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    /// Re-multiplied factors, for auditing the factorization.
    pub fn reconstruct(&self) -> Matrix {
        match &self.factors {
            Factors::Cholesky(l) => l.matmul(&l.transpose()),
            Factors::Lu { lu, perm } => {
                let n = lu.rows;
                let l = Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                    std::cmp::Ordering::Greater => lu[(i, j)],
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Less => 0.0,
                });
                let u = Matrix::from_fn(n, n, |i, j| if i <= j { lu[(i, j)] } else { 0.0 });
                let pa = l.matmul(&u);
                // undo the row permutation: row k of PA is row perm[k] of A
                let mut a = Matrix::zeros(n, n);
                for (k, &p) in perm.iter().enumerate() {
                    for j in 0..n {
                        a[(p, j)] = pa[(k, j)];
                    }
                }
                a
            }
        }
    }

    fn solve_raw(&self, rhs: &[f64], first_nonzero: usize) -> Vec<f64> {
        match &self.factors {
            Factors::Cholesky(l) => cholesky_solve(l, rhs, first_nonzero),
            Factors::Lu { lu, perm } => lu_solve(lu, perm, rhs),
        }
    }

    /// `rhs - A x`, accumulated in compensated arithmetic so that the
    /// residual is accurate even when it is tiny compared with `|A| |x|`.
    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = self.spans[i];
                let row = self.matrix.row(i);
                let (mut s, mut c) = (rhs[i], 0.0);
                for k in lo..hi {
                    let p = -row[k] * x[k];
                    let pe = (-row[k]).mul_add(x[k], -p);
                    let t = s + p;
                    let z = t - s;
                    c += pe + ((s - (t - z)) + (p - z));
                    s = t;
                }
                s + c
            })
            .collect()
    }

    /// Solve followed by one refinement step with a compensated residual.
    fn solve_refined(&self, rhs: &[f64], first_nonzero: usize) -> Vec<f64> {
        let mut x = self.solve_raw(rhs, first_nonzero);
        let r = self.residual(&x, rhs);
        let dx = self.solve_raw(&r, 0);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        x
    }
}

fn row_spans(a: &Matrix) -> Vec<(usize, usize)> {
    (0..a.rows)
        .map(|i| {
            let row = a.row(i);
            match row.iter().position(|&v| v != 0.0) {
                Some(lo) => (lo, row.iter().rposition(|&v| v != 0.0).unwrap() + 1),
                None => (0, 0),
            }
        })
        .collect()
}

/// Cholesky factorization. Returns the factor and its pivots, or the index of
/// the first non-positive pivot.
pub fn cholesky(a: &Matrix) -> std::result::Result<(Matrix, Vec<f64>), usize> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    let mut pivots = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..=i {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(i);
                }
                pivots.push(s);
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok((l, pivots))
}

fn cholesky_solve(l: &Matrix, rhs: &[f64], first_nonzero: usize) -> Vec<f64> {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in first_nonzero..n {
        let row = l.row(i);
        y[i] = (rhs[i] - dot(&row[first_nonzero..i], &y[first_nonzero..i])) / row[i];
    }
    // back substitution with L^T, sweeping rows of L
    for i in (0..n).rev() {
        let row = l.row(i);
        y[i] /= row[i];
        let xi = y[i];
        for (yk, lik) in y[..i].iter_mut().zip(&row[..i]) {
            *yk -= lik * xi;
        }
    }
    y
}

fn lu_factor(a: &Matrix) -> (Matrix, Vec<usize>, f64) {
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut smallest = f64::INFINITY;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        smallest = smallest.min(pmax);
        if pmax == 0.0 {
            continue;
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            lu[(i, k)] = factor;
            let (upper, lower) = lu.data.split_at_mut(i * n);
            let src = &upper[k * n + k + 1..k * n + n];
            let dst = &mut lower[k + 1..n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= factor * s;
            }
        }
    }
    (lu, perm, smallest)
}

fn lu_solve(lu: &Matrix, perm: &[usize], rhs: &[f64]) -> Vec<f64> {
    let n = lu.rows;
    let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..n {
        let row = lu.row(i);
        y[i] -= dot(&row[..i], &y[..i]);
    }
    for i in (0..n).rev() {
        let row = lu.row(i);
        y[i] = (y[i] - dot(&row[i + 1..], &y[i + 1..])) / row[i];
    }
    y
}

/// Factors a symmetric matrix. Fails with [`Error::Singular`] when the
/// smallest pivot is below `tol_sing * max|A|`.
pub fn factor_symmetric(matrix: &Matrix, tol_sing: f64) -> Result<Factorization> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows,
            got: matrix.cols,
        });
    }
    let defect = matrix.symmetry_defect();
    if defect > 0.0 {
        return Err(Error::NotSymmetric { defect });
    }
    let threshold = tol_sing * matrix.max_abs();
    let (factors, smallest_pivot) = match cholesky(matrix) {
        Ok((l, pivots)) => {
            let smallest = pivots.iter().copied().fold(f64::INFINITY, f64::min);
            (Factors::Cholesky(l), smallest)
        }
        Err(_) => {
            let (lu, perm, smallest) = lu_factor(matrix);
            (Factors::Lu { lu, perm }, smallest)
        }
    };
    if !(smallest_pivot >= threshold) || smallest_pivot == 0.0 {
        return Err(Error::Singular {
            pivot: smallest_pivot,
            threshold,
        });
    }
    Ok(Factorization {
        factors,
        matrix: matrix.clone(),
        smallest_pivot,
        spans: row_spans(matrix),
    })
}

/// Solves `A x = rhs` with one step of iterative refinement; the residual is
/// formed in compensated arithmetic.
pub fn solve(factorization: &Factorization, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = factorization.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    Ok(factorization.solve_refined(rhs, 0))
}

/// Result of a full inversion.
#[derive(Debug, Clone)]
pub struct Inverse {
    /// `(B + B^T) / 2` for the computed inverse `B`.
    pub matrix: Matrix,
    /// `max |B - B^T| / max |B|` before symmetrization.
    pub raw_defect: f64,
}

/// Computes the inverse column by column, in parallel, refining each column.
pub fn invert_raw(factorization: &Factorization) -> Matrix {
    let n = factorization.dim();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            factorization.solve_refined(&e, j)
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| columns[j][i])
}

pub fn symmetrize(raw: &Matrix) -> Matrix {
    Matrix::from_fn(raw.rows, raw.cols, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)]))
}

pub fn invert(factorization: &Factorization) -> Inverse {
    let raw = invert_raw(factorization);
    let scale = raw.max_abs();
    let raw_defect = if scale > 0.0 {
        raw.symmetry_defect() / scale
    } else {
        0.0
    };
    Inverse {
        matrix: symmetrize(&raw),
        raw_defect,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative change in the Rayleigh quotient that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Shift `sigma` with `A - sigma I` positive definite: a lower bound on
    /// the smallest eigenvalue.
    pub lower_bound: f64,
    pub residual: f64,
    pub vector: Vec<f64>,
    pub converged: bool,
}

/// Deterministic start vector: normalized ones with a small fixed perturbation
/// so that it is never exactly orthogonal to a sign-changing ground state.
pub(crate) fn start_vector(n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 1e-3 * ((i as f64) * 1.618_033_988_75 + 0.5).sin())
        .collect();
    let nrm = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nrm);
    x
}

fn gershgorin_lower(a: &Matrix) -> f64 {
    (0..a.rows)
        .map(|i| {
            let off: f64 = a
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            a[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of a symmetric matrix within relative tolerance `tol`.
pub fn min_eigenvalue(matrix: &Matrix, tol: f64) -> Result<EigenEstimate> {
    min_eigenvalue_with(
        matrix,
        EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

/// Shifted inverse power iteration. The shift is the first `sigma` from a
/// fixed ladder for which `A - sigma I` admits a Cholesky factorization, so
/// the iteration converges to the algebraically smallest eigenvalue.
pub fn min_eigenvalue_with(matrix: &Matrix, options: EigenOptions) -> Result<EigenEstimate> {
    let est = min_eigenvalue_bounded(matrix, options)?;
    if est.converged {
        Ok(est)
    } else {
        Err(Error::NoConvergence {
            iterations: est.iterations,
            estimate: est.value,
        })
    }
}

/// Like [`min_eigenvalue_with`] but returns the last iterate, flagged, when
/// the iteration budget runs out. The lower bound is valid either way.
pub fn min_eigenvalue_bounded(matrix: &Matrix, options: EigenOptions) -> Result<EigenEstimate> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows,
            got: matrix.cols,
        });
    }
    let n = matrix.rows;
    let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
    let ladder = [0.0, 1e-12, 1e-10, 1e-9, 1e-8, 1e-6, 1e-4, 1e-2, 1.0];
    let gersh = gershgorin_lower(matrix) - 1e-8 * scale;
    let shifts = ladder
        .iter()
        .map(|s| -s * scale)
        .take_while(|&s| s > gersh)
        .chain(std::iter::once(gersh.min(0.0)));
    let (sigma, l) = shifts
        .filter_map(|sigma| cholesky(&matrix.shifted(sigma)).ok().map(|(l, _)| (sigma, l)))
        .next()
        .ok_or(Error::NoConvergence {
            iterations: 0,
            estimate: f64::NAN,
        })?;

    // Rayleigh quotients cannot be resolved below the rounding level of x^T A x
    let noise = 32.0 * f64::EPSILON * scale;
    let mut x = start_vector(n);
    let mut rho = matrix.quadratic(&x);
    let mut ax = matrix.matvec(&x);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=options.max_iter {
        let mut y = cholesky_solve(&l, &x, 0);
        let nrm = norm2(&y);
        y.iter_mut().for_each(|v| *v /= nrm);
        x = y;
        ax = matrix.matvec(&x);
        let next = dot(&x, &ax);
        let change = (next - rho).abs();
        rho = next;
        iterations = it;
        if it > 1 && change <= (options.tol * rho.abs()).max(noise) {
            converged = true;
            break;
        }
    }
    let residual = norm2(
        &ax.iter()
            .zip(&x)
            .map(|(a, v)| a - rho * v)
            .collect::<Vec<_>>(),
    );
    Ok(EigenEstimate {
        value: rho,
        iterations,
        lower_bound: sigma,
        residual,
        vector: x,
        converged,
    })
}

/// Cyclic Jacobi eigensolver for small symmetric matrices. Returns ascending
/// eigenvalues and the matching eigenvectors as columns.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let total = m.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (values, vectors)
}

/// Orthonormalizes a set of vectors in place (modified Gram-Schmidt, two passes).
pub fn orthonormalize(vectors: &mut [Vec<f64>]) {
    for k in 0..vectors.len() {
        for _pass in 0..2 {
            for j in 0..k {
                let (done, rest) = vectors.split_at_mut(k);
                let proj = dot(&done[j], &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(&done[j]) {
                    *x -= proj * q;
                }
            }
        }
        let nrm = norm2(&vectors[k]);
        vectors[k].iter_mut().for_each(|x| *x /= nrm);
    }
}
