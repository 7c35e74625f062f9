//! Reference solutions on `[0, 1]`, independent of the discretization.

use std::sync::Arc;

use serde::Serialize;

use crate::discretization::{DiscreteOperator, Family};
use crate::error::{Error, Result};
use crate::kernel::GreensKernel;
use crate::grid::quadrature_weights;
use crate::linalg::{cholesky, orthonormalize, symmetric_eigen, Matrix};

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {v} is outside [0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactKernel {
    SecondOrder,
    Beam,
}

impl ExactKernel {
    pub fn for_family(family: Family) -> Option<Self> {
        match family {
            Family::SecondOrder1D => Some(ExactKernel::SecondOrder),
            Family::FourthOrder1D => Some(ExactKernel::Beam),
            _ => None,
        }
    }

    pub fn value(self, x: f64, xi: f64) -> Result<f64> {
        match self {
            ExactKernel::SecondOrder => exact_greens_second_order(x, xi),
            ExactKernel::Beam => exact_greens_beam(x, xi),
        }
    }
}

/// Kernel of `-u'' = f`, `u(0) = u(1) = 0`.
pub fn exact_greens_second_order(x: f64, xi: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("xi", xi)?;
    Ok(if x <= xi { x * (1.0 - xi) } else { xi * (1.0 - x) })
}

/// One column `x -> G(x, xi)` of the clamped beam kernel, as a pair of cubics:
/// `sum_k left[k] x^k` on `[0, xi]` and `sum_k right[k] (1 - x)^k` on `[xi, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamColumn {
    pub xi: f64,
    pub left: [f64; 4],
    pub right: [f64; 4],
}

const FALLING: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [0.0, 1.0, 2.0, 3.0],
    [0.0, 0.0, 2.0, 6.0],
    [0.0, 0.0, 0.0, 6.0],
];

fn power(t: f64, k: isize) -> f64 {
    if k < 0 {
        0.0
    } else {
        t.powi(k as i32)
    }
}

/// d-th derivative of `t^k` at `t`, as a row over k.
fn derivative_row(t: f64, d: usize) -> [f64; 4] {
    let mut row = [0.0; 4];
    for (k, r) in row.iter_mut().enumerate() {
        *r = FALLING[d][k] * power(t, k as isize - d as isize);
    }
    row
}

impl BeamColumn {
    /// Solves the 8x8 matching system: clamped at both ends, `C^2` at `xi`,
    /// unit jump in the third derivative.
    pub fn solve(xi: f64) -> Result<Self> {
        check_unit("xi", xi)?;
        // unknown order: left[0], left[1], right[0], right[1], then the rest,
        // so each boundary condition is a unit row on its own pivot column
        const L: [usize; 4] = [0, 1, 4, 5];
        const R: [usize; 4] = [2, 3, 6, 7];
        let mut a = [[0.0; 8]; 8];
        let mut rhs = [0.0; 8];
        for (row, a_row) in a.iter_mut().take(4).enumerate() {
            a_row[row] = 1.0;
        }
        let s = 1.0 - xi;
        for d in 0..4 {
            let l = derivative_row(xi, d);
            let r = derivative_row(s, d);
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            for k in 0..4 {
                a[4 + d][L[k]] = -l[k];
                a[4 + d][R[k]] = sign * r[k];
            }
        }
        rhs[7] = 1.0;
        let c = gauss_solve(a, rhs)?;
        Ok(BeamColumn {
            xi,
            left: L.map(|i| c[i]),
            right: R.map(|i| c[i]),
        })
    }

    /// d-th derivative of the column at `x`, taking the right piece for `x > xi`.
    pub fn derivative(&self, x: f64, d: usize) -> f64 {
        if x <= self.xi {
            derivative_row(x, d)
                .iter()
                .zip(&self.left)
                .map(|(r, c)| r * c)
                .sum()
        } else {
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            sign * derivative_row(1.0 - x, d)
                .iter()
                .zip(&self.right)
                .map(|(r, c)| r * c)
                .sum::<f64>()
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// Largest violation of the boundary and matching conditions.
    pub fn residual(&self) -> f64 {
        let left = |d| {
            derivative_row(self.xi, d)
                .iter()
                .zip(&self.left)
                .map(|(r, c)| r * c)
                .sum::<f64>()
        };
        let right = |d| {
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            sign * derivative_row(1.0 - self.xi, d)
                .iter()
                .zip(&self.right)
                .map(|(r, c)| r * c)
                .sum::<f64>()
        };
        [
            self.left[0].abs(),
            self.left[1].abs(),
            self.right[0].abs(),
            self.right[1].abs(),
            (right(0) - left(0)).abs(),
            (right(1) - left(1)).abs(),
            (right(2) - left(2)).abs(),
            (right(3) - left(3) - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn gauss_solve(mut a: [[f64; 8]; 8], mut b: [f64; 8]) -> Result<[f64; 8]> {
    for col in 0..8 {
        // first row on ties, so the boundary rows pivot on themselves
        let p = (col..8).fold(col, |best, i| {
            if a[i][col].abs() > a[best][col].abs() {
                i
            } else {
                best
            }
        });
        if a[p][col].abs() < 1e-14 {
            return Err(Error::Singular {
                pivot: a[p][col].abs(),
                threshold: 1e-14,
            });
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..8 {
            let f = a[r][col] / a[col][col];
            for c in col..8 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 8];
    for r in (0..8).rev() {
        let s: f64 = (r + 1..8).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

/// Kernel of `u'''' = f` with `u = u' = 0` at both ends.
pub fn exact_greens_beam(x: f64, xi: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(BeamColumn::solve(xi)?.value(x))
}

/// Solution of `-u'' = 1`.
pub fn unit_load_second_order(x: f64) -> f64 {
    x * (1.0 - x) / 2.0
}

/// Solution of `u'''' = 1`, clamped.
pub fn unit_load_beam(x: f64) -> f64 {
    (x * (1.0 - x)).powi(2) / 24.0
}

/// Solution of `-u'''''' = 1` with `u = u' = u'' = 0` at both ends.
pub fn unit_load_sixth(x: f64) -> f64 {
    (x * (1.0 - x)).powi(3) / 720.0
}

pub fn exact_unit_load(family: Family) -> Option<fn(f64) -> f64> {
    match family {
        Family::SecondOrder1D => Some(unit_load_second_order),
        Family::FourthOrder1D => Some(unit_load_beam),
        Family::SixthOrder1D => Some(unit_load_sixth),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct EigenExpansion {
    pub kernel: GreensKernel,
    /// Ascending eigenvalues of the operator.
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
}

const EXPANSION_TOL: f64 = 1e-13;
const EXPANSION_MAX_ITER: usize = 5_000;

/// Truncated spectral kernel `sum_{k <= k_max} phi_k phi_k^T / (lambda_k w)`,
/// with eigenpairs from block inverse subspace iteration and Rayleigh-Ritz.
pub fn eigen_expansion_kernel(op: &Arc<DiscreteOperator>, k_max: usize) -> Result<EigenExpansion> {
    let a = op.matrix();
    let m = a.rows();
    if k_max == 0 || k_max > m {
        return Err(Error::OutOfRange(format!("k_max = {k_max} not in 1..={m}")));
    }
    let (l, _) = cholesky(a).map_err(|_| {
        Error::PreconditionViolated("eigen expansion needs a positive definite operator".into())
    })?;
    let block = m.min(k_max + (k_max / 2).max(5));
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|b| {
            (0..m)
                .map(|i| (((i + 1) * (b + 1)) as f64 * std::f64::consts::PI / (m + 1) as f64).sin() + 1e-3 * ((i * 7 + b * 3) % 11) as f64)
                .collect()
        })
        .collect();
    orthonormalize(&mut basis);
    let mut previous: Option<Vec<f64>> = None;
    for it in 1..=EXPANSION_MAX_ITER {
        for v in basis.iter_mut() {
            *v = solve_lower_upper(&l, v);
        }
        orthonormalize(&mut basis);
        let av: Vec<Vec<f64>> = basis.iter().map(|v| a.matvec(v)).collect();
        let small = Matrix::from_fn(block, block, |i, j| {
            let s: f64 = basis[i].iter().zip(&av[j]).map(|(x, y)| x * y).sum();
            let t: f64 = basis[j].iter().zip(&av[i]).map(|(x, y)| x * y).sum();
            0.5 * (s + t)
        });
        let (theta, y) = symmetric_eigen(&small);
        basis = (0..block)
            .map(|c| {
                (0..m)
                    .map(|i| (0..block).map(|r| basis[r][i] * y[(r, c)]).sum())
                    .collect()
            })
            .collect();
        let converged = block == m
            || previous.as_ref().is_some_and(|p| {
                (0..k_max).all(|k| (theta[k] - p[k]).abs() <= EXPANSION_TOL * theta[k].abs())
            });
        if converged {
            let w = quadrature_weights(op.grid());
            let wv = w.values();
            let lambda = &theta[..k_max];
            let mut k = Matrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let s: f64 = (0..k_max).map(|q| basis[q][i] * basis[q][j] / lambda[q]).sum();
                    k[(i, j)] = s / wv[j];
                    k[(j, i)] = s / wv[j];
                }
            }
            return Ok(EigenExpansion {
                kernel: GreensKernel::from_matrix(k, w)?,
                eigenvalues: lambda.to_vec(),
                iterations: it,
            });
        }
        previous = Some(theta);
    }
    Err(Error::NoConvergence {
        iterations: EXPANSION_MAX_ITER,
        estimate: previous.map_or(f64::NAN, |p| p[0]),
    })
}

fn solve_lower_upper(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|j| l[(i, j)] * y[j]).sum();
        y[i] = (y[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| l[(j, i)] * y[j]).sum();
        y[i] = (y[i] - s) / l[(i, i)];
    }
    y
}
