//! Discrete Green's kernels `K = A^{-1} W^{-1}`.
//!
//! With uniform weights `w`, `K = A^{-1} / w` and the quadrature sum
//! `sum_j K_ij w_j f_j` is exactly the solve `A^{-1} f`.

use std::sync::Arc;

use crate::discretization::DiscreteOperator;
use crate::error::{Error, Result};
use crate::grid::{quadrature_weights, same_grid, Field, Grid, Weights};
use crate::linalg::{factor_symmetric, invert, Factorization, Matrix};

#[derive(Debug, Clone)]
pub struct GreensKernel {
    k: Matrix,
    weights: Weights,
    source: Option<Arc<DiscreteOperator>>,
    raw_defect: f64,
}

impl GreensKernel {
    /// Wraps a symmetric kernel matrix with explicit weights.
    pub fn from_matrix(k: Matrix, weights: Weights) -> Result<Self> {
        if k.rows() != weights.values().len() || !k.is_square() {
            return Err(Error::DimensionMismatch {
                expected: weights.values().len(),
                got: k.rows(),
            });
        }
        let defect = k.symmetry_defect();
        if defect > 0.0 {
            return Err(Error::NotSymmetric { defect });
        }
        Ok(GreensKernel {
            k,
            weights,
            source: None,
            raw_defect: 0.0,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.weights.grid()
    }

    pub fn source(&self) -> Option<&Arc<DiscreteOperator>> {
        self.source.as_ref()
    }

    /// Relative symmetry defect of the inverse before symmetrization.
    pub fn raw_symmetry_defect(&self) -> f64 {
        self.raw_defect
    }

    pub fn len(&self) -> usize {
        self.k.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `W K W`, the matrix of the quadratic form.
    pub fn weighted(&self) -> Matrix {
        let w = self.weights.values();
        Matrix::from_fn(self.len(), self.len(), |i, j| w[i] * self.k[(i, j)] * w[j])
    }
}

pub fn build_greens_kernel(op: &Arc<DiscreteOperator>, tol_sing: f64) -> Result<GreensKernel> {
    let factorization = factor_symmetric(op.matrix(), tol_sing)?;
    Ok(kernel_from_factorization(op, &factorization))
}

/// Builds the kernel from an existing factorization of `op`.
pub fn kernel_from_factorization(
    op: &Arc<DiscreteOperator>,
    factorization: &Factorization,
) -> GreensKernel {
    let weights = quadrature_weights(op.grid());
    let inverse = invert(factorization);
    let w = weights.values();
    let n = inverse.matrix.rows();
    let k = Matrix::from_fn(n, n, |i, j| inverse.matrix[(i, j)] / w[j]);
    GreensKernel {
        k: crate::linalg::symmetrize(&k),
        weights,
        source: Some(Arc::clone(op)),
        raw_defect: inverse.raw_defect,
    }
}

/// `(G f)_i = sum_j K_ij w_j f_j`.
pub fn apply_kernel(kernel: &GreensKernel, f: &Field) -> Result<Field> {
    same_grid(kernel.grid(), f.grid())?;
    let wf: Vec<f64> = f
        .values()
        .iter()
        .zip(kernel.weights.values())
        .map(|(v, w)| v * w)
        .collect();
    Field::new(Arc::clone(kernel.grid()), kernel.k.matvec(&wf))
}

/// `max |K_ij - K_ji| / max |K|` of a raw, unsymmetrized kernel.
pub fn kernel_symmetry_defect(raw: &Matrix) -> f64 {
    let scale = raw.max_abs();
    if scale == 0.0 {
        0.0
    } else {
        raw.symmetry_defect() / scale
    }
}

/// Discrete Hilbert–Schmidt norm `sqrt(sum_ij w_i w_j K_ij^2)`.
pub fn hs_norm(kernel: &GreensKernel) -> f64 {
    let w = kernel.weights.values();
    (0..kernel.len())
        .map(|i| {
            let row = kernel.k.row(i);
            w[i] * row.iter().zip(w).map(|(k, wj)| wj * k * k).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}
