//! Centered finite-difference operators with clamped boundary conditions.
//!
//! Every family is assembled from symmetric 1D building blocks, so the dense
//! matrix is exactly symmetric without post-hoc symmetrization:
//!
//! * `T2 = tridiag(-1, 2, -1) / h^2` is `-D^2` with `u = 0` at both ends.
//! * `Q4` is the pentadiagonal `D^4` stencil with the ghost value `u_{-1} = u_1`
//!   folded into the near-boundary rows, i.e. `u = u' = 0`.
//! * `Q6` is the septadiagonal `-D^6` stencil with `u = u' = u'' = 0`. The two
//!   ghosts are `u_{-1} = -u_2 / 8` and `u_{-2} = -2 u_1 - 3 u_2 / 4`, which
//!   reproduce the odd reflection of a pure cubic and only touch the two
//!   diagonals nearest each end.
//!
//! 2D operators on x-major grids are Kronecker sums of these blocks.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{same_grid, Field, Grid};
use crate::linalg::{factor_symmetric, FactorMethod, Factorization, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[serde(rename = "second-order-1d")]
    SecondOrder1D,
    #[serde(rename = "fourth-order-1d")]
    FourthOrder1D,
    #[serde(rename = "sixth-order-1d")]
    SixthOrder1D,
    #[serde(rename = "laplace-2d")]
    Laplace2D,
    #[serde(rename = "biharmonic-2d")]
    Biharmonic2D,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::SecondOrder1D,
        Family::FourthOrder1D,
        Family::SixthOrder1D,
        Family::Laplace2D,
        Family::Biharmonic2D,
    ];

    /// Differential order `m`.
    pub fn order(self) -> usize {
        match self {
            Family::SecondOrder1D | Family::Laplace2D => 2,
            Family::FourthOrder1D | Family::Biharmonic2D => 4,
            Family::SixthOrder1D => 6,
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            Family::Laplace2D | Family::Biharmonic2D => 2,
            _ => 1,
        }
    }

    /// Interior nodes per axis needed by the stencil.
    pub fn min_count(self) -> usize {
        self.order() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::SecondOrder1D => "second-order-1d",
            Family::FourthOrder1D => "fourth-order-1d",
            Family::SixthOrder1D => "sixth-order-1d",
            Family::Laplace2D => "laplace-2d",
            Family::Biharmonic2D => "biharmonic-2d",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidProblem(format!("unknown family '{s}'")))
    }
}

/// Zero-order coefficient `c(x)` added to the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Explicit nodal values.
    Nodal { values: Vec<f64> },
}

impl Potential {
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let values = match self {
            Potential::Zero => vec![0.0; grid.len()],
            Potential::Constant { value } => vec![*value; grid.len()],
            Potential::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                if center.len() != grid.dimension() {
                    return Err(Error::InvalidProblem(format!(
                        "bump center has {} coordinates, grid is {}D",
                        center.len(),
                        grid.dimension()
                    )));
                }
                grid.nodes()
                    .map(|p| {
                        let r2: f64 = p.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                        amplitude * (-r2 / (2.0 * width * width)).exp()
                    })
                    .collect()
            }
            Potential::Nodal { values } => {
                if values.len() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.len(),
                        got: values.len(),
                    });
                }
                values.clone()
            }
        };
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    family: Family,
    potential: Potential,
    grid: Arc<Grid>,
}

impl ProblemSpec {
    pub fn new(family: Family, potential: Potential, grid: Arc<Grid>) -> Result<Self> {
        if grid.dimension() != family.dimension() {
            return Err(Error::InvalidProblem(format!(
                "{family} needs a {}D grid, got {}D",
                family.dimension(),
                grid.dimension()
            )));
        }
        // order m > n/2 for every supported family
        assert!(2 * family.order() > family.dimension());
        if let Some(&n) = grid.counts().iter().find(|&&n| n < family.min_count()) {
            return Err(Error::InvalidProblem(format!(
                "{family} needs at least {} interior nodes per axis, got {n}",
                family.min_count()
            )));
        }
        Ok(ProblemSpec {
            family,
            potential,
            grid,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn with_potential(&self, potential: Potential) -> ProblemSpec {
        ProblemSpec {
            potential,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: Matrix,
    spec: Option<ProblemSpec>,
    grid: Arc<Grid>,
}

impl DiscreteOperator {
    /// Wraps an arbitrary symmetric matrix on a grid. Used for synthetic
    /// operators that are not in the family menu.
    pub fn from_matrix(grid: Arc<Grid>, matrix: Matrix) -> Result<Self> {
        if matrix.rows() != grid.len() || !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: matrix.rows(),
            });
        }
        let defect = matrix.symmetry_defect();
        if defect > 0.0 {
            return Err(Error::NotSymmetric { defect });
        }
        Ok(DiscreteOperator {
            matrix,
            spec: None,
            grid,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn spec(&self) -> Option<&ProblemSpec> {
        self.spec.as_ref()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

/// `tridiag(-1, 2, -1) / h^2`.
pub fn second_difference(n: usize, h: f64) -> Matrix {
    let s = 1.0 / (h * h);
    banded(n, &[2.0 * s, -s])
}

/// Clamped `D^4` via ghost reflection `u_{-1} = u_1`.
pub fn clamped_fourth(n: usize, h: f64) -> Matrix {
    let s = 1.0 / h.powi(4);
    let mut m = banded(n, &[6.0 * s, -4.0 * s, s]);
    m[(0, 0)] += s;
    m[(n - 1, n - 1)] += s;
    m
}

/// Clamped `-D^6`; see the module docs for the ghost closure.
pub fn clamped_sixth(n: usize, h: f64) -> Matrix {
    let s = 1.0 / h.powi(6);
    let mut m = banded(n, &[20.0 * s, -15.0 * s, 6.0 * s, -s]);
    for (near, extra) in [(0, 2.0 * s), (1, 0.125 * s)] {
        m[(near, near)] += extra;
        m[(n - 1 - near, n - 1 - near)] += extra;
    }
    m
}

/// Symmetric Toeplitz band with `diagonals[k]` on the k-th off-diagonal.
fn banded(n: usize, diagonals: &[f64]) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        diagonals.get(i.abs_diff(j)).copied().unwrap_or(0.0)
    })
}

/// Adds `coeff * (a ⊗ b)` into `target` for x-major ordering.
fn kron_add(target: &mut Matrix, a: &Matrix, b: &Matrix, coeff: f64) {
    let (na, nb) = (a.rows(), b.rows());
    for ix in 0..na {
        for jx in 0..na {
            let av = a[(ix, jx)];
            if av == 0.0 {
                continue;
            }
            for iy in 0..nb {
                for jy in 0..nb {
                    let bv = b[(iy, jy)];
                    if bv != 0.0 {
                        target[(ix * nb + iy, jx * nb + jy)] += coeff * av * bv;
                    }
                }
            }
        }
    }
}

pub fn discretize(spec: &ProblemSpec) -> Result<DiscreteOperator> {
    let grid = &spec.grid;
    let counts = grid.counts();
    let h = grid.spacing();
    let mut matrix = match spec.family {
        Family::SecondOrder1D => second_difference(counts[0], h[0]),
        Family::FourthOrder1D => clamped_fourth(counts[0], h[0]),
        Family::SixthOrder1D => clamped_sixth(counts[0], h[0]),
        Family::Laplace2D | Family::Biharmonic2D => {
            let (nx, ny) = (counts[0], counts[1]);
            let (ix, iy) = (Matrix::identity(nx), Matrix::identity(ny));
            let (tx, ty) = (second_difference(nx, h[0]), second_difference(ny, h[1]));
            let mut m = Matrix::zeros(nx * ny, nx * ny);
            if spec.family == Family::Laplace2D {
                kron_add(&mut m, &tx, &iy, 1.0);
                kron_add(&mut m, &ix, &ty, 1.0);
            } else {
                kron_add(&mut m, &clamped_fourth(nx, h[0]), &iy, 1.0);
                kron_add(&mut m, &tx, &ty, 2.0);
                kron_add(&mut m, &ix, &clamped_fourth(ny, h[1]), 1.0);
            }
            m
        }
    };
    let c = spec.potential.sample(grid)?;
    for (i, ci) in c.iter().enumerate() {
        matrix[(i, i)] += ci;
    }
    Ok(DiscreteOperator {
        matrix,
        spec: Some(spec.clone()),
        grid: Arc::clone(grid),
    })
}

pub fn apply_operator(op: &DiscreteOperator, field: &Field) -> Result<Field> {
    same_grid(&op.grid, field.grid())?;
    Field::new(Arc::clone(&op.grid), op.matrix.matvec(field.values()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub symmetry_defect: f64,
    pub symmetric: bool,
    pub factorization: Option<FactorMethod>,
    pub smallest_pivot: f64,
    pub pivot_threshold: f64,
    pub invertible: bool,
    pub admissible: bool,
}

/// Admissibility check that also hands back the factorization on success.
pub fn assess(
    op: &DiscreteOperator,
    tol_sym: f64,
    tol_sing: f64,
) -> (AdmissibilityReport, Option<Factorization>) {
    let symmetry_defect = op.matrix.symmetry_defect();
    let symmetric = symmetry_defect <= tol_sym;
    let pivot_threshold = tol_sing * op.matrix.max_abs();
    // factorization requires exact symmetry; a tolerated defect is symmetrized away
    let target = if symmetry_defect > 0.0 {
        crate::linalg::symmetrize(&op.matrix)
    } else {
        op.matrix.clone()
    };
    let (factorization, smallest_pivot) = match factor_symmetric(&target, tol_sing) {
        Ok(f) => {
            let p = f.smallest_pivot();
            (Some(f), p)
        }
        Err(Error::Singular { pivot, .. }) => (None, pivot),
        Err(_) => (None, 0.0),
    };
    let invertible = factorization.is_some();
    let report = AdmissibilityReport {
        symmetry_defect,
        symmetric,
        factorization: factorization.as_ref().map(Factorization::method),
        smallest_pivot,
        pivot_threshold,
        invertible,
        admissible: symmetric && invertible,
    };
    (report, factorization)
}

pub fn admissibility_check(op: &DiscreteOperator, tol_sym: f64, tol_sing: f64) -> AdmissibilityReport {
    assess(op, tol_sym, tol_sing).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, sample_field, Bounds};
    use crate::linalg::{min_eigenvalue, solve};

    fn unit(n: usize) -> Arc<Grid> {
        make_grid(1, Bounds::Interval { a: 0.0, b: 1.0 }, &[n]).unwrap()
    }

    fn square(n: usize) -> Arc<Grid> {
        make_grid(
            2,
            Bounds::Rectangle { a: 0.0, b: 1.0, c: 0.0, d: 1.0 },
            &[n, n],
        )
        .unwrap()
    }

    fn op(family: Family, grid: Arc<Grid>, potential: Potential) -> DiscreteOperator {
        discretize(&ProblemSpec::new(family, potential, grid).unwrap()).unwrap()
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("third-order".parse::<Family>().is_err());
    }

    #[test]
    fn second_order_stencil() {
        let a = op(Family::SecondOrder1D, unit(3), Potential::Zero);
        let expected = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.matrix()[(i, j)], 16.0 * expected[i][j]);
            }
        }
    }

    #[test]
    fn beam_corner_includes_ghost() {
        let a = op(Family::FourthOrder1D, unit(5), Potential::Zero);
        let h4 = (1.0f64 / 6.0).powi(4);
        assert!((a.matrix()[(0, 0)] * h4 - 7.0).abs() < 1e-12);
        assert!((a.matrix()[(2, 2)] * h4 - 6.0).abs() < 1e-12);
        assert!((a.matrix()[(0, 2)] * h4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sixth_order_closure_rows() {
        let a = op(Family::SixthOrder1D, unit(9), Potential::Zero);
        let h6 = 0.1f64.powi(6);
        let row = |i: usize| -> Vec<f64> {
            (0..9).map(|j| (a.matrix()[(i, j)] * h6 * 1e3).round() / 1e3).collect()
        };
        assert_eq!(row(0)[..4], [22.0, -15.0, 6.0, -1.0]);
        assert_eq!(row(1)[..5], [-15.0, 20.125, -15.0, 6.0, -1.0]);
        assert_eq!(row(4), vec![0.0, -1.0, 6.0, -15.0, 20.0, -15.0, 6.0, -1.0, 0.0]);
    }

    #[test]
    fn laplace_2d_stencil() {
        let a = op(Family::Laplace2D, square(3), Potential::Zero);
        for i in 0..9 {
            assert_eq!(a.matrix()[(i, i)], 64.0);
        }
        let center = 4;
        let off: Vec<f64> = (0..9)
            .filter(|&j| j != center)
            .map(|j| a.matrix()[(center, j)])
            .filter(|&v| v != 0.0)
            .collect();
        assert_eq!(off, vec![-16.0; 4]);
    }

    #[test]
    fn biharmonic_13_point_interior() {
        let g = square(7);
        let a = op(Family::Biharmonic2D, Arc::clone(&g), Potential::Zero);
        let h4 = (1.0f64 / 8.0).powi(4);
        let c = g.index(&[3, 3]);
        let at = |dx: isize, dy: isize| {
            let j = g.index(&[(3 + dx) as usize, (3 + dy) as usize]);
            (a.matrix()[(c, j)] * h4 * 1e9).round() / 1e9
        };
        assert_eq!(at(0, 0), 20.0);
        assert_eq!(at(1, 0), -8.0);
        assert_eq!(at(0, -1), -8.0);
        assert_eq!(at(1, 1), 2.0);
        assert_eq!(at(-2, 0), 1.0);
        assert_eq!(at(0, 2), 1.0);
        let nonzeros = (0..g.len()).filter(|&j| a.matrix()[(c, j)] != 0.0).count();
        assert_eq!(nonzeros, 13);
        // clamped corner: ghost reflection in both directions
        let corner = g.index(&[0, 0]);
        assert!((a.matrix()[(corner, corner)] * h4 - 22.0).abs() < 1e-9);
    }

    #[test]
    fn every_family_is_exactly_symmetric_and_positive() {
        let cases = [
            (Family::SecondOrder1D, unit(20)),
            (Family::FourthOrder1D, unit(20)),
            (Family::SixthOrder1D, unit(20)),
            (Family::Laplace2D, square(8)),
            (Family::Biharmonic2D, square(8)),
        ];
        for (family, grid) in cases {
            let bump = Potential::GaussianBump {
                amplitude: 50.0,
                center: vec![0.3; grid.dimension()],
                width: 0.1,
            };
            for potential in [Potential::Zero, bump] {
                let a = op(family, Arc::clone(&grid), potential);
                assert_eq!(a.matrix().symmetry_defect(), 0.0, "{family}");
                let r = admissibility_check(&a, 0.0, 1e-10);
                assert!(r.admissible, "{family}");
                assert_eq!(r.factorization, Some(FactorMethod::Cholesky));
            }
        }
    }

    #[test]
    fn rejects_small_grids_and_bad_potentials() {
        let g = unit(4);
        assert!(ProblemSpec::new(Family::FourthOrder1D, Potential::Zero, Arc::clone(&g)).is_err());
        assert!(ProblemSpec::new(Family::Laplace2D, Potential::Zero, Arc::clone(&g)).is_err());
        let spec = ProblemSpec::new(
            Family::SecondOrder1D,
            Potential::Constant { value: f64::NAN },
            g,
        )
        .unwrap();
        assert!(matches!(discretize(&spec), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn operator_application() {
        let g = unit(199);
        let a = op(Family::SecondOrder1D, Arc::clone(&g), Potential::Zero);
        let zero = apply_operator(&a, &Field::zeros(Arc::clone(&g))).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let pi = std::f64::consts::PI;
        let s = sample_field(&g, |p| (pi * p[0]).sin()).unwrap();
        let out = apply_operator(&a, &s).unwrap();
        let h = g.spacing()[0];
        let bound = pi.powi(4) * h * h / 12.0;
        for (o, v) in out.values().iter().zip(s.values()) {
            assert!((o - pi * pi * v).abs() <= bound * 1.0001);
        }
        assert!(apply_operator(&a, &Field::zeros(unit(5))).is_err());
    }

    #[test]
    fn beam_shifted_by_first_eigenvalue_is_inadmissible() {
        for n in [5, 20] {
            let g = unit(n);
            let a = op(Family::FourthOrder1D, Arc::clone(&g), Potential::Zero);
            let lambda = min_eigenvalue(a.matrix(), 1e-14).unwrap().value;
            let shifted = op(Family::FourthOrder1D, g, Potential::Constant { value: -lambda });
            let r = admissibility_check(&shifted, 0.0, 1e-10);
            assert!(!r.invertible, "n={n}: pivot {}", r.smallest_pivot);
            assert!(!r.admissible);
        }
    }

    #[test]
    fn second_order_convergence_rate() {
        let pi = std::f64::consts::PI;
        let errors: Vec<f64> = [49, 99, 199]
            .into_iter()
            .map(|n| {
                let g = unit(n);
                let a = op(Family::SecondOrder1D, Arc::clone(&g), Potential::Zero);
                let f = factor_symmetric(a.matrix(), 1e-12).unwrap();
                let rhs: Vec<f64> = g.nodes().map(|p| pi * pi * (pi * p[0]).sin()).collect();
                let u = solve(&f, &rhs).unwrap();
                g.nodes()
                    .zip(&u)
                    .map(|(p, v)| (v - (pi * p[0]).sin()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errors.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.1, "{errors:?}");
        }
    }
}
