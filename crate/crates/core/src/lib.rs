//! Discrete Green's operators for clamped higher-order elliptic problems and
//! a classification of their positivity properties.
//!
//! Pipeline: [`grid::make_grid`] -> [`discretization::discretize`] ->
//! [`kernel::build_greens_kernel`] -> [`positivity::classify`].

pub mod discretization;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod oracles;
pub mod positivity;
pub mod report;

pub use discretization::{
    admissibility_check, apply_operator, discretize, AdmissibilityReport, DiscreteOperator, Family,
    Potential, ProblemSpec,
};
pub use error::{Error, Result};
pub use grid::{integrate, make_grid, quadrature_weights, sample_field, Bounds, Field, Grid, Weights};
pub use kernel::{apply_kernel, build_greens_kernel, hs_norm, kernel_symmetry_defect, GreensKernel};
pub use linalg::{factor_symmetric, invert, min_eigenvalue, solve, Factorization, Matrix};
pub use oracles::{eigen_expansion_kernel, exact_greens_beam, exact_greens_second_order};
pub use positivity::{
    bump_witness, classify, quadratic_form, row_mass_field, solve_unit_load,
    somewhere_positive_check, total_mass, PositivityReport, Tolerances, Verdict, WitnessF,
};
