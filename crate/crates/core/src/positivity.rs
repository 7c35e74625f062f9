//! Positivity hierarchy of a discrete Green's operator.
//!
//! The report separates three kinds of statements:
//!
//! * what holds for every positive operator: a nonnegative quadratic form
//!   `sum w_i z_i K_ij w_j z_j`, nonnegative total mass, and a solution that is
//!   positive somewhere for every positive load;
//! * the three mutually equivalent properties: nonnegative unit-load
//!   solution, nonnegative row masses `sum_j K_ij w_j`, and nonnegative mean
//!   of `u_f` for every nonnegative load `f`;
//! * positivity preservation proper, i.e. an entrywise nonnegative kernel.
//!
//! All "nonnegative" verdicts share one policy: `v` fails iff
//! `v < -nonneg_rel * scale`, with the scale chosen per quantity.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::DiscreteOperator;
use crate::error::{Error, Result};
use crate::grid::{integrate, same_grid, Field, Grid};
use crate::kernel::{apply_kernel, GreensKernel};
use crate::linalg::{
    dot, factor_symmetric, min_eigenvalue_bounded, solve, EigenOptions, FactorMethod, Factorization,
};

pub const DEFAULT_SEED: u64 = 20_240_001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of the nonnegativity policy.
    pub nonneg_rel: f64,
    /// Relative tolerance for quadratic-form positivity.
    pub form_rel: f64,
    /// Allowed `max |A - A^T|`.
    pub sym: f64,
    /// Relative pivot threshold for singularity.
    pub sing: f64,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    /// Convergence tolerance for the reported smallest eigenvalue of `W K W`.
    /// The verdict itself rests on the Cholesky shift bound.
    pub weighted_eig_tol: f64,
    pub weighted_eig_max_iter: usize,
    pub quadratic_samples: usize,
    pub mean_bump_samples: usize,
    pub mean_random_samples: usize,
    pub positive_samples: usize,
    pub seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            nonneg_rel: 1e-8,
            form_rel: 1e-9,
            sym: 0.0,
            sing: 1e-10,
            eig_tol: 1e-10,
            eig_max_iter: 10_000,
            weighted_eig_tol: 1e-6,
            weighted_eig_max_iter: 200,
            quadratic_samples: 100,
            mean_bump_samples: 50,
            mean_random_samples: 50,
            positive_samples: 50,
            seed: DEFAULT_SEED,
        }
    }
}

impl Tolerances {
    fn fails(&self, value: f64, scale: f64) -> bool {
        value < -self.nonneg_rel * scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl Verdict {
    fn from_failure(failed: bool) -> Self {
        if failed {
            Verdict::Fails
        } else {
            Verdict::Holds
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRef {
    pub index: usize,
    pub coords: Vec<f64>,
}

impl NodeRef {
    pub fn new(grid: &Grid, index: usize) -> Self {
        NodeRef {
            index,
            coords: grid.node(index).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorCheck {
    pub verdict: Verdict,
    pub lambda_min: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cholesky_succeeds: bool,
    /// `lambda_min > 0` agrees with Cholesky success.
    pub cross_check_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticFormCheck {
    pub verdict: Verdict,
    pub samples: usize,
    /// `min_z q(z) / (|z|^2 max|WKW|)` over the samples.
    pub worst_normalized: f64,
    pub weighted_norm: f64,
    pub weighted_lambda_min: f64,
    pub weighted_lambda_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSignCheck {
    pub verdict: Verdict,
    pub min_entry: f64,
    pub max_abs: f64,
    pub row: NodeRef,
    pub col: NodeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSignCheck {
    pub verdict: Verdict,
    pub min_value: f64,
    pub scale: f64,
    pub at: NodeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanValueCheck {
    pub verdict: Verdict,
    pub samples: usize,
    /// Smallest `mean(u_f) / (|f|_1 max|row mass|)`.
    pub worst_normalized: f64,
    pub includes_witness: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SomewherePositiveCheck {
    pub verdict: Verdict,
    pub samples: usize,
    /// Smallest `max(u_f)` over the samples.
    pub min_of_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessF {
    pub f: Field,
    pub center: NodeRef,
    pub radius_cells: f64,
    pub mean: f64,
    /// True for the single-node load `e_i / w_i`.
    pub degenerate: bool,
}

impl Serialize for WitnessF {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("WitnessF", 5)?;
        st.serialize_field("center", &self.center)?;
        st.serialize_field("radius_cells", &self.radius_cells)?;
        st.serialize_field("mean", &self.mean)?;
        st.serialize_field("degenerate", &self.degenerate)?;
        st.serialize_field("f", self.f.values())?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub positive_operator: OperatorCheck,
    pub psd_quadratic_form: QuadraticFormCheck,
    pub positivity_preserving: KernelSignCheck,
    pub row_mass_nonneg: FieldSignCheck,
    pub unit_load_nonneg: FieldSignCheck,
    pub mean_value_nonneg: MeanValueCheck,
    pub somewhere_positive: SomewherePositiveCheck,
    pub total_mass: f64,
    pub equivalence_consistent: bool,
    #[serde(skip)]
    pub witness: Option<WitnessF>,
}

impl PositivityReport {
    /// Statements that must hold for every positive operator but do not.
    /// Any entry indicates a bug rather than a property of the input.
    pub fn theorem_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = self.positive_operator.verdict.holds();
        if positive && self.psd_quadratic_form.verdict == Verdict::Fails {
            out.push(format!(
                "quadratic form negative on a positive operator (worst {:e}, weighted lambda_min {:e})",
                self.psd_quadratic_form.worst_normalized, self.psd_quadratic_form.weighted_lambda_min
            ));
        }
        if !self.equivalence_consistent {
            out.push(format!(
                "equivalence broken: unit load {:?}, row mass {:?}, mean value {:?}",
                self.unit_load_nonneg.verdict,
                self.row_mass_nonneg.verdict,
                self.mean_value_nonneg.verdict
            ));
        }
        if self.somewhere_positive.verdict == Verdict::Fails {
            out.push(format!(
                "positive load produced a solution with max {:e} <= 0",
                self.somewhere_positive.min_of_max
            ));
        }
        out
    }
}

fn weighted_values(kernel: &GreensKernel, z: &[f64]) -> Vec<f64> {
    z.iter().zip(kernel.weights().values()).map(|(a, w)| a * w).collect()
}

fn form(kernel: &GreensKernel, wz: &[f64]) -> f64 {
    let v = kernel.matrix().matvec(wz);
    wz.iter().zip(&v).map(|(a, b)| a * b).sum()
}

/// `sum_ij w_i z_i K_ij w_j z_j`.
pub fn quadratic_form(kernel: &GreensKernel, z: &Field) -> Result<f64> {
    same_grid(kernel.grid(), z.grid())?;
    Ok(form(kernel, &weighted_values(kernel, z.values())))
}

/// `sum_ij w_i w_j K_ij`; bitwise equal to the quadratic form at `z = 1`.
pub fn total_mass(kernel: &GreensKernel) -> f64 {
    let ones = vec![1.0; kernel.len()];
    form(kernel, &weighted_values(kernel, &ones))
}

/// `(sum_j K_ij w_j)_i`.
pub fn row_mass_field(kernel: &GreensKernel) -> Field {
    let values = kernel.matrix().matvec(kernel.weights().values());
    Field::new(Arc::clone(kernel.grid()), values).expect("finite kernel")
}

/// Solution of `A u = 1`.
pub fn solve_unit_load(op: &DiscreteOperator, tol_sing: f64) -> Result<Field> {
    let f = factor_symmetric(op.matrix(), tol_sing)?;
    unit_load_with(op, &f)
}

/// Unit-load solution from an existing factorization.
pub fn unit_load_with(op: &DiscreteOperator, f: &Factorization) -> Result<Field> {
    let u = solve(f, &vec![1.0; op.grid().len()])?;
    Field::new(Arc::clone(op.grid()), u)
}

/// Smallest kernel entry and its first lexicographic location.
pub fn min_kernel_entry(kernel: &GreensKernel) -> (f64, (usize, usize)) {
    let k = kernel.matrix();
    let mut best = (k[(0, 0)], (0, 0));
    for i in 0..k.rows() {
        for (j, &v) in k.row(i).iter().enumerate() {
            if v < best.0 {
                best = (v, (i, j));
            }
        }
    }
    best
}

/// Mean of `u_f = G f` over the domain.
pub fn load_mean(kernel: &GreensKernel, f: &Field) -> Result<f64> {
    integrate(&apply_kernel(kernel, f)?, kernel.weights())
}

fn l1_norm(kernel: &GreensKernel, f: &Field) -> f64 {
    f.values()
        .iter()
        .zip(kernel.weights().values())
        .map(|(v, w)| v.abs() * w)
        .sum()
}

fn bump_field(grid: &Arc<Grid>, center: usize, radius: f64) -> Field {
    let values = (0..grid.len())
        .map(|j| {
            let s = grid.distance(center, j) / radius;
            if s < 1.0 {
                (1.0 - s * s).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    Field::new(Arc::clone(grid), values).expect("bump is finite")
}

fn unit_cell(grid: &Grid) -> f64 {
    grid.spacing().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Nonnegative load with negative mean, built around the most negative row
/// mass. Returns `None` when every row mass passes the nonnegativity policy.
pub fn bump_witness(kernel: &GreensKernel, tol: &Tolerances) -> Result<Option<WitnessF>> {
    let rm = row_mass_field(kernel);
    let scale = rm.max_abs();
    let (min, center) = rm.argmin();
    if !tol.fails(min, scale) {
        return Ok(None);
    }
    let grid = kernel.grid();
    let h = unit_cell(grid);
    let max_cells = grid.counts().iter().copied().max().unwrap_or(1);
    let ball_negative = |r: usize| {
        (0..grid.len())
            .filter(|&j| grid.distance(center, j) < r as f64 * h)
            .all(|j| rm.values()[j] < 0.0)
    };
    let mut largest = 1;
    while largest < max_cells && ball_negative(largest + 1) {
        largest += 1;
    }
    let accept = |f: &Field, mean: f64| tol.fails(mean, l1_norm(kernel, f) * scale);
    for r in (1..=largest).rev() {
        let f = bump_field(grid, center, r as f64 * h);
        let mean = load_mean(kernel, &f)?;
        if accept(&f, mean) {
            return Ok(Some(WitnessF {
                f,
                center: NodeRef::new(grid, center),
                radius_cells: r as f64,
                mean,
                degenerate: false,
            }));
        }
    }
    let mut values = vec![0.0; grid.len()];
    values[center] = 1.0 / kernel.weights().values()[center];
    let f = Field::new(Arc::clone(grid), values)?;
    let mean = load_mean(kernel, &f)?;
    if accept(&f, mean) {
        Ok(Some(WitnessF {
            f,
            center: NodeRef::new(grid, center),
            radius_cells: 0.0,
            mean,
            degenerate: true,
        }))
    } else {
        Err(Error::WitnessConstructionFailed { node: center, mean })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SomewherePositive {
    pub positive: bool,
    pub max_value: f64,
    pub argmax: NodeRef,
}

/// Checks that `G f` is positive somewhere for a strictly positive load on a
/// positive operator.
pub fn somewhere_positive_check(
    kernel: &GreensKernel,
    f: &Field,
    lambda_min: f64,
) -> Result<SomewherePositive> {
    if !(lambda_min > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "operator is not positive (lambda_min = {lambda_min:e})"
        )));
    }
    if let Some((i, v)) = f.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::PreconditionViolated(format!(
            "load is not strictly positive at node {i} (value {v:e})"
        )));
    }
    let u = apply_kernel(kernel, f)?;
    let (max_value, at) = u.argmax();
    Ok(SomewherePositive {
        positive: max_value > 0.0,
        max_value,
        argmax: NodeRef::new(kernel.grid(), at),
    })
}

/// Seeded sample loads used by the mean-value check: smooth bumps on a coarse
/// sublattice of centers followed by clamped Gaussian noise.
pub fn mean_value_samples(grid: &Arc<Grid>, tol: &Tolerances) -> Vec<Field> {
    let m = grid.len();
    let h = unit_cell(grid);
    let mut out = Vec::with_capacity(tol.mean_bump_samples + tol.mean_random_samples);
    let denom = tol.mean_bump_samples.saturating_sub(1).max(1);
    for s in 0..tol.mean_bump_samples {
        let center = s * (m - 1) / denom;
        let radius = [2.0, 4.0, 8.0][s % 3] * h;
        out.push(bump_field(grid, center, radius));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tol.seed.wrapping_add(1));
    for _ in 0..tol.mean_random_samples {
        let values = (0..m)
            .map(|_| rng.sample::<f64, _>(StandardNormal).max(0.0))
            .collect();
        out.push(Field::new(Arc::clone(grid), values).expect("finite"));
    }
    out
}

/// Seeded strictly positive loads; the first is `f = 1`.
pub fn positive_samples(grid: &Arc<Grid>, tol: &Tolerances) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(tol.seed.wrapping_add(2));
    (0..tol.positive_samples)
        .map(|s| {
            let values = if s == 0 {
                vec![1.0; grid.len()]
            } else {
                (0..grid.len()).map(|_| 0.05 + rng.gen::<f64>()).collect()
            };
            Field::new(Arc::clone(grid), values).expect("finite")
        })
        .collect()
}

/// Seeded standard-normal test functions for the quadratic form.
pub fn quadratic_samples(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let values = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
            Field::new(Arc::clone(grid), values).expect("finite")
        })
        .collect()
}

/// `min_z q(z) / (|z|^2 max|WKW|)`.
pub fn worst_normalized_form(kernel: &GreensKernel, samples: &[Field], weighted_norm: f64) -> Result<f64> {
    let values: Vec<f64> = samples
        .par_iter()
        .map(|z| {
            quadratic_form(kernel, z)
                .map(|q| q / (dot(z.values(), z.values()) * weighted_norm))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(f64::INFINITY, f64::min))
}

fn eigen_or_nan(matrix: &crate::linalg::Matrix, tol: f64, max_iter: usize) -> (f64, usize, bool, f64) {
    match min_eigenvalue_bounded(matrix, EigenOptions { tol, max_iter }) {
        Ok(e) => (e.value, e.iterations, e.converged, e.lower_bound),
        Err(_) => (f64::NAN, 0, false, f64::NAN),
    }
}

/// Full classification. Factors the operator internally.
pub fn classify(
    op: &Arc<DiscreteOperator>,
    kernel: &GreensKernel,
    tol: &Tolerances,
) -> Result<PositivityReport> {
    let factorization = factor_symmetric(op.matrix(), tol.sing)?;
    classify_with(op, &factorization, kernel, tol)
}

pub fn classify_with(
    op: &Arc<DiscreteOperator>,
    factorization: &Factorization,
    kernel: &GreensKernel,
    tol: &Tolerances,
) -> Result<PositivityReport> {
    let grid = op.grid();
    same_grid(grid, kernel.grid())?;

    let (lambda_min, iterations, converged, _) =
        eigen_or_nan(op.matrix(), tol.eig_tol, tol.eig_max_iter);
    let positive = lambda_min > 0.0;
    let cholesky_succeeds = factorization.method() == FactorMethod::Cholesky;
    let positive_operator = OperatorCheck {
        verdict: Verdict::from_failure(!positive),
        lambda_min,
        iterations,
        converged,
        cholesky_succeeds,
        cross_check_consistent: positive == cholesky_succeeds,
    };

    let weighted = kernel.weighted();
    let weighted_norm = weighted.max_abs();
    let samples = quadratic_samples(grid, tol.quadratic_samples, tol.seed);
    let worst_normalized = worst_normalized_form(kernel, &samples, weighted_norm)?;
    let (weighted_lambda_min, _, _, weighted_lower) =
        eigen_or_nan(&weighted, tol.weighted_eig_tol, tol.weighted_eig_max_iter);
    // W K W - sigma I admitted a Cholesky factor, so lambda_min(W K W) > sigma
    let eigen_ok = weighted_lower >= -tol.form_rel * weighted_norm;
    let psd_quadratic_form = QuadraticFormCheck {
        verdict: Verdict::from_failure(worst_normalized < -tol.form_rel || !eigen_ok),
        samples: samples.len(),
        worst_normalized,
        weighted_norm,
        weighted_lambda_min,
        weighted_lambda_lower_bound: weighted_lower,
    };

    let (min_entry, (ri, ci)) = min_kernel_entry(kernel);
    let max_abs = kernel.matrix().max_abs();
    let positivity_preserving = KernelSignCheck {
        verdict: Verdict::from_failure(tol.fails(min_entry, max_abs)),
        min_entry,
        max_abs,
        row: NodeRef::new(grid, ri),
        col: NodeRef::new(grid, ci),
    };

    let sign_check = |field: &Field| {
        let (min_value, at) = field.argmin();
        let scale = field.max_abs();
        FieldSignCheck {
            verdict: Verdict::from_failure(tol.fails(min_value, scale)),
            min_value,
            scale,
            at: NodeRef::new(grid, at),
        }
    };
    let rm = row_mass_field(kernel);
    let row_mass_nonneg = sign_check(&rm);
    let unit_load_nonneg = sign_check(&unit_load_with(op, factorization)?);

    let witness = bump_witness(kernel, tol)?;
    let rm_scale = if rm.max_abs() > 0.0 { rm.max_abs() } else { 1.0 };
    let loads = mean_value_samples(grid, tol);
    let normalized: Vec<f64> = loads
        .par_iter()
        .map(|f| {
            let l1 = l1_norm(kernel, f);
            load_mean(kernel, f).map(|m| if l1 > 0.0 { m / (l1 * rm_scale) } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let mut worst_mean = normalized.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(w) = &witness {
        worst_mean = worst_mean.min(w.mean / (l1_norm(kernel, &w.f) * rm_scale));
    }
    let mean_value_nonneg = MeanValueCheck {
        verdict: Verdict::from_failure(worst_mean < -tol.nonneg_rel),
        samples: loads.len() + usize::from(witness.is_some()),
        worst_normalized: worst_mean,
        includes_witness: witness.is_some(),
    };

    let somewhere_positive = if positive {
        let maxima: Vec<f64> = positive_samples(grid, tol)
            .par_iter()
            .map(|f| somewhere_positive_check(kernel, f, lambda_min).map(|s| s.max_value))
            .collect::<Result<_>>()?;
        let min_of_max = maxima.iter().copied().fold(f64::INFINITY, f64::min);
        SomewherePositiveCheck {
            verdict: Verdict::from_failure(!(min_of_max > 0.0)),
            samples: maxima.len(),
            min_of_max,
        }
    } else {
        SomewherePositiveCheck {
            verdict: Verdict::NotApplicable,
            samples: 0,
            min_of_max: f64::NAN,
        }
    };

    let equivalence_consistent = unit_load_nonneg.verdict == row_mass_nonneg.verdict
        && row_mass_nonneg.verdict == mean_value_nonneg.verdict;

    Ok(PositivityReport {
        positive_operator,
        psd_quadratic_form,
        positivity_preserving,
        row_mass_nonneg,
        unit_load_nonneg,
        mean_value_nonneg,
        somewhere_positive,
        total_mass: total_mass(kernel),
        equivalence_consistent,
        witness,
    })
}
