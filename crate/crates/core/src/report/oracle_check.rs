//! Refinement study against the exact 1D kernels and unit loads.

use serde::Serialize;

use crate::discretization::Family;
use crate::kernel::{build_greens_kernel, GreensKernel};
use crate::oracles::{exact_unit_load, BeamColumn, ExactKernel};
use crate::positivity::solve_unit_load;

use super::config::RunConfig;
use super::csv::write_file;
use super::{to_json, CliError, SCHEMA};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleLevel {
    pub n: usize,
    pub h: f64,
    /// `max_ij |K_ij - G(x_i, x_j)|`.
    pub kernel_error: Option<f64>,
    /// `max_i |u_i - u(x_i)|` for the unit load.
    pub unit_load_error: f64,
    /// Discrete unit-load value at the node closest to the midpoint.
    pub unit_load_mid: f64,
    pub unit_load_mid_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub schema: &'static str,
    pub family: Family,
    pub ladder: Vec<usize>,
    pub levels: Vec<OracleLevel>,
    /// Successive error ratios `e(N_k) / e(N_{k+1})`.
    pub kernel_ratios: Option<Vec<f64>>,
    pub unit_load_ratios: Vec<f64>,
}

impl OracleReport {
    pub fn json(&self) -> Result<String, CliError> {
        to_json(self)
    }
}

/// Max-norm distance between a discrete kernel on `[0, 1]` and an exact one.
pub fn kernel_error(kernel: &GreensKernel, exact: ExactKernel) -> Result<f64, CliError> {
    let grid = kernel.grid();
    let xs: Vec<f64> = (0..grid.len()).map(|i| grid.node(i)[0]).collect();
    let columns: Vec<Option<BeamColumn>> = match exact {
        ExactKernel::Beam => xs.iter().map(|&x| BeamColumn::solve(x).map(Some)).collect::<Result<_, _>>()?,
        ExactKernel::SecondOrder => vec![None; xs.len()],
    };
    let mut err: f64 = 0.0;
    for (j, &xj) in xs.iter().enumerate() {
        for (i, &xi) in xs.iter().enumerate() {
            let g = match &columns[j] {
                Some(col) => col.value(xi),
                None => exact.value(xi, xj)?,
            };
            err = err.max((kernel.matrix()[(i, j)] - g).abs());
        }
    }
    Ok(err)
}

fn ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

pub fn oracle_check(config: &RunConfig, ladder: &[usize]) -> Result<OracleReport, CliError> {
    let family = config.family;
    let exact_u = exact_unit_load(family)
        .ok_or_else(|| CliError::Config(format!("no exact oracle for {family}")))?;
    if config.bounds()? != (crate::grid::Bounds::Interval { a: 0.0, b: 1.0 }) {
        return Err(CliError::Config("oracles are defined on [0, 1] only".into()));
    }
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!("ladder must be strictly increasing: {ladder:?}")));
    }
    let tol = config.resolved_tolerances();
    let mut levels = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let grid = config.grid_with(&[n])?;
        let op = config.operator_with(grid.clone(), crate::discretization::Potential::Zero)?;
        let kernel_error = match ExactKernel::for_family(family) {
            Some(exact) => Some(kernel_error(&build_greens_kernel(&op, tol.sing)?, exact)?),
            None => None,
        };
        let u = solve_unit_load(&op, tol.sing)?;
        let unit_load_error = (0..n)
            .map(|i| (u.values()[i] - exact_u(grid.node(i)[0])).abs())
            .fold(0.0, f64::max);
        let mid = n / 2;
        levels.push(OracleLevel {
            n,
            h: grid.spacing()[0],
            kernel_error,
            unit_load_error,
            unit_load_mid: u.values()[mid],
            unit_load_mid_exact: exact_u(grid.node(mid)[0]),
        });
    }
    let kernel_ratios = levels
        .iter()
        .map(|l| l.kernel_error)
        .collect::<Option<Vec<_>>>()
        .map(|e| ratios(&e));
    let unit_load_ratios = ratios(&levels.iter().map(|l| l.unit_load_error).collect::<Vec<_>>());
    Ok(OracleReport {
        schema: SCHEMA,
        family,
        ladder: ladder.to_vec(),
        levels,
        kernel_ratios,
        unit_load_ratios,
    })
}

pub fn run_oracle_check(config: &RunConfig, ladder: &[usize]) -> Result<OracleReport, CliError> {
    let report = oracle_check(config, ladder)?;
    let json = report.json()?;
    match &config.outputs.report {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    Ok(report)
}
