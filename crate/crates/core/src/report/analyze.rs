use std::collections::BTreeMap;

use serde::Serialize;

use crate::discretization::{assess, AdmissibilityReport};
use crate::grid::Field;
use crate::kernel::{hs_norm, kernel_from_factorization, GreensKernel};
use crate::positivity::{classify_with, row_mass_field, unit_load_with, PositivityReport, WitnessF};

use super::config::RunConfig;
use super::csv::{emit_field_csv, emit_heatmap_csv, write_file};
use super::{to_json, CliError, Exit, Stopwatch, SCHEMA};

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    #[serde(flatten)]
    pub report: PositivityReport,
    pub theorem_violations: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Witnesses {
    pub mean_value: Option<WitnessF>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub schema: &'static str,
    pub config: RunConfig,
    pub admissibility: AdmissibilityReport,
    pub lambda_min: Option<f64>,
    pub hs_norm: Option<f64>,
    pub verdicts: Option<Verdicts>,
    pub witnesses: Witnesses,
    pub timings: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub report: AnalyzeReport,
    pub kernel: Option<GreensKernel>,
    pub row_mass: Option<Field>,
    pub unit_load: Option<Field>,
    pub exit: Exit,
}

impl AnalyzeOutcome {
    pub fn json(&self) -> Result<String, CliError> {
        to_json(&self.report)
    }
}

/// Grid, operator, admissibility, kernel and classification for one
/// configuration. Does not touch the file system.
pub fn analyze(config: &RunConfig, record_timings: bool) -> Result<AnalyzeOutcome, CliError> {
    config.validate()?;
    let mut clock = Stopwatch::new(record_timings);
    let tol = config.resolved_tolerances();
    let op = config.operator()?;
    clock.lap("discretize");
    let (admissibility, factorization) = assess(&op, tol.sym, tol.sing);
    clock.lap("factor");
    let factorization = match factorization {
        Some(f) if admissibility.admissible => f,
        _ => {
            return Ok(AnalyzeOutcome {
                report: AnalyzeReport {
                    schema: SCHEMA,
                    config: config.clone(),
                    admissibility,
                    lambda_min: None,
                    hs_norm: None,
                    verdicts: None,
                    witnesses: Witnesses::default(),
                    timings: clock.finish(),
                },
                kernel: None,
                row_mass: None,
                unit_load: None,
                exit: Exit::Inadmissible,
            })
        }
    };
    let kernel = kernel_from_factorization(&op, &factorization);
    clock.lap("kernel");
    let report = classify_with(&op, &factorization, &kernel, &tol)?;
    clock.lap("classify");
    let unit_load = unit_load_with(&op, &factorization)?;
    let row_mass = row_mass_field(&kernel);
    let theorem_violations = report.theorem_violations();
    let exit = if theorem_violations.is_empty() {
        Exit::Ok
    } else {
        Exit::TheoremViolation
    };
    let lambda_min = report.positive_operator.lambda_min;
    let witnesses = Witnesses {
        mean_value: report.witness.clone(),
    };
    Ok(AnalyzeOutcome {
        report: AnalyzeReport {
            schema: SCHEMA,
            config: config.clone(),
            admissibility,
            lambda_min: Some(lambda_min),
            hs_norm: Some(hs_norm(&kernel)),
            verdicts: Some(Verdicts {
                report,
                theorem_violations,
            }),
            witnesses,
            timings: clock.finish(),
        },
        kernel: Some(kernel),
        row_mass: Some(row_mass),
        unit_load: Some(unit_load),
        exit,
    })
}

/// Runs [`analyze`] and writes the report and requested CSV files.
/// Without a report path the JSON goes to stdout.
pub fn run_analyze(config: &RunConfig, record_timings: bool) -> Result<AnalyzeOutcome, CliError> {
    let outcome = analyze(config, record_timings)?;
    let json = outcome.json()?;
    match &config.outputs.report {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    let out = &config.outputs;
    if let (Some(path), Some(k)) = (&out.heatmap, &outcome.kernel) {
        emit_heatmap_csv(k.matrix(), k.grid(), path)?;
    }
    if let (Some(path), Some(f)) = (&out.row_mass_csv, &outcome.row_mass) {
        emit_field_csv(f, path)?;
    }
    if let (Some(path), Some(f)) = (&out.unit_load_csv, &outcome.unit_load) {
        emit_field_csv(f, path)?;
    }
    Ok(outcome)
}
