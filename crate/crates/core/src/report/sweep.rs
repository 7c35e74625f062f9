//! Constant-potential sweeps with threshold bisection.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{assess, DiscreteOperator, Potential};
use crate::kernel::kernel_from_factorization;
use crate::linalg::{min_eigenvalue_bounded, EigenOptions};
use crate::positivity::{
    classify_with, min_kernel_entry, row_mass_field, NodeRef, Tolerances, Verdict,
};

use super::config::RunConfig;
use super::csv::write_file;
use super::{to_json, CliError, Exit, Stopwatch, SCHEMA};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub log: bool,
    /// Relative width at which bisection stops.
    pub bisect_precision: f64,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.param != "c" {
            return Err(CliError::Config(format!(
                "only the constant potential 'c' can be swept, got '{}'",
                self.param
            )));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo >= self.hi {
            return Err(CliError::Config(format!("invalid range {},{}", self.lo, self.hi)));
        }
        if self.steps < 2 {
            return Err(CliError::Config(format!("steps must be at least 2, got {}", self.steps)));
        }
        if self.log && self.hi <= 0.0 {
            return Err(CliError::Config("log sweep needs a positive upper end".into()));
        }
        if !(self.bisect_precision > 0.0 && self.bisect_precision < 1.0) {
            return Err(CliError::Config(format!(
                "bisect precision must be in (0, 1), got {}",
                self.bisect_precision
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        Ok(())
    }

    /// Linear points, or log-spaced points. A log sweep with `lo <= 0` keeps
    /// `lo` and spaces the rest over `[1e-6 hi, hi]`.
    pub fn values(&self) -> Vec<f64> {
        let k = self.steps;
        let geometric = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        hi
                    } else if i == 0 {
                        lo
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        };
        if !self.log {
            return (0..k)
                .map(|i| {
                    if i + 1 == k {
                        self.hi
                    } else {
                        self.lo + (self.hi - self.lo) * i as f64 / (k - 1) as f64
                    }
                })
                .collect();
        }
        if self.lo > 0.0 {
            geometric(self.lo, self.hi, k)
        } else {
            let mut v = vec![self.lo];
            if k == 2 {
                v.push(self.hi);
            } else {
                v.extend(geometric(self.hi * 1e-6, self.hi, k - 1));
            }
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointVerdicts {
    pub positive_operator: Verdict,
    pub psd_quadratic_form: Verdict,
    pub positivity_preserving: Verdict,
    pub row_mass_nonneg: Verdict,
    pub unit_load_nonneg: Verdict,
    pub mean_value_nonneg: Verdict,
    pub somewhere_positive: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSummary {
    pub center: NodeRef,
    pub radius_cells: f64,
    pub mean: f64,
    pub degenerate: bool,
    pub nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub c: f64,
    pub admissible: bool,
    pub lambda_min: Option<f64>,
    pub min_kernel_entry: Option<f64>,
    pub min_row_mass: Option<f64>,
    pub min_unit_load: Option<f64>,
    pub total_mass: Option<f64>,
    pub somewhere_positive_min_of_max: Option<f64>,
    pub verdicts: Option<PointVerdicts>,
    pub equivalence_consistent: bool,
    pub witness: Option<WitnessSummary>,
    pub theorem_violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    /// Largest probed value with the verdict of the sweep point below.
    pub lower: f64,
    /// Smallest probed value with the changed verdict.
    pub upper: f64,
    pub verdict_lower: Verdict,
    pub verdict_upper: Verdict,
    pub bisection_steps: usize,
    pub lambda_min_upper: f64,
    pub min_kernel_entry_upper: f64,
    pub min_row_mass_upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Thresholds {
    pub positivity_preserving: Option<Threshold>,
    pub row_mass_nonneg: Option<Threshold>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema: &'static str,
    pub config: RunConfig,
    pub sweep: SweepSpec,
    pub values: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub thresholds: Thresholds,
    pub equivalence_consistent: bool,
    pub positive_operator_everywhere: bool,
    pub timings: Option<BTreeMap<String, f64>>,
}

impl SweepReport {
    pub fn json(&self) -> Result<String, CliError> {
        to_json(self)
    }

    /// Exit status: theorem violations at any point, or a non-positive
    /// operator at `c >= 0`, are failures.
    pub fn exit(&self) -> Exit {
        let broken = self.points.iter().any(|p| {
            !p.theorem_violations.is_empty()
                || (p.c >= 0.0
                    && p.verdicts
                        .as_ref()
                        .is_none_or(|v| v.positive_operator != Verdict::Holds))
        });
        if broken {
            Exit::TheoremViolation
        } else {
            Exit::Ok
        }
    }
}

fn operator_at(config: &RunConfig, c: f64) -> Result<Arc<DiscreteOperator>, CliError> {
    config.operator_with(config.grid()?, Potential::Constant { value: c })
}

fn classify_point(config: &RunConfig, tol: &Tolerances, c: f64) -> Result<SweepPoint, CliError> {
    let op = operator_at(config, c)?;
    let (adm, factorization) = assess(&op, tol.sym, tol.sing);
    let factorization = match factorization {
        Some(f) if adm.admissible => f,
        _ => {
            return Ok(SweepPoint {
                c,
                admissible: false,
                lambda_min: None,
                min_kernel_entry: None,
                min_row_mass: None,
                min_unit_load: None,
                total_mass: None,
                somewhere_positive_min_of_max: None,
                verdicts: None,
                equivalence_consistent: true,
                witness: None,
                theorem_violations: Vec::new(),
            })
        }
    };
    let kernel = kernel_from_factorization(&op, &factorization);
    let r = classify_with(&op, &factorization, &kernel, tol)?;
    let witness = r.witness.as_ref().map(|w| WitnessSummary {
        center: w.center.clone(),
        radius_cells: w.radius_cells,
        mean: w.mean,
        degenerate: w.degenerate,
        nonnegative: w.f.values().iter().all(|&v| v >= 0.0),
    });
    Ok(SweepPoint {
        c,
        admissible: true,
        lambda_min: Some(r.positive_operator.lambda_min),
        min_kernel_entry: Some(r.positivity_preserving.min_entry),
        min_row_mass: Some(r.row_mass_nonneg.min_value),
        min_unit_load: Some(r.unit_load_nonneg.min_value),
        total_mass: Some(r.total_mass),
        somewhere_positive_min_of_max: r
            .somewhere_positive
            .min_of_max
            .is_finite()
            .then_some(r.somewhere_positive.min_of_max),
        verdicts: Some(PointVerdicts {
            positive_operator: r.positive_operator.verdict,
            psd_quadratic_form: r.psd_quadratic_form.verdict,
            positivity_preserving: r.positivity_preserving.verdict,
            row_mass_nonneg: r.row_mass_nonneg.verdict,
            unit_load_nonneg: r.unit_load_nonneg.verdict,
            mean_value_nonneg: r.mean_value_nonneg.verdict,
            somewhere_positive: r.somewhere_positive.verdict,
        }),
        equivalence_consistent: r.equivalence_consistent,
        witness,
        theorem_violations: r.theorem_violations(),
    })
}

/// Kernel sign data at one value of `c`, without the full classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub c: f64,
    pub admissible: bool,
    pub min_kernel_entry: f64,
    pub kernel_scale: f64,
    pub min_row_mass: f64,
    pub row_mass_scale: f64,
}

impl Probe {
    fn verdict(&self, kind: ThresholdKind, tol: &Tolerances) -> Option<Verdict> {
        if !self.admissible {
            return None;
        }
        let (v, s) = match kind {
            ThresholdKind::PositivityPreserving => (self.min_kernel_entry, self.kernel_scale),
            ThresholdKind::RowMass => (self.min_row_mass, self.row_mass_scale),
        };
        Some(if v < -tol.nonneg_rel * s {
            Verdict::Fails
        } else {
            Verdict::Holds
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    PositivityPreserving,
    RowMass,
}

pub fn probe(config: &RunConfig, tol: &Tolerances, c: f64) -> Result<Probe, CliError> {
    let op = operator_at(config, c)?;
    let (adm, factorization) = assess(&op, tol.sym, tol.sing);
    match factorization {
        Some(f) if adm.admissible => {
            let kernel = kernel_from_factorization(&op, &f);
            let (min_kernel_entry, _) = min_kernel_entry(&kernel);
            let rm = row_mass_field(&kernel);
            Ok(Probe {
                c,
                admissible: true,
                min_kernel_entry,
                kernel_scale: kernel.matrix().max_abs(),
                min_row_mass: rm.argmin().0,
                row_mass_scale: rm.max_abs(),
            })
        }
        _ => Ok(Probe {
            c,
            admissible: false,
            min_kernel_entry: f64::NAN,
            kernel_scale: f64::NAN,
            min_row_mass: f64::NAN,
            row_mass_scale: f64::NAN,
        }),
    }
}

/// Bisects `[lo, hi]`, whose ends carry different verdicts, down to
/// `hi - lo <= precision * |hi|`. Midpoints are geometric when `log` and both
/// ends are positive.
pub fn bisect_threshold(
    config: &RunConfig,
    tol: &Tolerances,
    kind: ThresholdKind,
    (lo, hi): (f64, f64),
    precision: f64,
    log: bool,
) -> Result<Threshold, CliError> {
    let mut lower = probe(config, tol, lo)?;
    let mut upper = probe(config, tol, hi)?;
    let v_lo = lower.verdict(kind, tol);
    let v_hi = upper.verdict(kind, tol);
    if v_lo == v_hi || v_lo.is_none() || v_hi.is_none() {
        return Err(CliError::Compute(format!(
            "no verdict change to bisect between {lo} and {hi}"
        )));
    }
    let mut steps = 0;
    while upper.c - lower.c > precision * upper.c.abs().max(lower.c.abs()) {
        let mid = if log && lower.c > 0.0 {
            (lower.c * upper.c).sqrt()
        } else {
            0.5 * (lower.c + upper.c)
        };
        if mid <= lower.c || mid >= upper.c {
            break;
        }
        let p = probe(config, tol, mid)?;
        steps += 1;
        match p.verdict(kind, tol) {
            v if v == v_lo => lower = p,
            v if v == v_hi => upper = p,
            _ => {
                return Err(CliError::Compute(format!("operator inadmissible at c = {mid} during bisection")))
            }
        }
    }
    let op = operator_at(config, upper.c)?;
    let lambda_min_upper = min_eigenvalue_bounded(
        op.matrix(),
        EigenOptions {
            tol: tol.eig_tol,
            max_iter: tol.eig_max_iter,
        },
    )
    .map(|e| e.value)
    .unwrap_or(f64::NAN);
    Ok(Threshold {
        lower: lower.c,
        upper: upper.c,
        verdict_lower: v_lo.unwrap(),
        verdict_upper: v_hi.unwrap(),
        bisection_steps: steps,
        lambda_min_upper,
        min_kernel_entry_upper: upper.min_kernel_entry,
        min_row_mass_upper: upper.min_row_mass,
    })
}

fn first_change(points: &[SweepPoint], pick: impl Fn(&PointVerdicts) -> Verdict) -> Option<(f64, f64)> {
    let classified: Vec<(f64, Verdict)> = points
        .iter()
        .filter_map(|p| p.verdicts.as_ref().map(|v| (p.c, pick(v))))
        .collect();
    classified.windows(2).find(|w| w[0].1 != w[1].1).map(|w| (w[0].0, w[1].0))
}

/// Classifies every sweep value on a pool of `workers` threads, merges in
/// parameter order, and brackets the first change of the kernel-sign and
/// row-mass verdicts.
pub fn sweep(config: &RunConfig, spec: &SweepSpec, record_timings: bool) -> Result<SweepReport, CliError> {
    config.validate()?;
    spec.validate()?;
    let mut clock = Stopwatch::new(record_timings);
    let tol = config.resolved_tolerances();
    let values = spec.values();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Compute(e.to_string()))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        values
            .par_iter()
            .map(|&c| classify_point(config, &tol, c))
            .collect::<Result<_, _>>()
    })?;
    clock.lap("classify");

    let bisect = |kind, pick: fn(&PointVerdicts) -> Verdict| -> Result<Option<Threshold>, CliError> {
        match first_change(&points, pick) {
            Some(bracket) => pool
                .install(|| bisect_threshold(config, &tol, kind, bracket, spec.bisect_precision, spec.log))
                .map(Some),
            None => Ok(None),
        }
    };
    let thresholds = Thresholds {
        positivity_preserving: bisect(ThresholdKind::PositivityPreserving, |v| v.positivity_preserving)?,
        row_mass_nonneg: bisect(ThresholdKind::RowMass, |v| v.row_mass_nonneg)?,
    };
    clock.lap("bisect");

    let equivalence_consistent = points.iter().all(|p| p.equivalence_consistent);
    let positive_operator_everywhere = points.iter().all(|p| {
        p.verdicts
            .as_ref()
            .is_some_and(|v| v.positive_operator == Verdict::Holds)
    });
    Ok(SweepReport {
        schema: SCHEMA,
        config: config.clone(),
        sweep: spec.clone(),
        values,
        points,
        thresholds,
        equivalence_consistent,
        positive_operator_everywhere,
        timings: clock.finish(),
    })
}

/// Runs [`sweep`] and writes the report, or prints it without a path.
pub fn run_sweep(config: &RunConfig, spec: &SweepSpec, record_timings: bool) -> Result<SweepReport, CliError> {
    let report = sweep(config, spec, record_timings)?;
    let json = report.json()?;
    match &config.outputs.report {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    Ok(report)
}
