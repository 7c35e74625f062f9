//! One PASS/FAIL line per acceptance criterion, written straight to stdout so
//! that it shows without `--nocapture`.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use greens_lab::linalg::{min_eigenvalue_bounded, EigenOptions, Matrix};
use greens_lab::oracles::ExactKernel;
use greens_lab::positivity::{
    bump_witness, load_mean, positive_samples, quadratic_form, quadratic_samples, row_mass_field,
    solve_unit_load, somewhere_positive_check, Tolerances, Verdict,
};
use greens_lab::report::config::RunConfig;
use greens_lab::report::oracle_check::kernel_error;
use greens_lab::report::sweep::{bisect_threshold, probe, sweep, SweepReport, SweepSpec, ThresholdKind};
use greens_lab::{
    build_greens_kernel, discretize, make_grid, quadrature_weights, Bounds, DiscreteOperator, Family, Field,
    GreensKernel, Potential, ProblemSpec,
};

const LADDER: [usize; 4] = [49, 99, 199, 399];
const N_1D: usize = 399;
const N_2D: usize = 31;
const SEED: u64 = 20240001;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: usize, pass: bool, detail: &str) {
    let line = format!("criterion {criterion}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn grid_for(family: Family, n: usize) -> Arc<greens_lab::Grid> {
    if family.dimension() == 1 {
        make_grid(1, Bounds::Interval { a: 0.0, b: 1.0 }, &[n]).unwrap()
    } else {
        make_grid(2, Bounds::Rectangle { a: 0.0, b: 1.0, c: 0.0, d: 1.0 }, &[n, n]).unwrap()
    }
}

fn operator(family: Family, n: usize, potential: Potential) -> Arc<DiscreteOperator> {
    let grid = grid_for(family, n);
    Arc::new(discretize(&ProblemSpec::new(family, potential, grid).unwrap()).unwrap())
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

struct Entry {
    label: String,
    op: Arc<DiscreteOperator>,
    kernel: GreensKernel,
}

struct Menu {
    entries: Vec<Entry>,
    build: Duration,
}

/// Five model operators, each with `c = 0` and three seeded nonnegative
/// nodal potentials of increasing strength.
fn menu() -> &'static Menu {
    static CELL: OnceLock<Menu> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let mut entries = Vec::new();
        for family in [
            Family::SecondOrder1D,
            Family::FourthOrder1D,
            Family::SixthOrder1D,
            Family::Laplace2D,
            Family::Biharmonic2D,
        ] {
            let n = if family.dimension() == 1 { N_1D } else { N_2D };
            let len = grid_for(family, n).len();
            let mut potentials = vec![("c=0".to_string(), Potential::Zero)];
            for k in 1..=3u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(SEED + k);
                let amplitude = 10f64.powi(2 * k as i32);
                let values: Vec<f64> = (0..len).map(|_| amplitude * rng.gen::<f64>()).collect();
                potentials.push((format!("random c<={amplitude:e}"), Potential::Nodal { values }));
            }
            for (name, potential) in potentials {
                let op = operator(family, n, potential);
                let kernel = build_greens_kernel(&op, 1e-10).unwrap();
                entries.push(Entry {
                    label: format!("{family} {name}"),
                    op,
                    kernel,
                });
            }
        }
        Menu {
            entries,
            build: start.elapsed(),
        }
    })
}

fn beam_config(n: usize) -> RunConfig {
    RunConfig::new(Family::FourthOrder1D, n)
}

fn full_sweep_spec() -> SweepSpec {
    SweepSpec {
        param: "c".into(),
        lo: 0.0,
        hi: 1e6,
        steps: 40,
        log: true,
        bisect_precision: 1e-3,
        workers: None,
    }
}

struct SweepRun {
    report: SweepReport,
    elapsed: Duration,
}

fn full_sweep() -> &'static SweepRun {
    static CELL: OnceLock<SweepRun> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let report = sweep(&beam_config(N_1D), &full_sweep_spec(), false).unwrap();
        SweepRun {
            report,
            elapsed: start.elapsed(),
        }
    })
}

fn convergence(family: Family, exact: ExactKernel) -> Vec<f64> {
    LADDER
        .iter()
        .map(|&n| {
            let op = operator(family, n, Potential::Zero);
            let k = build_greens_kernel(&op, 1e-10).unwrap();
            kernel_error(&k, exact).unwrap()
        })
        .collect()
}

fn ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

#[test]
fn criterion_1_second_order_oracle() {
    let _g = serial();
    let start = Instant::now();
    let errors = convergence(Family::SecondOrder1D, ExactKernel::SecondOrder);
    let elapsed = start.elapsed();
    let r = ratios(&errors);
    let rates_ok = r.iter().all(|q| (q - 4.0).abs() <= 0.5);
    let abs_ok = errors[3] < 5e-6;
    let time_ok = elapsed < Duration::from_secs(5);
    verdict(
        1,
        rates_ok && abs_ok && time_ok,
        &format!("errors {} ratios {r:.3?} (need 4.0 +- 0.5) error(399) < 5e-6: {abs_ok} in {elapsed:.2?}", sci(&errors)),
    );
}

#[test]
fn criterion_2_beam_oracle() {
    let _g = serial();
    let start = Instant::now();
    let errors = convergence(Family::FourthOrder1D, ExactKernel::Beam);
    let op = operator(Family::FourthOrder1D, 399, Potential::Zero);
    let u = solve_unit_load(&op, 1e-10).unwrap();
    let mid = op.grid().node(199)[0];
    let gap = (u.values()[199] - 1.0 / 384.0).abs();
    let elapsed = start.elapsed();
    let r = ratios(&errors);
    let rates_ok = r.iter().all(|q| (q - 4.0).abs() <= 0.7);
    let ok = rates_ok && gap < 1e-5 && mid == 0.5 && elapsed < Duration::from_secs(10);
    verdict(
        2,
        ok,
        &format!("errors {} ratios {r:.3?} |u(0.5) - 1/384| = {gap:.2e} in {elapsed:.2?}", sci(&errors)),
    );
}

#[test]
fn criterion_3_quadratic_form() {
    let _g = serial();
    let m = menu();
    let start = Instant::now();
    let mut worst_form = f64::INFINITY;
    let mut worst_eig = f64::INFINITY;
    let mut failures = Vec::new();
    for e in &m.entries {
        let weighted = e.kernel.weighted();
        let norm = weighted.max_abs();
        let samples = quadratic_samples(e.op.grid(), 1000, SEED);
        for z in &samples {
            let z2: f64 = z.values().iter().map(|v| v * v).sum();
            let q = quadratic_form(&e.kernel, z).unwrap() / (z2 * norm);
            worst_form = worst_form.min(q);
            if q < -1e-9 {
                failures.push(format!("{}: q = {q:e}", e.label));
            }
        }
        let est = min_eigenvalue_bounded(&weighted, EigenOptions { tol: 1e-6, max_iter: 200 }).unwrap();
        let rel = est.lower_bound / norm;
        worst_eig = worst_eig.min(rel);
        if rel < -1e-9 {
            failures.push(format!("{}: lambda_min(WKW) >= {rel:e} |WKW|", e.label));
        }
    }
    let elapsed = start.elapsed() + m.build;
    let ok = failures.is_empty() && elapsed < Duration::from_secs(120);
    verdict(
        3,
        ok,
        &format!(
            "{} operators x 1000 z: worst q/(|z|^2 |WKW|) = {worst_form:.3e}, worst lambda_min(WKW)/|WKW| >= {worst_eig:.3e} in {elapsed:.2?} {failures:?}",
            m.entries.len()
        ),
    );
}

#[test]
fn criterion_4_row_mass_identity() {
    let _g = serial();
    let mut worst: f64 = 0.0;
    for e in &menu().entries {
        let u = solve_unit_load(&e.op, 1e-10).unwrap();
        let rm = row_mass_field(&e.kernel);
        let scale = u.max_abs();
        for (a, b) in u.values().iter().zip(rm.values()) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    verdict(
        4,
        worst <= 1e-9,
        &format!("max |row mass - unit load| / |unit load| = {worst:.3e} over {} operators", menu().entries.len()),
    );
}

#[test]
fn criterion_5_sweep_equivalence() {
    let _g = serial();
    let run = full_sweep();
    let r = &run.report;
    let broken: Vec<f64> = r
        .points
        .iter()
        .filter(|p| !p.equivalence_consistent || !p.theorem_violations.is_empty())
        .map(|p| p.c)
        .collect();
    let ok = r.points.len() == 40 && r.equivalence_consistent && broken.is_empty() && r.exit() as i32 == 0;
    verdict(
        5,
        ok,
        &format!(
            "{} points on [0, 1e6], N = {N_1D}: (i)/(ii)/(iii) agree everywhere: {}, broken at {broken:?}, exit {} in {:.2?}",
            r.points.len(),
            r.equivalence_consistent,
            r.exit() as i32,
            run.elapsed
        ),
    );
}

#[test]
fn criterion_6_threshold() {
    let _g = serial();
    let run = full_sweep();
    let start = Instant::now();
    let tol = Tolerances::default();
    let Some(t) = run.report.thresholds.positivity_preserving.clone() else {
        verdict(6, false, "no kernel sign change in the sweep");
        return;
    };
    let at = probe(&beam_config(N_1D), &tol, t.upper).unwrap();
    let sign_ok = t.lambda_min_upper > 0.0 && at.min_kernel_entry < -tol.nonneg_rel * at.kernel_scale;
    let fine = bisect_threshold(
        &beam_config(799),
        &tol,
        ThresholdKind::PositivityPreserving,
        (0.5 * t.lower, 2.0 * t.upper),
        1e-3,
        true,
    );
    let elapsed = start.elapsed() + run.elapsed;
    match fine {
        Ok(f) => {
            let drift = (f.upper - t.upper).abs() / t.upper;
            let ok = sign_ok && drift <= 0.1 && f.lambda_min_upper > 0.0 && elapsed < Duration::from_secs(300);
            verdict(
                6,
                ok,
                &format!(
                    "c*(399) = {:.4} (lambda_min {:.3e}, min K {:.3e}), c*(799) = {:.4}, drift {:.2}% in {elapsed:.2?}",
                    t.upper,
                    t.lambda_min_upper,
                    at.min_kernel_entry,
                    f.upper,
                    100.0 * drift
                ),
            );
        }
        Err(e) => verdict(6, false, &format!("c*(399) = {:.4}, N = 799 bisection failed: {e}", t.upper)),
    }
}

/// Symmetric kernels on power-of-two grids with a negative row mass.
fn synthetic_kernels() -> Vec<GreensKernel> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let grids = [
        make_grid(1, Bounds::Interval { a: 0.0, b: 4.0 }, &[3]).unwrap(),
        make_grid(1, Bounds::Interval { a: 0.0, b: 1.0 }, &[7]).unwrap(),
        make_grid(2, Bounds::Rectangle { a: 0.0, b: 1.0, c: 0.0, d: 1.0 }, &[3, 3]).unwrap(),
    ];
    for grid in grids {
        let m = grid.len();
        let mut k = Matrix::from_fn(m, m, |i, j| if i == j { 1.0 } else if i.abs_diff(j) == 1 { -0.6 } else { 0.0 });
        for _ in 0..3 {
            let w = quadrature_weights(&grid);
            let kernel = GreensKernel::from_matrix(k.clone(), w).unwrap();
            out.push(kernel);
            let draws: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-0.5..0.5)).collect();
            k = Matrix::from_fn(m, m, |i, j| k[(i, j)] + draws[i.min(j) * m + i.max(j)]);
        }
    }
    out
}

#[test]
fn criterion_7_converse_witness() {
    let _g = serial();
    let tol = Tolerances::default();
    let run = full_sweep();
    let negative: Vec<_> = run
        .report
        .points
        .iter()
        .filter(|p| p.verdicts.as_ref().is_some_and(|v| v.row_mass_nonneg == Verdict::Fails))
        .collect();
    if !negative.is_empty() {
        let bad: Vec<f64> = negative
            .iter()
            .filter(|p| !p.witness.as_ref().is_some_and(|w| w.nonnegative && w.mean < 0.0))
            .map(|p| p.c)
            .collect();
        verdict(
            7,
            bad.is_empty(),
            &format!("{} sweep points with negative row mass, missing witness at {bad:?}", negative.len()),
        );
        return;
    }
    let mut checked = 0;
    let mut failures = Vec::new();
    for kernel in synthetic_kernels() {
        let rm = row_mass_field(&kernel);
        let w = kernel.weights().values();
        if !(rm.argmin().0 < -tol.nonneg_rel * rm.max_abs()) {
            continue;
        }
        checked += 1;
        for i in 0..kernel.len() {
            let mut values = vec![0.0; kernel.len()];
            values[i] = 1.0 / w[i];
            let f = Field::new(Arc::clone(kernel.grid()), values).unwrap();
            let mean = load_mean(&kernel, &f).unwrap();
            if mean != rm.values()[i] {
                failures.push(format!("node {i}: mean {mean:e} row mass {:e}", rm.values()[i]));
            }
        }
        match bump_witness(&kernel, &tol) {
            Ok(Some(wf)) if wf.f.values().iter().all(|&v| v >= 0.0) && wf.mean < 0.0 => {}
            other => failures.push(format!("no witness: {other:?}")),
        }
    }
    verdict(
        7,
        checked > 0 && failures.is_empty(),
        &format!(
            "no sweep point has negative row mass; degenerate identity on {checked} synthetic indefinite kernels {failures:?}"
        ),
    );
}

#[test]
fn criterion_8_somewhere_positive() {
    let _g = serial();
    let tol = Tolerances::default();
    let mut operators = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for e in &menu().entries {
        let l = min_eigenvalue_bounded(e.op.matrix(), EigenOptions { tol: 1e-10, max_iter: 10000 }).unwrap();
        if !(l.value > 0.0) {
            continue;
        }
        operators += 1;
        for f in positive_samples(e.op.grid(), &tol) {
            let s = somewhere_positive_check(&e.kernel, &f, l.value).unwrap();
            worst = worst.min(s.max_value);
            if !s.positive {
                failures.push(e.label.clone());
            }
        }
    }
    let run = full_sweep();
    let c_star = run
        .report
        .thresholds
        .positivity_preserving
        .as_ref()
        .map_or(f64::INFINITY, |t| t.upper);
    let mut post_threshold = 0;
    for p in &run.report.points {
        let Some(v) = &p.verdicts else { continue };
        if v.positive_operator != Verdict::Holds {
            continue;
        }
        operators += 1;
        if p.c >= c_star {
            post_threshold += 1;
        }
        let m = p.somewhere_positive_min_of_max.unwrap_or(f64::NAN);
        worst = worst.min(m);
        if v.somewhere_positive != Verdict::Holds || !(m > 0.0) {
            failures.push(format!("sweep c = {}", p.c));
        }
    }
    verdict(
        8,
        failures.is_empty() && post_threshold > 0,
        &format!(
            "{operators} positive operators ({post_threshold} past c*) x {} positive loads: min max(u_f) = {worst:.3e} {failures:?}",
            tol.positive_samples
        ),
    );
}

fn run_bin(dir: &Path, args: &[&str]) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_greens-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
}

#[test]
fn criterion_9_determinism() {
    let _g = serial();
    let analyze = [
        "analyze", "--family", "fourth-order-1d", "--n", "99", "--c", "5e4", "--out", "report.json", "--heatmap",
        "kernel.csv", "--row-mass-csv", "row_mass.csv", "--unit-load-csv", "unit_load.csv",
    ];
    let sweep = [
        "sweep", "--family", "fourth-order-1d", "--n", "99", "--param", "c", "--range", "0,1e6", "--steps", "12",
        "--log", "--out", "sweep.json",
    ];
    let files = ["report.json", "kernel.csv", "row_mass.csv", "unit_load.csv", "sweep.json"];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut codes = Vec::new();
    for d in &dirs {
        codes.push(run_bin(d.path(), &analyze));
        codes.push(run_bin(d.path(), &sweep));
    }
    let mut differing = Vec::new();
    for name in files {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap_or_default();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap_or_default();
        if a.is_empty() || a != b {
            differing.push(name);
        }
    }
    let ok = differing.is_empty() && codes.iter().all(|c| *c == Some(0));
    verdict(
        9,
        ok,
        &format!("two runs of analyze and sweep, {} files compared, differing {differing:?}, exit codes {codes:?}", files.len()),
    );
}
