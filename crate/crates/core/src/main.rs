use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use greens_lab::report::analyze::run_analyze;
use greens_lab::report::config::{parse_list, parse_potential, RunConfig};
use greens_lab::report::oracle_check::run_oracle_check;
use greens_lab::report::sweep::{run_sweep, SweepSpec};
use greens_lab::report::{CliError, Exit};
use greens_lab::{Family, Potential};

#[derive(Parser)]
#[command(name = "greens-lab", version, about = "Discrete Green's operators and their positivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify one operator and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Sweep a constant potential and locate verdict changes.
    Sweep(SweepArgs),
    /// Compare discrete kernels with the exact 1D kernels under refinement.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    /// Interior nodes per axis (first axis in 2D).
    #[arg(long)]
    n: Option<usize>,
    /// Interior nodes along y in 2D.
    #[arg(long)]
    ny: Option<usize>,
    /// Domain bounds `a,b` or `a,b,c,d`.
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Constant potential.
    #[arg(long, conflicts_with = "potential", allow_hyphen_values = true)]
    c: Option<f64>,
    /// `constant:V` or `gaussian-bump:A,X[,Y],W`.
    #[arg(long, allow_hyphen_values = true)]
    potential: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of the kernel matrix.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long)]
    row_mass_csv: Option<PathBuf>,
    #[arg(long)]
    unit_load_csv: Option<PathBuf>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    record_timings: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "c")]
    param: String,
    /// `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    range: String,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    log: bool,
    /// Relative bracket width at which bisection stops.
    #[arg(long, default_value_t = 1e-3)]
    bisect_precision: f64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_timings: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "49,99,199,399")]
    ladder: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(p: &ProblemArgs, default_n: Option<usize>) -> Result<RunConfig, CliError> {
    let mut config = match &p.config {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let family = p
                .family
                .ok_or_else(|| CliError::Config("--family is required without --config".into()))?;
            let n = p
                .n
                .or(default_n)
                .ok_or_else(|| CliError::Config("--n is required without --config".into()))?;
            RunConfig::new(family, n)
        }
    };
    if let Some(f) = p.family {
        config.family = f;
    }
    if let Some(n) = p.n {
        config.n = n;
    }
    if p.ny.is_some() {
        config.ny = p.ny;
    }
    if let Some(b) = &p.bounds {
        config.bounds = Some(parse_list(b, "bounds")?);
    }
    if let Some(s) = p.seed {
        config.seed = s;
    }
    Ok(config)
}

fn finish(exit: Exit) -> i32 {
    exit as i32
}

fn analyze(args: AnalyzeArgs) -> Result<i32, CliError> {
    let mut config = build_config(&args.problem, None)?;
    if let Some(c) = args.c {
        config.potential = Potential::Constant { value: c };
    }
    if let Some(p) = &args.potential {
        config.potential = parse_potential(p)?;
    }
    let o = &mut config.outputs;
    o.report = args.out.or(o.report.take());
    o.heatmap = args.heatmap.or(o.heatmap.take());
    o.row_mass_csv = args.row_mass_csv.or(o.row_mass_csv.take());
    o.unit_load_csv = args.unit_load_csv.or(o.unit_load_csv.take());
    config.validate()?;
    let outcome = run_analyze(&config, args.record_timings)?;
    match outcome.exit {
        Exit::Inadmissible => {
            let a = &outcome.report.admissibility;
            eprintln!(
                "operator is inadmissible: symmetric={} invertible={} smallest pivot {:e} (threshold {:e})",
                a.symmetric, a.invertible, a.smallest_pivot, a.pivot_threshold
            );
        }
        Exit::TheoremViolation => {
            for v in outcome.report.verdicts.iter().flat_map(|v| &v.theorem_violations) {
                eprintln!("theorem check failed: {v}");
            }
        }
        Exit::Ok => {}
    }
    Ok(finish(outcome.exit))
}

fn sweep(args: SweepArgs) -> Result<i32, CliError> {
    let mut config = build_config(&args.problem, None)?;
    if let Some(out) = args.out {
        config.outputs.report = Some(out);
    }
    let range: Vec<f64> = parse_list(&args.range, "range")?;
    let [lo, hi] = range[..] else {
        return Err(CliError::Config(format!("range needs two values, got '{}'", args.range)));
    };
    let spec = SweepSpec {
        param: args.param,
        lo,
        hi,
        steps: args.steps,
        log: args.log,
        bisect_precision: args.bisect_precision,
        workers: args.workers,
    };
    let report = run_sweep(&config, &spec, args.record_timings)?;
    let exit = report.exit();
    if exit == Exit::TheoremViolation {
        for p in &report.points {
            for v in &p.theorem_violations {
                eprintln!("theorem check failed at c = {}: {v}", p.c);
            }
            if p.c >= 0.0 && p.lambda_min.is_none_or(|l| l <= 0.0) {
                eprintln!("operator not positive at c = {}", p.c);
            }
        }
    }
    Ok(finish(exit))
}

fn oracle(args: OracleArgs) -> Result<i32, CliError> {
    let ladder: Vec<usize> = parse_list(&args.ladder, "ladder")?;
    let mut config = build_config(&args.problem, ladder.first().copied())?;
    config.ladder = Some(ladder.clone());
    if let Some(out) = args.out {
        config.outputs.report = Some(out);
    }
    config.validate()?;
    run_oracle_check(&config, &ladder)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Sweep(s) => sweep(s),
        Command::OracleCheck(o) => oracle(o),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
