use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use htprox::harness::{run_experiment, summary_path, sweep_csv, sweep_rates, to_csv, ExperimentConfig};
use htprox::problem::{NoiseConstants, SmoothnessConstants};
use htprox::problems::{generate, write_instance, FixtureKind, InstanceSpec};
use htprox::schedule::{epsilon_for_budget, Algorithm, Mode, ProblemConstants, SchedulePlan, Theorem};
use htprox::solvers::SolverKind;
use htprox::verify::default_suite;

#[derive(Parser)]
#[command(name = "htprox", version, about = "Stochastic proximal subgradient solvers under heavy-tailed noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random regression instance (binary matrix plus JSON sidecar).
    Generate(GenerateArgs),
    /// Run a benchmark described by a JSON config.
    Run(RunArgs),
    /// Fit convergence slopes on a noiseless fixture.
    Sweep(SweepArgs),
    /// Run the numerical self-checks.
    Verify(VerifyArgs),
    /// Print the derived step sizes and iteration bounds as JSON.
    Schedule(ScheduleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Box,
    Ball,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.8)]
    omega: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides the config's output_path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker count; HTPROX_THREADS still takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    Quadratic,
    Nonsmooth,
    Holder,
    Mixed,
}

impl From<FixtureArg> for FixtureKind {
    fn from(f: FixtureArg) -> Self {
        match f {
            FixtureArg::Quadratic => FixtureKind::Quadratic,
            FixtureArg::Nonsmooth => FixtureKind::Nonsmooth1D,
            FixtureArg::Holder => FixtureKind::HolderOnly,
            FixtureArg::Mixed => FixtureKind::Mixed,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum AlgArg {
    Spgm,
    Spgma,
    Spgmc,
}

impl From<AlgArg> for SolverKind {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::Spgm => SolverKind::Spgm,
            AlgArg::Spgma => SolverKind::Spgma,
            AlgArg::Spgmc => SolverKind::Spgmc,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    fixture: FixtureArg,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long = "K", value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096")]
    k: Vec<u64>,
    /// Number of seeds, `0..seeds`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "spgm,spgma")]
    solvers: Vec<AlgArg>,
    /// CSV destination; the JSON summary goes beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run every check (the default when no --check is given).
    #[arg(long)]
    all: bool,
    /// Run only checks whose name contains this text.
    #[arg(long)]
    check: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Expectation,
    HighProbability,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    alg: AlgArg,
    #[arg(long = "Lf", default_value_t = 0.0)]
    lf: f64,
    #[arg(long = "Hf", default_value_t = 0.0)]
    hf: f64,
    #[arg(long = "Mf", default_value_t = 0.0)]
    mf: f64,
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long = "Dh")]
    dh: f64,
    /// Target accuracy; derived from --K when omitted.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Iteration budget; defaults to the theorem's bound at --eps.
    #[arg(long = "K")]
    k: Option<u64>,
    #[arg(long, value_enum, default_value = "expectation")]
    mode: ModeArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate(a) => generate_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Schedule(a) => schedule_cmd(a),
    }
}

fn generate_cmd(a: GenerateArgs) -> Result<ExitCode> {
    let spec = match a.family {
        FamilyArg::Box => InstanceSpec::box_l1(a.n, a.rho, a.omega, a.seed),
        FamilyArg::Ball => InstanceSpec::ball_residual(a.n, a.rho, a.omega, a.seed),
    };
    let instance = generate(&spec)?;
    write_instance(&a.out, &instance).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{}", serde_json::to_string_pretty(&instance.metadata)?);
    Ok(ExitCode::SUCCESS)
}

fn run_cmd(a: RunArgs) -> Result<ExitCode> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(out) = a.out {
        config.output_path = Some(out);
    }
    if let Some(t) = a.threads {
        config.parallelism = t;
    }
    config.validate()?;
    let output = run_experiment(&config)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    for s in output.steps.iter().filter(|s| s.tuned_multiplier.is_some()) {
        eprintln!(
            "n={} rho={} omega={} {}: tuned step {}/L_f",
            s.n,
            s.rho,
            s.omega,
            s.solver,
            s.tuned_multiplier.expect("filtered")
        );
    }
    print!("{}", to_csv(&output.rows));
    if let Some(path) = &config.output_path {
        eprintln!("wrote {} and {}", path.display(), summary_path(path).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_cmd(a: SweepArgs) -> Result<ExitCode> {
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let solvers: Vec<SolverKind> = a.solvers.iter().map(|&s| s.into()).collect();
    let report = sweep_rates(a.fixture.into(), a.n, &a.k, &seeds, &solvers)?;
    let csv = sweep_csv(&report);
    print!("{csv}");
    for f in &report.fits {
        eprintln!("{}: slope {:.3}, R² {:.4}", f.solver, f.slope, f.r_squared);
    }
    if let Some(path) = a.out {
        std::fs::write(&path, &csv)?;
        std::fs::write(summary_path(&path), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(a: VerifyArgs) -> Result<ExitCode> {
    let reports = default_suite(a.seed)?;
    let selected: Vec<_> = reports
        .into_iter()
        .filter(|r| a.all || a.check.is_empty() || a.check.iter().any(|c| r.check_name.contains(c.as_str())))
        .collect();
    if selected.is_empty() {
        bail!("no check matches {:?}", a.check);
    }
    let mut ok = true;
    for r in &selected {
        println!("{}", serde_json::to_string(r)?);
        ok &= r.passed;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn schedule_cmd(a: ScheduleArgs) -> Result<ExitCode> {
    let smoothness = SmoothnessConstants::new(a.lf, a.hf, a.nu, a.mf)?;
    let noise = NoiseConstants::new(a.sigma, a.alpha)?;
    let c = ProblemConstants::new(smoothness, noise, a.dh)?;
    let algorithm = if a.alg == AlgArg::Spgma { Algorithm::Spgma } else { Algorithm::Spgm };
    let mode = match a.mode {
        ModeArg::Expectation => Mode::Expectation,
        ModeArg::HighProbability => Mode::HighProbability,
    };
    let plan = match (a.eps, a.k) {
        (Some(eps), None) => SchedulePlan::theory(algorithm, mode, &c, eps, a.delta)?,
        (Some(eps), Some(k)) => SchedulePlan::with_budget(algorithm, mode, &c, eps, a.delta, k)?,
        (None, Some(k)) => {
            let eps = epsilon_for_budget(Theorem::for_run(algorithm, mode), &c, k, a.delta);
            SchedulePlan::with_budget(algorithm, mode, &c, eps, a.delta, k)?
        }
        (None, None) => bail!("give --eps, --K, or both"),
    };
    println!("{}", serde_json::to_string_pretty(&plan)?);
    Ok(ExitCode::SUCCESS)
}
