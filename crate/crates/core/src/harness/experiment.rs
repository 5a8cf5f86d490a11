//! Trial orchestration and aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SolverSetup, StepPolicy};
use crate::error::{Error, Result};
use crate::noise::mix_seed;
use crate::problem::{CompositeProblem, NoiseConstants, Termination};
use crate::problems::{generate, GeneratedInstance, InstanceSpec};
use crate::schedule::{epsilon_for_budget, Algorithm, Mode, SchedulePlan, Theorem};
use crate::solvers::{default_clip_threshold, run, run_baseline, BaselineOptions, SolverConfig, SolverKind, StepRule};

pub const CSV_SCHEMA: u32 = 1;
pub const CSV_HEADER: &str = "n,rho,omega,solver,mean_cpu_seconds,mean_iterations,std_iterations,trials_converged";

/// Offset separating pilot instance seeds from trial seeds.
const PILOT_TAG: u64 = 0x7069_6C6F_7400_0000;

/// One solver run on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub rho: f64,
    pub omega: f64,
    pub trial: usize,
    pub solver: String,
    pub instance_seed: u64,
    pub run_seed: u64,
    /// Iterations used; the budget when the run did not converge.
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub wall_seconds: f64,
    /// Relative gap at the last recorded iterate.
    pub final_relative_gap: Option<f64>,
    /// Base step `η` (SPGM-A scales it by `(k + 2)/2`).
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub rho: f64,
    pub omega: f64,
    pub solver: String,
    /// Mean wall time per run. Not comparable across machines.
    pub mean_cpu_seconds: f64,
    /// Non-converged runs count at their budget.
    pub mean_iterations: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std_iterations: f64,
    pub trials_converged: usize,
    pub trials: usize,
}

/// The step policy a row actually ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub n: usize,
    pub rho: f64,
    pub omega: f64,
    pub solver: String,
    pub policy: String,
    /// The `1/L_f` multiplier picked by tuning.
    pub tuned_multiplier: Option<f64>,
    /// `(multiplier, mean pilot iterations)`; aborted candidates are omitted.
    pub pilot_scores: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<AggregateRow>,
    pub steps: Vec<StepReport>,
    pub records: Vec<TrialRecord>,
    pub warnings: Vec<String>,
}

/// Seed of trial `t`'s instance.
pub fn instance_seed(master_seed: u64, trial: usize) -> u64 {
    master_seed ^ trial as u64
}

/// Runs every solver on `trials` instances of each `(n, ρ, ω)` cell and
/// writes CSV and JSON when the config names an output path.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.effective_parallelism())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let output = pool.install(|| execute(config))?;
    if let Some(path) = &config.output_path {
        write_outputs(path, config, &output)?;
    }
    Ok(output)
}

fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let cells = config.instance_specs(0);
    let mut warnings = Vec::new();
    for s in &config.solvers {
        let high_prob = matches!(s.step, StepPolicy::Theory { mode: Mode::HighProbability, .. });
        if high_prob && cells.iter().any(|c| c.rho > 0.0) {
            warnings.push(format!(
                "{}: high-probability steps assume sub-Weibull noise, which polynomial tails violate",
                s.name()
            ));
        }
    }
    if config.solvers.is_empty() {
        return Ok(ExperimentOutput { rows: vec![], steps: vec![], records: vec![], warnings });
    }

    let tuned = tune_all(config, &cells)?;

    let work: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    let specs: Vec<InstanceSpec> = work
        .iter()
        .map(|&(c, t)| InstanceSpec { seed: instance_seed(config.master_seed, t), ..cells[c].clone() })
        .collect();
    let f_stars = baseline_values(&specs)?;
    let per_trial: Vec<Vec<TrialRecord>> = work
        .par_iter()
        .zip(&specs)
        .map(|(&(c, t), spec)| {
            let seed = spec.seed;
            let instance = attach(spec, f_stars.get(&data_key(spec)).copied())?;
            let run_seed = mix_seed(seed, c as u64);
            config
                .solvers
                .iter()
                .enumerate()
                .map(|(s, setup)| {
                    let multiplier = tuned[c][s].as_ref().map(|r| r.0);
                    let rule = step_rule(setup, &instance, multiplier)?;
                    one_run(setup, &instance, rule, config.gap_tolerance, setup.max_iterations, run_seed, t)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut steps = Vec::new();
    let mut records = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for (s, setup) in config.solvers.iter().enumerate() {
            let runs: Vec<&TrialRecord> = per_trial[c * config.trials..(c + 1) * config.trials]
                .iter()
                .map(|trial| &trial[s])
                .collect();
            rows.push(aggregate(cell, setup, &runs));
            steps.push(StepReport {
                n: cell.n,
                rho: cell.rho,
                omega: cell.omega,
                solver: setup.name(),
                policy: describe(&setup.step),
                tuned_multiplier: tuned[c][s].as_ref().map(|r| r.0),
                pilot_scores: tuned[c][s].as_ref().map(|r| r.1.clone()).unwrap_or_default(),
            });
        }
    }
    for trial in per_trial {
        records.extend(trial);
    }
    Ok(ExperimentOutput { rows, steps, records, warnings })
}

/// Generates an instance and attaches a baseline `F*` when it has none.
/// The baseline runs on a noiseless copy, whose data are identical.
pub fn prepared(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    let f_star = baseline_values(std::slice::from_ref(spec))?.into_values().next();
    attach(spec, f_star)
}

fn attach(spec: &InstanceSpec, f_star: Option<f64>) -> Result<GeneratedInstance> {
    let mut instance = generate(spec)?;
    if instance.problem.reference().is_none() {
        let f_star = f_star.ok_or_else(|| Error::Config("missing baseline value".into()))?;
        instance.problem = instance.problem.with_reference(f_star, None);
        instance.f_star_reference = Some(f_star);
    }
    Ok(instance)
}

/// The part of a spec that determines the data, not the noise.
fn data_key(spec: &InstanceSpec) -> String {
    let clean = InstanceSpec { rho: 0.0, omega: 3.0, ..spec.clone() };
    serde_json::to_string(&clean).expect("specs serialize")
}

/// Baseline `F*` for every distinct data instance among `specs` that lacks
/// a known optimum, computed once each.
fn baseline_values(specs: &[InstanceSpec]) -> Result<BTreeMap<String, f64>> {
    let mut todo: BTreeMap<String, InstanceSpec> = BTreeMap::new();
    for s in specs {
        if s.family == crate::problems::Family::BoxL1Regression {
            todo.entry(data_key(s)).or_insert_with(|| InstanceSpec { rho: 0.0, ..s.clone() });
        }
    }
    let todo: Vec<(String, InstanceSpec)> = todo.into_iter().collect();
    let values: Vec<f64> = todo
        .par_iter()
        .map(|(_, spec)| {
            let clean = generate(spec)?;
            Ok(run_baseline(&clean.problem, &BaselineOptions::default())?.f_star)
        })
        .collect::<Result<_>>()?;
    Ok(todo.into_iter().map(|(k, _)| k).zip(values).collect())
}

/// The step rule for `setup` on `instance`; `multiplier` is the tuned
/// `1/L_f` multiplier for [`StepPolicy::Tuned`].
pub fn step_rule(setup: &SolverSetup, instance: &GeneratedInstance, multiplier: Option<f64>) -> Result<StepRule<f64>> {
    let inverse_lipschitz = |m: f64| {
        let l = instance.metadata.smoothness.grad_lipschitz;
        if l > 0.0 {
            Ok(StepRule::Constant(m / l))
        } else {
            Err(Error::Config(format!("{}: a 1/L_f step needs L_f > 0", setup.name())))
        }
    };
    match &setup.step {
        StepPolicy::Constant { eta } => Ok(StepRule::Constant(*eta)),
        StepPolicy::InverseLipschitz { multiplier } => inverse_lipschitz(*multiplier),
        StepPolicy::Tuned { .. } => inverse_lipschitz(multiplier.expect("tuned before running")),
        StepPolicy::Theory { mode, epsilon, delta, planned_iterations, multiplier } => {
            let mut c = instance.metadata.constants();
            if setup.sigma.is_some() || setup.alpha.is_some() {
                c.noise = NoiseConstants::new(
                    setup.sigma.unwrap_or(c.noise.scale),
                    setup.alpha.unwrap_or(c.noise.moment_order),
                )?;
            }
            let algorithm = match setup.algorithm {
                SolverKind::Spgma => Algorithm::Spgma,
                _ => Algorithm::Spgm,
            };
            let plan = match (epsilon, planned_iterations) {
                (Some(eps), None) => SchedulePlan::theory(algorithm, *mode, &c, *eps, *delta)?,
                (eps, planned) => {
                    let k = planned.unwrap_or(setup.max_iterations as u64);
                    let eps = eps.unwrap_or_else(|| epsilon_for_budget(Theorem::for_run(algorithm, *mode), &c, k, *delta));
                    SchedulePlan::with_budget(algorithm, *mode, &c, eps, *delta, k)?
                }
            };
            Ok(StepRule::Plan { plan, multiplier: *multiplier })
        }
    }
}

fn base_eta(rule: &StepRule<f64>) -> f64 {
    match rule {
        StepRule::Constant(eta) => *eta,
        StepRule::Sequence(s) => s.first().copied().unwrap_or(f64::NAN),
        StepRule::Plan { plan, multiplier } => plan.step() * multiplier,
    }
}

fn one_run(
    setup: &SolverSetup,
    instance: &GeneratedInstance,
    step: StepRule<f64>,
    gap_tolerance: f64,
    budget: usize,
    seed: u64,
    trial: usize,
) -> Result<TrialRecord> {
    let problem = &instance.problem;
    let eta = base_eta(&step);
    let clip = match setup.algorithm {
        SolverKind::Spgmc => Some(setup.clip_threshold.unwrap_or_else(|| default_clip_threshold(problem, seed))),
        _ => None,
    };
    let solver = SolverConfig {
        algorithm: setup.algorithm,
        step,
        max_iterations: budget,
        clip_threshold: clip,
        gap_target: Some(gap_tolerance),
        trace_cadence: setup.trace_cadence,
        seed,
    };
    let spec = &instance.spec;
    let mut record = TrialRecord {
        n: spec.n,
        rho: spec.rho,
        omega: spec.omega,
        trial,
        solver: setup.name(),
        instance_seed: spec.seed,
        run_seed: seed,
        iterations: budget,
        converged: false,
        diverged: false,
        wall_seconds: 0.0,
        final_relative_gap: None,
        eta,
    };
    let started = std::time::Instant::now();
    match run(problem, &solver) {
        Ok(r) => {
            record.converged = r.terminated_by == Termination::GapTarget;
            if record.converged {
                record.iterations = r.iterations_used;
            }
            record.wall_seconds = r.wall_time;
            record.final_relative_gap = relative_gap(problem, r.gap_history.last().map(|h| h.1));
        }
        Err(Error::Diverged { .. }) => {
            record.diverged = true;
            record.wall_seconds = started.elapsed().as_secs_f64();
        }
        Err(e) => return Err(e),
    }
    Ok(record)
}

fn relative_gap(problem: &CompositeProblem<f64>, value: Option<f64>) -> Option<f64> {
    let f_star = problem.reference()?.value;
    let f0 = problem.evaluate(problem.start().view()).ok()?;
    Some((value? - f_star) / (f0 - f_star))
}

fn aggregate(cell: &InstanceSpec, setup: &SolverSetup, runs: &[&TrialRecord]) -> AggregateRow {
    let k = runs.len() as f64;
    let mean = runs.iter().map(|r| r.iterations as f64).sum::<f64>() / k;
    let std = if runs.len() > 1 {
        (runs.iter().map(|r| (r.iterations as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    AggregateRow {
        n: cell.n,
        rho: cell.rho,
        omega: cell.omega,
        solver: setup.name(),
        mean_cpu_seconds: runs.iter().map(|r| r.wall_seconds).sum::<f64>() / k,
        mean_iterations: mean,
        std_iterations: std,
        trials_converged: runs.iter().filter(|r| r.converged).count(),
        trials: runs.len(),
    }
}

fn describe(policy: &StepPolicy) -> String {
    match policy {
        StepPolicy::Theory { mode, epsilon, planned_iterations, multiplier, .. } => {
            let mode = match mode {
                Mode::Expectation => "expectation",
                Mode::HighProbability => "high-probability",
            };
            let target = match (epsilon, planned_iterations) {
                (Some(e), None) => format!("epsilon {e}"),
                (_, Some(k)) => format!("planned budget {k}"),
                (None, None) => "run budget".to_string(),
            };
            format!("theory ({mode}, {target}) x {multiplier}")
        }
        StepPolicy::Constant { eta } => format!("constant eta {eta}"),
        StepPolicy::InverseLipschitz { multiplier } => format!("{multiplier} / L_f"),
        StepPolicy::Tuned { .. } => "tuned multiplier / L_f".to_string(),
    }
}

type Tuning = Option<(f64, Vec<(f64, f64)>)>;

/// Chooses a multiplier for every tuned `(cell, solver)` pair.
fn tune_all(config: &ExperimentConfig, cells: &[InstanceSpec]) -> Result<Vec<Vec<Tuning>>> {
    let max_pilots = config
        .solvers
        .iter()
        .map(|s| match s.step {
            StepPolicy::Tuned { pilot_trials, .. } => pilot_trials,
            _ => 0,
        })
        .max()
        .unwrap_or(0);
    if max_pilots == 0 {
        return Ok(vec![vec![None; config.solvers.len()]; cells.len()]);
    }
    let pilot_work: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..max_pilots).map(move |j| (c, j))).collect();
    let specs: Vec<InstanceSpec> = pilot_work
        .iter()
        .map(|&(c, j)| InstanceSpec { seed: pilot_seed(config.master_seed, j), ..cells[c].clone() })
        .collect();
    let f_stars = baseline_values(&specs)?;
    let pilots: Vec<GeneratedInstance> = specs
        .par_iter()
        .map(|spec| attach(spec, f_stars.get(&data_key(spec)).copied()))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.solvers.len()).map(move |s| (c, s)))
        .filter(|&(_, s)| matches!(config.solvers[s].step, StepPolicy::Tuned { .. }))
        .collect();
    let chosen: Vec<(f64, Vec<(f64, f64)>)> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let insts = &pilots[c * max_pilots..(c + 1) * max_pilots];
            tune_one(config, &config.solvers[s], insts, c)
        })
        .collect::<Result<_>>()?;

    let mut out = vec![vec![None; config.solvers.len()]; cells.len()];
    for (&(c, s), pick) in jobs.iter().zip(chosen) {
        out[c][s] = Some(pick);
    }
    Ok(out)
}

fn pilot_seed(master_seed: u64, j: usize) -> u64 {
    mix_seed(master_seed, PILOT_TAG + j as u64)
}

/// Scans the grid in order and keeps the multiplier with the lowest mean
/// pilot iterations, breaking ties (typically: nobody converged) by the mean
/// log final gap. A candidate is abandoned once its running total cannot
/// beat the incumbent.
fn tune_one(config: &ExperimentConfig, setup: &SolverSetup, pilots: &[GeneratedInstance], cell: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    let StepPolicy::Tuned { multipliers, pilot_trials, pilot_iterations } = &setup.step else {
        unreachable!("only tuned setups are scheduled");
    };
    let budget = pilot_iterations.unwrap_or((setup.max_iterations / 5).max(1));
    let mut best: Option<(usize, f64, f64)> = None;
    let mut scores = Vec::new();
    'grid: for &m in multipliers {
        let (mut total, mut log_gap) = (0usize, 0.0);
        for (j, inst) in pilots.iter().take(*pilot_trials).enumerate() {
            if best.is_some_and(|(b, _, _)| total > b) {
                continue 'grid;
            }
            let rule = step_rule(setup, inst, Some(m))?;
            let cap = best.map_or(budget, |(b, _, _)| budget.min(b - total).max(1));
            let seed = mix_seed(inst.spec.seed, cell as u64);
            let r = one_run(setup, inst, rule, config.gap_tolerance, cap, seed, j)?;
            total += if r.converged { r.iterations } else { budget };
            log_gap += r.final_relative_gap.filter(|g| *g > 0.0).map_or(f64::INFINITY, f64::log10);
        }
        scores.push((m, total as f64 / *pilot_trials as f64));
        let better = match best {
            None => true,
            Some((b, g, _)) => total < b || (total == b && log_gap < g),
        };
        if better {
            best = Some((total, log_gap, m));
        }
    }
    Ok((best.expect("grid is nonempty").2, scores))
}

/// CSV with a `# schema=1` line before the header.
pub fn to_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("# schema={CSV_SCHEMA}\n{CSV_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{}",
            r.n,
            r.rho,
            r.omega,
            csv_field(&r.solver),
            r.mean_cpu_seconds,
            r.mean_iterations,
            r.std_iterations,
            r.trials_converged
        )
        .expect("writing to a String");
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: u32,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    output: &'a ExperimentOutput,
}

/// Where the JSON summary goes for a CSV at `csv`: `<stem>.summary.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

pub fn write_outputs(csv: &Path, config: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(csv, to_csv(&output.rows))?;
    let mut json = std::io::BufWriter::new(std::fs::File::create(summary_path(csv))?);
    serde_json::to_writer_pretty(&mut json, &Summary { schema: CSV_SCHEMA, config, output })?;
    json.write_all(b"\n")?;
    json.flush()?;
    Ok(())
}

/// Groups rows by `(n, ρ, ω)` in output order.
pub fn rows_by_cell(rows: &[AggregateRow]) -> Vec<Vec<&AggregateRow>> {
    let mut order: Vec<(usize, u64, u64)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&AggregateRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.n, r.rho.to_bits(), r.omega.to_bits());
        let idx = order.iter().position(|k| *k == key).unwrap_or_else(|| {
            order.push(key);
            order.len() - 1
        });
        groups.entry(idx).or_default().push(r);
    }
    groups.into_values().collect()
}
