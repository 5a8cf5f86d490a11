//! Empirical rate extraction on the noiseless fixtures.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::CSV_SCHEMA;
use crate::error::{Error, Result};
use crate::noise::mix_seed;
use crate::problems::{generate, FixtureKind, InstanceSpec};
use crate::schedule::{epsilon_for_budget, Algorithm, Mode, SchedulePlan, Theorem};
use crate::solvers::{default_clip_threshold, run, SolverConfig, SolverKind, StepRule};

/// Confidence level passed to the schedule; unused by expectation-mode steps.
const SWEEP_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub solver: String,
    pub k: u64,
    /// Mean of `F(z^K) − F*` over seeds.
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    pub solver: String,
    /// Least-squares slope of `log mean_gap` against `log K`.
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub fixture: FixtureKind,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<SweepFit>,
}

/// For each solver and each `K`, runs `K` iterations with the expectation
/// schedule planned for exactly `K` (the smallest `ε` whose bound fits) and
/// averages the final gap over fixtures seeded by `seeds`.
pub fn sweep_rates(kind: FixtureKind, n: usize, k_grid: &[u64], seeds: &[u64], solvers: &[SolverKind]) -> Result<SweepReport> {
    if k_grid.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one K and one seed".into()));
    }
    if k_grid.contains(&0) {
        return Err(Error::Config("K must be positive".into()));
    }
    if solvers.contains(&SolverKind::Baseline) {
        return Err(Error::Config("the baseline has no iteration budget to sweep".into()));
    }
    let jobs: Vec<(SolverKind, u64, u64)> = solvers
        .iter()
        .flat_map(|&s| k_grid.iter().flat_map(move |&k| seeds.iter().map(move |&seed| (s, k, seed))))
        .collect();
    let gaps: Vec<f64> = jobs.par_iter().map(|&(s, k, seed)| final_gap(kind, n, s, k, seed)).collect::<Result<_>>()?;

    let mut points = Vec::new();
    let mut fits = Vec::new();
    let per_solver = k_grid.len() * seeds.len();
    for (i, &solver) in solvers.iter().enumerate() {
        let block = &gaps[i * per_solver..(i + 1) * per_solver];
        let means: Vec<f64> = block.chunks(seeds.len()).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        for (&k, &mean_gap) in k_grid.iter().zip(&means) {
            points.push(SweepPoint { solver: solver.label().into(), k, mean_gap });
        }
        let (slope, r_squared) = log_log_fit(k_grid, &means);
        fits.push(SweepFit { solver: solver.label().into(), slope, r_squared });
    }
    Ok(SweepReport { fixture: kind, n, seeds: seeds.to_vec(), points, fits })
}

fn final_gap(kind: FixtureKind, n: usize, solver: SolverKind, k: u64, seed: u64) -> Result<f64> {
    let instance = generate(&InstanceSpec::fixture(kind, n, seed))?;
    let problem = &instance.problem;
    let algorithm = if solver == SolverKind::Spgma { Algorithm::Spgma } else { Algorithm::Spgm };
    let c = instance.metadata.constants();
    let eps = epsilon_for_budget(Theorem::for_run(algorithm, Mode::Expectation), &c, k, SWEEP_DELTA);
    let plan = SchedulePlan::with_budget(algorithm, Mode::Expectation, &c, eps, SWEEP_DELTA, k)?;
    let run_seed = mix_seed(seed, k);
    let budget = usize::try_from(k).map_err(|_| Error::Config(format!("K = {k} is too large")))?;
    let config = SolverConfig {
        algorithm: solver,
        step: StepRule::Plan { plan, multiplier: 1.0 },
        max_iterations: budget,
        clip_threshold: (solver == SolverKind::Spgmc).then(|| default_clip_threshold(problem, run_seed)),
        gap_target: None,
        trace_cadence: budget,
        seed: run_seed,
    };
    let result = run(problem, &config)?;
    let f_star = problem.reference().expect("fixtures carry F*").value;
    Ok(problem.evaluate(result.output_point.view())? - f_star)
}

/// Least squares on `(ln K, ln gap)`, skipping nonpositive gaps. NaN when
/// fewer than two points remain.
pub fn log_log_fit(ks: &[u64], gaps: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .zip(gaps)
        .filter(|(_, g)| **g > 0.0 && g.is_finite())
        .map(|(&k, &g)| ((k as f64).ln(), g.ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = format!("# schema={CSV_SCHEMA}\nsolver,K,mean_gap\n");
    for p in &report.points {
        writeln!(out, "{},{},{:e}", p.solver, p.k, p.mean_gap).expect("writing to a String");
    }
    out
}
