//! The stochastic solvers and the deterministic reference solver.

mod baseline;
mod spgm;
mod spgma;

pub use baseline::{run_baseline, BaselineOptions, BaselineResult};
pub use spgm::{default_clip_threshold, run_spgm, run_spgmc};
pub use spgma::run_spgma;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{CompositeProblem, RunResult, Termination};
use crate::scalar::Scalar;
use crate::schedule::{Algorithm, SchedulePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Spgm,
    Spgma,
    Spgmc,
    Baseline,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Spgm => "SPGM",
            SolverKind::Spgma => "SPGM-A",
            SolverKind::Spgmc => "SPGM-C",
            SolverKind::Baseline => "baseline",
        }
    }
}

/// How the step `η_k` is produced.
///
/// For SPGM-A, `Constant` and `Plan` give the base `η` and the solver uses
/// `(k + 2)η/2`; `Sequence` gives each `η_k` verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case")]
pub enum StepRule<T: Scalar> {
    Constant(T),
    Sequence(Vec<T>),
    Plan { plan: SchedulePlan<T>, multiplier: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolverConfig<T: Scalar> {
    pub algorithm: SolverKind,
    pub step: StepRule<T>,
    pub max_iterations: usize,
    /// Norm cap `τ` for SPGM-C; `+∞` disables clipping.
    pub clip_threshold: Option<T>,
    /// Stop once `(F(z^k) − F*)/(F(x⁰) − F*)` drops to this level.
    pub gap_target: Option<T>,
    pub trace_cadence: usize,
    pub seed: u64,
}

impl<T: Scalar> SolverConfig<T> {
    /// Constant-step configuration with no gap target and cadence 1.
    pub fn constant(algorithm: SolverKind, eta: T, max_iterations: usize, seed: u64) -> Self {
        Self {
            algorithm,
            step: StepRule::Constant(eta),
            max_iterations,
            clip_threshold: None,
            gap_target: None,
            trace_cadence: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        if self.trace_cadence == 0 {
            return cfg("trace_cadence must be at least 1");
        }
        match (self.algorithm, self.clip_threshold) {
            (SolverKind::Spgmc, None) => return cfg("SPGM-C requires clip_threshold"),
            (SolverKind::Spgmc, Some(t)) if !(t > T::zero()) => return cfg("clip_threshold must be positive"),
            (SolverKind::Spgm | SolverKind::Spgma | SolverKind::Baseline, Some(_)) => {
                return cfg("clip_threshold is only valid for SPGM-C")
            }
            _ => {}
        }
        if let Some(g) = self.gap_target {
            if !(g > T::zero() && g < T::one()) {
                return cfg("gap_target must lie in (0, 1)");
            }
        }
        match &self.step {
            StepRule::Constant(eta) if !(*eta > T::zero() && eta.is_finite()) => {
                return cfg("constant step must be positive and finite")
            }
            StepRule::Sequence(s) => {
                if s.len() < self.max_iterations {
                    return cfg("step sequence is shorter than max_iterations");
                }
                if s.iter().any(|e| !(*e > T::zero() && e.is_finite())) {
                    return cfg("step sequence entries must be positive and finite");
                }
            }
            StepRule::Plan { plan, multiplier } => {
                if !(*multiplier > T::zero() && multiplier.is_finite()) {
                    return cfg("step multiplier must be positive and finite");
                }
                let want = match self.algorithm {
                    SolverKind::Spgma => Algorithm::Spgma,
                    _ => Algorithm::Spgm,
                };
                if plan.algorithm != want {
                    return cfg("schedule plan was built for a different algorithm");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `η` for constant rules, `None` for explicit sequences.
    fn base_step(&self) -> Option<T> {
        match &self.step {
            StepRule::Constant(eta) => Some(*eta),
            StepRule::Sequence(_) => None,
            StepRule::Plan { plan, multiplier } => Some(plan.step() * *multiplier),
        }
    }
}

/// Dispatches to the stochastic solver named in the configuration.
pub fn run<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<RunResult<T>> {
    match config.algorithm {
        SolverKind::Spgm => run_spgm(problem, config),
        SolverKind::Spgma => run_spgma(problem, config),
        SolverKind::Spgmc => run_spgmc(problem, config),
        SolverKind::Baseline => Err(Error::Config(
            "the baseline returns an optimal value, not a run trace; call run_baseline".into(),
        )),
    }
}

/// Trace bookkeeping shared by the solvers: F-history at the cadence and the
/// relative-gap stopping test.
struct Tracker<'a, T: Scalar> {
    problem: &'a CompositeProblem<T>,
    cadence: usize,
    /// `(F*, F(x⁰) − F*, target)` when a gap target is active.
    stop: Option<(T, T, T)>,
    history: Vec<(usize, T)>,
    last_recorded: Option<usize>,
}

impl<'a, T: Scalar> Tracker<'a, T> {
    fn new(problem: &'a CompositeProblem<T>, config: &SolverConfig<T>) -> Result<Self> {
        let stop = match config.gap_target {
            None => None,
            Some(target) => {
                let f_star = problem
                    .reference()
                    .ok_or_else(|| Error::Config("gap_target requires a reference optimal value".into()))?
                    .value;
                let f0 = problem.evaluate(problem.start().view())?;
                Some((f_star, f0 - f_star, target))
            }
        };
        Ok(Self {
            problem,
            cadence: config.trace_cadence,
            stop,
            history: Vec::new(),
            last_recorded: None,
        })
    }

    /// Records `F(z)` when `k` is on the cadence and reports whether the gap
    /// target has been reached.
    fn observe(&mut self, k: usize, z: ArrayView1<T>) -> Result<bool> {
        if k % self.cadence != 0 {
            return Ok(false);
        }
        let value = self.problem.evaluate(z).map_err(|_| Error::Diverged { iteration: k })?;
        self.history.push((k, value));
        self.last_recorded = Some(k);
        Ok(match self.stop {
            Some((f_star, initial_gap, target)) => value - f_star <= target * initial_gap,
            None => false,
        })
    }

    fn finish(mut self, k: usize, z: ArrayView1<T>) -> Result<Vec<(usize, T)>> {
        if self.last_recorded != Some(k) {
            let value = self.problem.evaluate(z).map_err(|_| Error::Diverged { iteration: k })?;
            self.history.push((k, value));
        }
        Ok(self.history)
    }
}

fn ensure_finite<T: Scalar>(x: &Array1<T>, iteration: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { iteration })
    }
}

fn termination(hit: bool) -> Termination {
    if hit {
        Termination::GapTarget
    } else {
        Termination::BudgetExhausted
    }
}
