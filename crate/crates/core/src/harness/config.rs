//! Experiment configuration, read from one JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::InstanceSpec;
use crate::schedule::Mode;
use crate::solvers::SolverKind;

/// Multipliers tried by [`StepPolicy::Tuned`] when none are given.
pub const DEFAULT_TUNING_GRID: [f64; 7] = [1.0, 0.25, 0.0625, 0.015625, 0.00390625, 0.0009765625, 0.000244140625];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSetting {
    pub rho: f64,
    pub omega: f64,
}

/// Where a solver's base step `η` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepPolicy {
    /// The theorem's step at accuracy `epsilon`, or at the `ε` whose bound
    /// fits `planned_iterations` (default: the run budget).
    Theory {
        #[serde(default = "default_mode")]
        mode: Mode,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        planned_iterations: Option<u64>,
        #[serde(default = "one")]
        multiplier: f64,
    },
    Constant { eta: f64 },
    /// `η = multiplier / L_f`.
    InverseLipschitz { multiplier: f64 },
    /// Picks the `InverseLipschitz` multiplier with the fewest mean
    /// iterations on separately seeded pilot instances.
    Tuned {
        #[serde(default = "default_grid")]
        multipliers: Vec<f64>,
        #[serde(default = "default_pilots")]
        pilot_trials: usize,
        /// Budget of each pilot run; defaults to a fifth of the run budget.
        #[serde(default)]
        pilot_iterations: Option<usize>,
    },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::Theory {
            mode: Mode::Expectation,
            epsilon: None,
            delta: default_delta(),
            planned_iterations: None,
            multiplier: 1.0,
        }
    }
}

/// One solver column of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSetup {
    pub algorithm: SolverKind,
    /// Row name in the output; defaults to the algorithm's label.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub step: StepPolicy,
    #[serde(default = "default_budget")]
    pub max_iterations: usize,
    /// SPGM-C cap; defaults to the pre-draw quantile rule.
    #[serde(default)]
    pub clip_threshold: Option<f64>,
    #[serde(default = "one_usize")]
    pub trace_cadence: usize,
    /// Overrides the plug-in noise scale used by theory steps.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

impl SolverSetup {
    pub fn new(algorithm: SolverKind, step: StepPolicy) -> Self {
        Self {
            algorithm,
            label: None,
            step,
            max_iterations: default_budget(),
            clip_threshold: None,
            trace_cadence: 1,
            sigma: None,
            alpha: None,
        }
    }

    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algorithm.label().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Template; `n`, `rho`, `omega` and `seed` are overwritten per cell.
    pub instance_spec: InstanceSpec,
    /// Dimensions to sweep; empty means the template's `n`.
    #[serde(default)]
    pub dimensions: Vec<usize>,
    /// Noise settings to sweep; empty means the template's.
    #[serde(default)]
    pub noise_grid: Vec<NoiseSetting>,
    #[serde(default)]
    pub solvers: Vec<SolverSetup>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_gap")]
    pub gap_tolerance: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default = "one_usize")]
    pub parallelism: usize,
}

fn default_mode() -> Mode {
    Mode::Expectation
}
fn default_delta() -> f64 {
    0.05
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_grid() -> Vec<f64> {
    DEFAULT_TUNING_GRID.to_vec()
}
fn default_pilots() -> usize {
    3
}
fn default_budget() -> usize {
    100_000
}
fn default_trials() -> usize {
    10
}
fn default_gap() -> f64 {
    1e-4
}

impl ExperimentConfig {
    /// Parses and validates a JSON document. Errors carry the line and
    /// column serde reports.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return cfg("trials must be at least 1".into());
        }
        if !(self.gap_tolerance > 0.0 && self.gap_tolerance < 1.0) {
            return cfg(format!("gap_tolerance must lie in (0, 1), got {}", self.gap_tolerance));
        }
        if self.parallelism == 0 {
            return cfg("parallelism must be at least 1".into());
        }
        for spec in self.instance_specs(0) {
            spec.validate()?;
        }
        for s in &self.solvers {
            let name = s.name();
            if s.algorithm == SolverKind::Baseline {
                return cfg(format!("{name}: the baseline only supplies F*; it is not a benchmark column"));
            }
            if s.max_iterations == 0 || s.trace_cadence == 0 {
                return cfg(format!("{name}: max_iterations and trace_cadence must be at least 1"));
            }
            if s.clip_threshold.is_some() && s.algorithm != SolverKind::Spgmc {
                return cfg(format!("{name}: clip_threshold is only valid for SPGM-C"));
            }
            if let Some(t) = s.clip_threshold {
                if !(t > 0.0) {
                    return cfg(format!("{name}: clip_threshold must be positive"));
                }
            }
            if s.sigma.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                return cfg(format!("{name}: sigma must be nonnegative and finite"));
            }
            if s.alpha.is_some_and(|a| !(a > 1.0 && a <= 2.0)) {
                return cfg(format!("{name}: alpha must lie in (1, 2]"));
            }
            let positive = |v: f64| v > 0.0 && v.is_finite();
            match &s.step {
                StepPolicy::Theory { epsilon, delta, multiplier, planned_iterations, .. } => {
                    if epsilon.is_some_and(|e| !positive(e)) || !(*delta > 0.0 && *delta < 1.0) || !positive(*multiplier) {
                        return cfg(format!("{name}: theory step needs epsilon > 0, delta in (0, 1), multiplier > 0"));
                    }
                    if planned_iterations == &Some(0) {
                        return cfg(format!("{name}: planned_iterations must be at least 1"));
                    }
                }
                StepPolicy::Constant { eta } if !positive(*eta) => {
                    return cfg(format!("{name}: eta must be positive"));
                }
                StepPolicy::InverseLipschitz { multiplier } if !positive(*multiplier) => {
                    return cfg(format!("{name}: multiplier must be positive"));
                }
                StepPolicy::Tuned { multipliers, pilot_trials, pilot_iterations } => {
                    if multipliers.is_empty() || multipliers.iter().any(|m| !positive(*m)) {
                        return cfg(format!("{name}: tuning grid must be nonempty and positive"));
                    }
                    if *pilot_trials == 0 || pilot_iterations == &Some(0) {
                        return cfg(format!("{name}: pilot_trials and pilot_iterations must be at least 1"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The instance recipes of every `(n, ρ, ω)` cell, in output order,
    /// stamped with `seed`.
    pub fn instance_specs(&self, seed: u64) -> Vec<InstanceSpec> {
        let dims = if self.dimensions.is_empty() { vec![self.instance_spec.n] } else { self.dimensions.clone() };
        let noise = if self.noise_grid.is_empty() {
            vec![NoiseSetting { rho: self.instance_spec.rho, omega: self.instance_spec.omega }]
        } else {
            self.noise_grid.clone()
        };
        let mut out = Vec::with_capacity(dims.len() * noise.len());
        for &n in &dims {
            for s in &noise {
                out.push(InstanceSpec { n, rho: s.rho, omega: s.omega, seed, ..self.instance_spec.clone() });
            }
        }
        out
    }

    /// Worker count after the `HTPROX_THREADS` override.
    pub fn effective_parallelism(&self) -> usize {
        std::env::var("HTPROX_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
            .unwrap_or(self.parallelism)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Family;

    const MINIMAL: &str = r#"{
        "instance_spec": {"family": "box_l1_regression", "n": 10, "rho": 1, "omega": 1.8, "lambda": 1, "seed": 0},
        "solvers": [{"algorithm": "spgma"}]
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.trials, 10);
        assert_eq!(c.gap_tolerance, 1e-4);
        assert_eq!(c.instance_spec.family, Family::BoxL1Regression);
        assert_eq!(c.instance_spec.p, 1.5);
        let s = &c.solvers[0];
        assert_eq!(s.max_iterations, 100_000);
        assert_eq!(s.step, StepPolicy::default());
        assert_eq!(s.name(), "SPGM-A");
        assert_eq!(c.instance_specs(5).len(), 1);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let bad = "{\n  \"instance_spec\": {\n    \"family\": \"box_l1_regression\",,\n  }\n}";
        let msg = ExperimentConfig::from_json(bad).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn rejects_invalid_values() {
        for (from, to) in [
            ("\"seed\": 0}", "\"seed\": 0}, \"trials\": 0"),
            ("\"seed\": 0}", "\"seed\": 0}, \"gap_tolerance\": 1.5"),
            ("{\"algorithm\": \"spgma\"}", "{\"algorithm\": \"spgm\", \"clip_threshold\": 3}"),
            ("{\"algorithm\": \"spgma\"}", "{\"algorithm\": \"baseline\"}"),
            ("{\"algorithm\": \"spgma\"}", "{\"algorithm\": \"spgma\", \"step\": {\"rule\": \"tuned\", \"multipliers\": []}}"),
            ("{\"algorithm\": \"spgma\"}", "{\"algorithm\": \"spgma\", \"bogus\": 1}"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(ExperimentConfig::from_json(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn grid_expands_in_order() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.dimensions = vec![10, 20];
        c.noise_grid = vec![NoiseSetting { rho: 1.0, omega: 1.8 }, NoiseSetting { rho: 100.0, omega: 1.2 }];
        let cells: Vec<_> = c.instance_specs(3).iter().map(|s| (s.n, s.rho, s.omega, s.seed)).collect();
        assert_eq!(cells, vec![(10, 1.0, 1.8, 3), (10, 100.0, 1.2, 3), (20, 1.0, 1.8, 3), (20, 100.0, 1.2, 3)]);
    }
}
