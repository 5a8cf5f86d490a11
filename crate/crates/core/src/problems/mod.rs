//! Instance generators: the two regression families and the rate fixtures.

mod fixtures;
mod io;
mod regression;

pub use fixtures::{generate_fixture, generate_weighted_fixture, FixtureKind, FixtureObjective, FixtureWeights};
pub use io::{read_instance, sidecar_path, write_instance, MAGIC};
pub use regression::{generate_ball_residual, generate_box_l1, ResidualObjective};

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise::{plug_in_noise_constants, HeavyTailModel, NoisyOracle};
use crate::problem::{CompositeProblem, ExactOracle, NoiseConstants, Objective, SmoothnessConstants, StochasticOracle};
use crate::schedule::ProblemConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `min_{l≤x≤u} ½‖Ax−b‖² + (1/p)‖Ax−b‖_p^p + λ‖x‖₁`.
    BoxL1Regression,
    /// `min_{‖x‖≤u} ½‖Ax−b‖² + (1/p)‖Ax−b‖_p^p + λ‖Ax−b‖₁`.
    BallResidualRegression,
    SyntheticFixture,
}

/// Recipe for one random instance. Generation is a pure function of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub family: Family,
    pub n: usize,
    pub rho: f64,
    pub omega: f64,
    /// Residual exponent `p ∈ (1, 2]`.
    #[serde(default = "default_p")]
    pub p: f64,
    pub lambda: f64,
    /// Box half-width or ball radius.
    #[serde(default = "default_bound")]
    pub bound: f64,
    pub seed: u64,
    /// Which fixture, for the synthetic family.
    #[serde(default)]
    pub fixture: Option<FixtureKind>,
}

fn default_p() -> f64 {
    1.5
}

fn default_bound() -> f64 {
    100.0
}

impl InstanceSpec {
    /// Box family with `p = 1.5`, `λ = 1`, box `[−100, 100]^n`.
    pub fn box_l1(n: usize, rho: f64, omega: f64, seed: u64) -> Self {
        Self {
            family: Family::BoxL1Regression,
            n,
            rho,
            omega,
            p: 1.5,
            lambda: 1.0,
            bound: 100.0,
            seed,
            fixture: None,
        }
    }

    /// Ball family with `p = 1.5`, `λ = 0.1`, radius 100.
    pub fn ball_residual(n: usize, rho: f64, omega: f64, seed: u64) -> Self {
        Self {
            family: Family::BallResidualRegression,
            lambda: 0.1,
            ..Self::box_l1(n, rho, omega, seed)
        }
    }

    pub fn fixture(kind: FixtureKind, n: usize, seed: u64) -> Self {
        Self {
            family: Family::SyntheticFixture,
            n,
            rho: 0.0,
            omega: 3.0,
            p: 1.5,
            lambda: 0.0,
            bound: 1.0,
            seed,
            fixture: Some(kind),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(invalid("p", format!("must lie in (1, 2], got {}", self.p)));
        }
        if !(self.lambda >= 0.0) {
            return Err(invalid("lambda", format!("must be nonnegative, got {}", self.lambda)));
        }
        if !(self.bound > 0.0) || !self.bound.is_finite() {
            return Err(invalid("bound", format!("must be positive, got {}", self.bound)));
        }
        HeavyTailModel::new(self.omega, self.rho)?;
        if self.family == Family::SyntheticFixture && self.fixture.is_none() {
            return Err(invalid("fixture", "synthetic family needs a fixture kind"));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> HeavyTailModel {
        HeavyTailModel {
            omega: self.omega,
            rho: self.rho,
        }
    }
}

/// Derived quantities recorded alongside an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetadata {
    /// `‖A‖₂` from power iteration, for the regression families.
    pub spectral_norm: Option<f64>,
    pub smoothness: SmoothnessConstants<f64>,
    /// Plug-in `(σ, α)`.
    pub noise: NoiseConstants<f64>,
    pub diameter: f64,
}

impl InstanceMetadata {
    pub fn constants(&self) -> ProblemConstants<f64> {
        ProblemConstants {
            smoothness: self.smoothness,
            noise: self.noise,
            diameter: self.diameter,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub spec: InstanceSpec,
    /// Data matrix; `None` for fixtures.
    pub a: Option<Arc<Array2<f64>>>,
    pub b: Option<Array1<f64>>,
    /// Planted solution (the minimizer, for fixtures).
    pub x_star: Array1<f64>,
    pub problem: CompositeProblem<f64>,
    pub f_star_reference: Option<f64>,
    pub metadata: InstanceMetadata,
}

/// Builds the instance `spec` describes.
pub fn generate(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    match spec.family {
        Family::BoxL1Regression => generate_box_l1(spec),
        Family::BallResidualRegression => generate_ball_residual(spec),
        Family::SyntheticFixture => generate_fixture_from_spec(spec),
    }
}

fn generate_fixture_from_spec(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    let kind = spec.fixture.expect("validated");
    generate_weighted_fixture(kind.weights(), spec)
}

/// Power iteration on `AᵀA` from a seeded start: at most `max_iter` steps,
/// stopping when successive estimates of `‖A‖₂` agree to `rtol`.
pub fn spectral_norm(a: &Array2<f64>, max_iter: usize, rtol: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Array1<f64> = Array1::from_shape_simple_fn(a.ncols(), || StandardNormal.sample(&mut rng));
    v /= v.dot(&v).sqrt();
    let mut est = 0.0;
    for _ in 0..max_iter {
        let av = a.dot(&v);
        let next = av.dot(&av).sqrt();
        let w = a.t().dot(&av);
        let nw = w.dot(&w).sqrt();
        if nw == 0.0 {
            return next;
        }
        v = w / nw;
        if (next - est).abs() <= rtol * next {
            return next;
        }
        est = next;
    }
    let av = a.dot(&v);
    av.dot(&av).sqrt().max(est)
}

/// The heavy-tail oracle for `objective`, or the exact one when `ρ = 0`.
fn oracle_for(objective: &Arc<dyn Objective<f64>>, spec: &InstanceSpec) -> Arc<dyn StochasticOracle<f64>> {
    if spec.rho == 0.0 {
        Arc::new(ExactOracle::new(objective.clone()))
    } else {
        Arc::new(NoisyOracle::new(objective.clone(), spec.noise_model()))
    }
}

fn plug_in(spec: &InstanceSpec) -> NoiseConstants<f64> {
    plug_in_noise_constants(&spec.noise_model(), spec.n, crate::noise::mix_seed(spec.seed, 0x5EED))
}

fn gaussian_matrix(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, n), || StandardNormal.sample(rng))
}

fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || StandardNormal.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian_matrix(60, &mut rng);
        let est = spectral_norm(&a, 200, 1e-10, 1);
        let fro = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rayleigh = (0..50)
            .map(|_| {
                let v = gaussian_vector(60, &mut rng);
                let av = a.dot(&v);
                (av.dot(&av) / v.dot(&v)).sqrt()
            })
            .fold(0.0, f64::max);
        assert!(est >= rayleigh * (1.0 - 1e-6) && est <= fro);
        let long = spectral_norm(&a, 20_000, 1e-15, 2);
        assert!((est - long).abs() / long < 1e-3);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Array2::from_diag(&ndarray::array![3.0, -7.0, 1.0]);
        assert!((spectral_norm(&a, 200, 1e-12, 0) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn spec_validation() {
        assert!(InstanceSpec::box_l1(0, 1.0, 1.5, 0).validate().is_err());
        assert!(InstanceSpec::box_l1(3, 1.0, 1.0, 0).validate().is_err());
        let mut s = InstanceSpec::ball_residual(3, 1.0, 1.5, 0);
        s.p = 2.5;
        assert!(s.validate().is_err());
    }
}
