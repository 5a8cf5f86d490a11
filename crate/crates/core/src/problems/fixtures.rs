//! Controlled problems with known optimum for the rate sweeps.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{oracle_for, plug_in, Family, GeneratedInstance, InstanceMetadata, InstanceSpec};
use crate::error::{invalid, Result};
use crate::problem::{CompositeProblem, Objective, SmoothnessConstants};
use crate::prox::{domain_diameter_box, BoxL1Prox};

/// Hölder exponent of the weakly smooth term.
pub const FIXTURE_NU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Quadratic,
    Nonsmooth1D,
    HolderOnly,
    Mixed,
}

impl FixtureKind {
    pub fn weights(self) -> FixtureWeights {
        let (quadratic, holder, nonsmooth) = match self {
            FixtureKind::Quadratic => (1.0, 0.0, 0.0),
            FixtureKind::Nonsmooth1D => (0.0, 0.0, 1.0),
            FixtureKind::HolderOnly => (0.0, 1.0, 0.0),
            FixtureKind::Mixed => (1.0, 1.0, 1.0),
        };
        FixtureWeights {
            quadratic,
            holder,
            nonsmooth,
        }
    }
}

/// Nonnegative weights of the three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureWeights {
    pub quadratic: f64,
    pub holder: f64,
    pub nonsmooth: f64,
}

/// `f(x) = w_L·½Σλ_i d_i² + w_H·‖d‖^{1+ν}/(1+ν) + w_M·‖d‖₁/√n`, `d = x − c`.
///
/// The spectrum `λ` is log-spaced on `[1e-8, 1]` (just `1` when `n = 1`),
/// so the quadratic is ill-conditioned enough that its rate shows up over
/// the whole sweep range.
pub struct FixtureObjective {
    center: Array1<f64>,
    spectrum: Array1<f64>,
    weights: FixtureWeights,
}

impl FixtureObjective {
    pub fn new(center: Array1<f64>, weights: FixtureWeights) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        for (name, w) in [
            ("quadratic", weights.quadratic),
            ("holder", weights.holder),
            ("nonsmooth", weights.nonsmooth),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid(name, "fixture weights must be finite and nonnegative"));
            }
        }
        let spectrum = if n == 1 {
            Array1::ones(1)
        } else {
            Array1::from_shape_fn(n, |i| 10f64.powf(-8.0 + 8.0 * i as f64 / (n - 1) as f64))
        };
        Ok(Self {
            center,
            spectrum,
            weights,
        })
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    /// `L = w_L`, `H = 2w_H` (the sharp value is `2^{1−ν}`), `M = 2w_M`.
    pub fn constants(&self) -> Result<SmoothnessConstants<f64>> {
        let w = self.weights;
        SmoothnessConstants::new(w.quadratic, 2.0 * w.holder, FIXTURE_NU, 2.0 * w.nonsmooth)
    }

    fn holder_gradient(&self, d: &Array1<f64>) -> Array1<f64> {
        let r = d.dot(d).sqrt();
        if r == 0.0 {
            Array1::zeros(d.len())
        } else {
            d * r.powf(FIXTURE_NU - 1.0)
        }
    }
}

impl Objective<f64> for FixtureObjective {
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let d = &x - &self.center;
        let w = self.weights;
        let n = d.len() as f64;
        let mut v = 0.0;
        if w.quadratic > 0.0 {
            v += w.quadratic * 0.5 * d.iter().zip(&self.spectrum).map(|(di, l)| l * di * di).sum::<f64>();
        }
        if w.holder > 0.0 {
            v += w.holder * d.dot(&d).sqrt().powf(1.0 + FIXTURE_NU) / (1.0 + FIXTURE_NU);
        }
        if w.nonsmooth > 0.0 {
            v += w.nonsmooth * d.fold(0.0, |a, di| a + di.abs()) / n.sqrt();
        }
        v
    }

    fn subgradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let d = &x - &self.center;
        let w = self.weights;
        let scale = w.nonsmooth / (d.len() as f64).sqrt();
        let mut g = Array1::zeros(d.len());
        if w.quadratic > 0.0 {
            g.zip_mut_with(&(&d * &self.spectrum), |gi, v| *gi += w.quadratic * v);
        }
        if w.holder > 0.0 {
            g.scaled_add(w.holder, &self.holder_gradient(&d));
        }
        if w.nonsmooth > 0.0 {
            g.zip_mut_with(&d, |gi, di| {
                if *di != 0.0 {
                    *gi += scale * di.signum()
                }
            });
        }
        g
    }

    fn is_differentiable(&self) -> bool {
        self.weights.nonsmooth == 0.0
    }
}

/// The fixture `kind` on `[−1, 1]^n` with an exact oracle.
pub fn generate_fixture(kind: FixtureKind, n: usize, seed: u64) -> Result<GeneratedInstance> {
    generate_weighted_fixture(kind.weights(), &InstanceSpec::fixture(kind, n, seed))
}

/// A fixture with arbitrary term weights, on `[−R, R]^n` with `R = spec.bound`.
///
/// For `n = 1` the minimizer is `0` and the start is `R`; otherwise the
/// minimizer is drawn uniformly from `[−R/2, R/2]^n` and the start is `0`.
/// `F* = 0`. A positive `spec.rho` attaches the heavy-tail oracle.
pub fn generate_weighted_fixture(weights: FixtureWeights, spec: &InstanceSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    if spec.family != Family::SyntheticFixture {
        return Err(invalid("family", "expected the synthetic fixture family"));
    }
    let (n, r) = (spec.n, spec.bound);
    let (center, start) = if n == 1 {
        (Array1::zeros(1), Array1::from_elem(1, r))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let c = Array1::from_shape_simple_fn(n, || rng.random_range(-0.5 * r..=0.5 * r));
        (c, Array1::zeros(n))
    };
    let fixture = FixtureObjective::new(center.clone(), weights)?;
    let lower = Array1::from_elem(n, -r);
    let upper = Array1::from_elem(n, r);
    let metadata = InstanceMetadata {
        spectral_norm: None,
        smoothness: fixture.constants()?,
        noise: plug_in(spec),
        diameter: domain_diameter_box(lower.view(), upper.view()),
    };
    let objective: Arc<dyn Objective<f64>> = Arc::new(fixture);
    let problem = CompositeProblem::new(
        objective.clone(),
        Arc::new(BoxL1Prox::new(lower, upper, 0.0)?),
        oracle_for(&objective, spec),
        metadata.smoothness,
        metadata.noise,
        start,
    )?
    .with_reference(0.0, Some(center.clone()));
    Ok(GeneratedInstance {
        spec: spec.clone(),
        a: None,
        b: None,
        x_star: center,
        problem,
        f_star_reference: Some(0.0),
        metadata,
    })
}
