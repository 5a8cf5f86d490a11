//! Problem data model for `min F(x) = f(x) + h(x)`.
//!
//! `f` is reached only through (stochastic) subgradients, `h` through its
//! proximal map. The indicator part of `h` never shows up as a value: the
//! regularizer reports its finite part and answers membership queries
//! separately, so objective values stay finite on the feasible set.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Constants of the hybrid smoothness bound
/// `‖f'(x) − f'(y)‖ ≤ L‖x − y‖ + H‖x − y‖^ν + M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SmoothnessConstants<T: Scalar> {
    /// Lipschitz constant of the smooth part of the gradient.
    pub grad_lipschitz: T,
    /// Hölder constant of the weakly smooth part.
    pub holder_constant: T,
    /// Hölder exponent, strictly inside `(0, 1)`.
    pub holder_exponent: T,
    /// Bound on the nonsmooth (Lipschitz-continuous) part.
    pub subgrad_bound: T,
}

impl<T: Scalar> SmoothnessConstants<T> {
    pub fn new(grad_lipschitz: T, holder_constant: T, holder_exponent: T, subgrad_bound: T) -> Result<Self> {
        let c = Self {
            grad_lipschitz,
            holder_constant,
            holder_exponent,
            subgrad_bound,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn smooth(grad_lipschitz: T) -> Result<Self> {
        Self::new(grad_lipschitz, T::zero(), T::lit(0.5), T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("grad_lipschitz", self.grad_lipschitz),
            ("holder_constant", self.holder_constant),
            ("subgrad_bound", self.subgrad_bound),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(invalid(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        let nu = self.holder_exponent;
        if !(nu > T::zero() && nu < T::one()) {
            return Err(invalid("holder_exponent", format!("must lie in (0, 1), got {nu}")));
        }
        if self.grad_lipschitz == T::zero() && self.holder_constant == T::zero() && self.subgrad_bound == T::zero() {
            return Err(invalid("smoothness", "at least one of the three constants must be positive"));
        }
        Ok(())
    }
}

/// Moment bound `E‖G(x;ξ) − E G(x;ξ)‖^α ≤ σ^α` on the oracle noise.
///
/// A zero scale is accepted and means an exact oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NoiseConstants<T: Scalar> {
    /// Moment scale σ.
    pub scale: T,
    /// Moment order α in `(1, 2]`.
    pub moment_order: T,
}

impl<T: Scalar> NoiseConstants<T> {
    pub fn new(scale: T, moment_order: T) -> Result<Self> {
        let c = Self { scale, moment_order };
        c.validate()?;
        Ok(c)
    }

    pub fn noiseless() -> Self {
        Self {
            scale: T::zero(),
            moment_order: T::lit(2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= T::zero()) || !self.scale.is_finite() {
            return Err(invalid("scale", format!("must be finite and nonnegative, got {}", self.scale)));
        }
        let a = self.moment_order;
        if !(a > T::one() && a <= T::lit(2.0)) {
            return Err(invalid("moment_order", format!("must lie in (1, 2], got {a}")));
        }
        Ok(())
    }
}

/// The function `f`, with one fixed selection from its subdifferential.
pub trait Objective<T: Scalar>: Send + Sync {
    fn value(&self, x: ArrayView1<T>) -> T;

    /// A member of `∂f(x)`. Nonsmooth objectives document their tie-break.
    fn subgradient(&self, x: ArrayView1<T>) -> Array1<T>;

    /// Whether `f` is differentiable everywhere on the domain.
    fn is_differentiable(&self) -> bool {
        true
    }
}

/// The function `h`: finite regularizer part, domain, and joint prox.
pub trait Regularizer<T: Scalar>: Send + Sync {
    /// Finite part of `h`; the indicator of the domain is not included.
    fn value(&self, x: ArrayView1<T>) -> T;

    /// `argmin_z h(z) + ‖z − v‖² / (2 step)`.
    fn prox(&self, v: ArrayView1<T>, step: T) -> Array1<T>;

    /// Membership in `dom h`, up to a few ulps of rounding.
    fn contains(&self, x: ArrayView1<T>) -> bool;

    /// `max ‖x − y‖` over `dom h`.
    fn diameter(&self) -> T;
}

/// One draw of `G(x; ξ)`. All randomness comes from the caller's stream.
pub trait StochasticOracle<T: Scalar>: Send + Sync {
    fn draw(&self, x: ArrayView1<T>, rng: &mut dyn RngCore) -> Array1<T>;
}

/// Oracle that returns the exact subgradient and ignores the stream.
pub struct ExactOracle<T: Scalar> {
    objective: Arc<dyn Objective<T>>,
}

impl<T: Scalar> ExactOracle<T> {
    pub fn new(objective: Arc<dyn Objective<T>>) -> Self {
        Self { objective }
    }
}

impl<T: Scalar> StochasticOracle<T> for ExactOracle<T> {
    fn draw(&self, x: ArrayView1<T>, _rng: &mut dyn RngCore) -> Array1<T> {
        self.objective.subgradient(x)
    }
}

/// Known optimal value (and optionally a minimizer) of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Reference<T: Scalar> {
    pub value: T,
    pub point: Option<Array1<T>>,
}

/// A composite problem instance. Immutable once built and shareable across
/// threads; every oracle call takes an explicit randomness stream.
#[derive(Clone)]
pub struct CompositeProblem<T: Scalar> {
    dimension: usize,
    objective: Arc<dyn Objective<T>>,
    regularizer: Arc<dyn Regularizer<T>>,
    oracle: Arc<dyn StochasticOracle<T>>,
    smoothness: SmoothnessConstants<T>,
    noise: NoiseConstants<T>,
    start: Array1<T>,
    reference: Option<Reference<T>>,
}

impl<T: Scalar> std::fmt::Debug for CompositeProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dimension", &self.dimension)
            .field("smoothness", &self.smoothness)
            .field("noise", &self.noise)
            .field("domain_diameter", &self.regularizer.diameter())
            .field("reference", &self.reference.as_ref().map(|r| r.value))
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> CompositeProblem<T> {
    pub fn new(
        objective: Arc<dyn Objective<T>>,
        regularizer: Arc<dyn Regularizer<T>>,
        oracle: Arc<dyn StochasticOracle<T>>,
        smoothness: SmoothnessConstants<T>,
        noise: NoiseConstants<T>,
        start: Array1<T>,
    ) -> Result<Self> {
        smoothness.validate()?;
        noise.validate()?;
        let dimension = start.len();
        if dimension == 0 {
            return Err(invalid("start", "dimension must be positive"));
        }
        let diameter = regularizer.diameter();
        if !(diameter > T::zero()) || !diameter.is_finite() {
            return Err(invalid("regularizer", format!("domain diameter must be positive and finite, got {diameter}")));
        }
        if !regularizer.contains(start.view()) {
            return Err(invalid("start", "starting point lies outside dom h"));
        }
        Ok(Self {
            dimension,
            objective,
            regularizer,
            oracle,
            smoothness,
            noise,
            start,
            reference: None,
        })
    }

    /// Attaches the known optimal value `F*` (and a minimizer when available).
    pub fn with_reference(mut self, value: T, point: Option<Array1<T>>) -> Self {
        self.reference = Some(Reference { value, point });
        self
    }

    /// Replaces the stochastic oracle, keeping everything else.
    pub fn with_oracle(mut self, oracle: Arc<dyn StochasticOracle<T>>, noise: NoiseConstants<T>) -> Self {
        self.oracle = oracle;
        self.noise = noise;
        self
    }

    pub fn with_start(mut self, start: Array1<T>) -> Result<Self> {
        if start.len() != self.dimension || !self.regularizer.contains(start.view()) {
            return Err(invalid("start", "starting point has wrong length or lies outside dom h"));
        }
        self.start = start;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn objective(&self) -> &dyn Objective<T> {
        self.objective.as_ref()
    }

    pub fn regularizer(&self) -> &dyn Regularizer<T> {
        self.regularizer.as_ref()
    }

    pub fn oracle(&self) -> &dyn StochasticOracle<T> {
        self.oracle.as_ref()
    }

    pub fn smoothness(&self) -> &SmoothnessConstants<T> {
        &self.smoothness
    }

    pub fn noise(&self) -> &NoiseConstants<T> {
        &self.noise
    }

    pub fn domain_diameter(&self) -> T {
        self.regularizer.diameter()
    }

    pub fn start(&self) -> &Array1<T> {
        &self.start
    }

    pub fn reference(&self) -> Option<&Reference<T>> {
        self.reference.as_ref()
    }

    pub fn draw(&self, x: ArrayView1<T>, rng: &mut dyn RngCore) -> Array1<T> {
        self.oracle.draw(x, rng)
    }

    pub fn exact_subgradient(&self, x: ArrayView1<T>) -> Array1<T> {
        self.objective.subgradient(x)
    }

    pub fn prox(&self, v: ArrayView1<T>, step: T) -> Array1<T> {
        self.regularizer.prox(v, step)
    }

    pub fn contains(&self, x: ArrayView1<T>) -> bool {
        self.regularizer.contains(x)
    }

    /// `F(x) = f(x) + h(x)` with only the finite part of `h`.
    ///
    /// The caller is responsible for `x ∈ dom h`.
    pub fn evaluate(&self, x: ArrayView1<T>) -> Result<T> {
        let f = self.objective.value(x);
        if !f.is_finite() {
            return Err(Error::NonFinite {
                term: "f",
                detail: format!("f(x) = {f}"),
            });
        }
        let h = self.regularizer.value(x);
        if !h.is_finite() {
            return Err(Error::NonFinite {
                term: "h",
                detail: format!("h(x) = {h}"),
            });
        }
        let total = f + h;
        if !total.is_finite() {
            return Err(Error::NonFinite {
                term: "f + h",
                detail: format!("{f} + {h} overflows"),
            });
        }
        Ok(total)
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    BudgetExhausted,
    GapTarget,
}

/// Per-run trace returned by every stochastic solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunResult<T: Scalar> {
    /// The averaged iterate `z^K`.
    pub output_point: Array1<T>,
    /// The last prox iterate `x^K`.
    pub final_iterate: Array1<T>,
    pub iterations_used: usize,
    pub oracle_calls: usize,
    /// `(iteration, F(z^iteration))` samples.
    pub gap_history: Vec<(usize, T)>,
    pub wall_time: f64,
    pub seed: u64,
    pub terminated_by: Termination,
}
