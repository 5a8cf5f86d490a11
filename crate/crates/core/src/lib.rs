//! Stochastic proximal subgradient methods for `min f(x) + h(x)` when the
//! subgradients of `f` carry heavy-tailed noise.
//!
//! The numerical core ([`problem`], [`prox`], [`schedule`], [`solvers`]) is
//! generic over [`scalar::Scalar`] (`f32` or `f64`). Instance generation,
//! the numerical checks and the experiment harness work in `f64`; the
//! aliases below name the `f64` instantiations.
//!
//! ```
//! use htprox::problems::{generate, InstanceSpec};
//! use htprox::solvers::{run, SolverConfig, SolverKind};
//!
//! let inst = generate(&InstanceSpec::ball_residual(10, 0.0, 3.0, 1)).unwrap();
//! let eta = 0.1 / inst.metadata.smoothness.grad_lipschitz;
//! let config = SolverConfig::constant(SolverKind::Spgma, eta, 200, 7);
//! let result = run(&inst.problem, &config).unwrap();
//! assert_eq!(result.iterations_used, 200);
//! ```

pub mod error;
pub mod problem;
pub mod prox;
pub mod scalar;
pub mod noise;
pub mod schedule;
pub mod solvers;
pub mod problems;
pub mod verify;
pub mod harness;

pub use error::{Error, Result};

pub type Problem = problem::CompositeProblem<f64>;
pub type Problem32 = problem::CompositeProblem<f32>;
pub type Run = problem::RunResult<f64>;
pub type Plan = schedule::SchedulePlan<f64>;
pub type Constants = schedule::ProblemConstants<f64>;
pub type Config = solvers::SolverConfig<f64>;
