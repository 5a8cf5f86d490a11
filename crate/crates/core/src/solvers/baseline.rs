//! Deterministic reference solver for `F*`: accelerated proximal gradient
//! with backtracking and gradient-based adaptive restart.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    /// Stop once the prox-gradient mapping norm `L‖x⁺ − y‖` is this small.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BaselineResult<T: Scalar> {
    pub f_star: T,
    /// `None` when a reference value without a point was passed through.
    pub minimizer: Option<Array1<T>>,
    pub iterations: usize,
    /// True when the problem carried its own reference and nothing was solved.
    pub bypassed: bool,
    pub mapping_norm: T,
}

/// Estimates `F*`, or returns the problem's reference value when it has one.
///
/// Refuses nondifferentiable `f` without a reference, since the method needs
/// gradients of the smooth part.
pub fn run_baseline<T: Scalar>(problem: &CompositeProblem<T>, options: &BaselineOptions) -> Result<BaselineResult<T>> {
    if let Some(r) = problem.reference() {
        return Ok(BaselineResult {
            f_star: r.value,
            minimizer: r.point.clone(),
            iterations: 0,
            bypassed: true,
            mapping_norm: T::zero(),
        });
    }
    if !problem.objective().is_differentiable() {
        return Err(Error::Config(
            "the baseline needs a differentiable f; supply reference_f_star for this problem".into(),
        ));
    }

    let f = |x: &Array1<T>| problem.objective().value(x.view());
    let tol = T::lit(options.tolerance);
    let mut lip = problem.smoothness().grad_lipschitz.max(T::lit(1e-8));
    let mut x = problem.start().clone();
    let mut y = x.clone();
    let mut t = T::one();
    let mut best = problem.evaluate(x.view())?;
    let mut mapping = T::infinity();
    let mut k = 0;
    let half = T::lit(0.5);

    while k < options.max_iterations {
        let g = problem.exact_subgradient(y.view());
        let fy = f(&y);
        let slack = T::lit(1e-13) * fy.abs().max(T::one());
        let (x_new, d) = loop {
            let step = T::one() / lip;
            let v = &y - &(&g * step);
            let cand = problem.prox(v.view(), step);
            let d = &cand - &y;
            let model = fy + g.dot(&d) + half * lip * d.dot(&d);
            if f(&cand) <= model + slack || lip > T::lit(1e300) {
                break (cand, d);
            }
            lip = lip * T::lit(2.0);
        };
        if !x_new.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { iteration: k });
        }
        mapping = lip * d.dot(&d).sqrt();
        k += 1;

        best = best.min(problem.evaluate(x_new.view())?);
        if mapping <= tol {
            x = x_new;
            break;
        }
        // Restart when the momentum direction opposes the gradient mapping.
        let step_dir = &x_new - &x;
        if (&y - &x_new).dot(&step_dir) > T::zero() {
            t = T::one();
            y = x_new.clone();
        } else {
            let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * half;
            y = &x_new + &(step_dir * ((t - T::one()) / t_next));
            t = t_next;
        }
        x = x_new;
        lip = lip * T::lit(0.9);
    }
    Ok(BaselineResult {
        f_star: best,
        minimizer: Some(x),
        iterations: k,
        bypassed: false,
        mapping_norm: mapping,
    })
}
