//! SPGM and its clipped variant SPGM-C.

use std::time::Instant;

use ndarray::Array1;

use super::{ensure_finite, termination, SolverConfig, SolverKind, StepRule, Tracker};
use crate::error::{Error, Result};
use crate::noise::Substreams;
use crate::problem::{CompositeProblem, RunResult};
use crate::scalar::Scalar;

/// Number of oracle draws behind [`default_clip_threshold`].
pub const CLIP_PREDRAWS: usize = 1000;

/// `x^{k+1} = prox_{η_k h}(x^k − η_k G(x^k; ξ_k))`, reporting the
/// `η`-weighted average of `x^1, …, x^K`.
pub fn run_spgm<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<RunResult<T>> {
    expect_kind(config, SolverKind::Spgm)?;
    run_averaged(problem, config, None)
}

/// SPGM with every draw rescaled to `g·min(1, τ/‖g‖)`.
pub fn run_spgmc<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<RunResult<T>> {
    expect_kind(config, SolverKind::Spgmc)?;
    run_averaged(problem, config, config.clip_threshold)
}

/// The 0.99 quantile (nearest rank) of `‖G(x⁰; ξ)‖` over
/// [`CLIP_PREDRAWS`] draws from an auxiliary stream of `seed`.
pub fn default_clip_threshold<T: Scalar>(problem: &CompositeProblem<T>, seed: u64) -> T {
    let mut streams = Substreams::new(seed);
    let rng = streams.auxiliary(0);
    let x0 = problem.start().view();
    let mut norms: Vec<T> = (0..CLIP_PREDRAWS)
        .map(|_| {
            let g = problem.draw(x0, rng);
            g.dot(&g).sqrt()
        })
        .collect();
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Greater));
    let rank = (0.99 * CLIP_PREDRAWS as f64).ceil() as usize;
    norms[rank - 1]
}

fn expect_kind<T: Scalar>(config: &SolverConfig<T>, kind: SolverKind) -> Result<()> {
    config.validate()?;
    if config.algorithm == kind {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} solver called with a {} configuration",
            kind.label(),
            config.algorithm.label()
        )))
    }
}

fn run_averaged<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &SolverConfig<T>,
    clip: Option<T>,
) -> Result<RunResult<T>> {
    let started = Instant::now();
    let base = config.base_step();
    let step_at = |k: usize| match (&config.step, base) {
        (StepRule::Sequence(s), _) => s[k],
        (_, Some(eta)) => eta,
        _ => unreachable!("non-sequence rules always have a base step"),
    };

    let mut streams = Substreams::new(config.seed);
    let mut x = problem.start().clone();
    let mut z = x.clone();
    let mut weight_sum = T::zero();
    let mut tracker = Tracker::new(problem, config)?;
    let mut hit = tracker.observe(0, z.view())?;
    let mut k = 0;

    while !hit && k < config.max_iterations {
        let eta = step_at(k);
        let mut g: Array1<T> = problem.draw(x.view(), streams.iteration(k as u64));
        if let Some(tau) = clip {
            let norm = g.dot(&g).sqrt();
            if norm > tau {
                g *= tau / norm;
            }
        }
        g.zip_mut_with(&x, |gi, &xi| *gi = xi - eta * *gi);
        ensure_finite(&g, k + 1)?;
        x = problem.prox(g.view(), eta);
        ensure_finite(&x, k + 1)?;

        weight_sum += eta;
        let w = eta / weight_sum;
        if k == 0 {
            z.assign(&x);
        } else {
            z.zip_mut_with(&x, |zi, &xi| *zi = *zi + w * (xi - *zi));
        }
        k += 1;
        hit = tracker.observe(k, z.view())?;
    }

    Ok(RunResult {
        gap_history: tracker.finish(k, z.view())?,
        output_point: z,
        final_iterate: x,
        iterations_used: k,
        oracle_calls: k,
        wall_time: started.elapsed().as_secs_f64(),
        seed: config.seed,
        terminated_by: termination(hit),
    })
}
