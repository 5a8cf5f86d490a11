//! The accelerated method SPGM-A.

use std::time::Instant;

use ndarray::Zip;

use super::{ensure_finite, termination, SolverConfig, SolverKind, StepRule, Tracker};
use crate::error::{Error, Result};
use crate::noise::Substreams;
use crate::problem::{CompositeProblem, RunResult};
use crate::scalar::Scalar;

/// Three-sequence recursion with `γ_k = 2/(k + 2)`:
///
/// ```text
/// y^k     = (1 − γ_k) z^k + γ_k x^k
/// x^{k+1} = prox_{η_k h}(x^k − η_k G(y^k; ξ_k))
/// z^{k+1} = (1 − γ_k) z^k + γ_k x^{k+1}
/// ```
///
/// with `η_k = (k + 2)η/2` for a base step `η`, or `η_k` taken verbatim from
/// a step sequence.
pub fn run_spgma<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<RunResult<T>> {
    config.validate()?;
    if config.algorithm != SolverKind::Spgma {
        return Err(Error::Config(format!(
            "SPGM-A solver called with a {} configuration",
            config.algorithm.label()
        )));
    }
    let started = Instant::now();
    let base = config.base_step();
    let two = T::lit(2.0);
    let step_at = |k: usize| match (&config.step, base) {
        (StepRule::Sequence(s), _) => s[k],
        (_, Some(eta)) => T::lit((k + 2) as f64) * eta / two,
        _ => unreachable!("non-sequence rules always have a base step"),
    };

    let mut streams = Substreams::new(config.seed);
    let mut x = problem.start().clone();
    let mut z = x.clone();
    let mut y = x.clone();
    let mut tracker = Tracker::new(problem, config)?;
    let mut hit = tracker.observe(0, z.view())?;
    let mut k = 0;

    while !hit && k < config.max_iterations {
        let gamma = two / T::lit((k + 2) as f64);
        let eta = step_at(k);
        let keep = T::one() - gamma;
        Zip::from(&mut y).and(&z).and(&x).for_each(|y, &z, &x| *y = keep * z + gamma * x);
        let mut g = problem.draw(y.view(), streams.iteration(k as u64));
        g.zip_mut_with(&x, |gi, &xi| *gi = xi - eta * *gi);
        ensure_finite(&g, k + 1)?;
        x = problem.prox(g.view(), eta);
        ensure_finite(&x, k + 1)?;
        z.zip_mut_with(&x, |zi, &xi| *zi = keep * *zi + gamma * xi);
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

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use ndarray::{array, Array1, Array2, ArrayView1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    use super::*;
    use crate::noise::{HeavyTailModel, NoisyOracle};
    use crate::problem::{NoiseConstants, Objective};
    use crate::solvers::fixtures::{box_problem, ShiftedQuadratic};

    struct LeastSquares {
        a: Array2<f64>,
        b: Array1<f64>,
    }

    impl Objective<f64> for LeastSquares {
        fn value(&self, x: ArrayView1<f64>) -> f64 {
            let r = self.a.dot(&x) - &self.b;
            0.5 * r.dot(&r)
        }
        fn subgradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
            self.a.t().dot(&(self.a.dot(&x) - &self.b))
        }
    }

    #[test]
    fn first_step_collapses_the_average() {
        let p = box_problem(Arc::new(ShiftedQuadratic(array![0.3, 0.9])), 2, 1.0, 1.0, 0.0, array![-1.0, 1.0]);
        let r = run_spgma(&p, &SolverConfig::constant(SolverKind::Spgma, 0.25, 1, 0)).unwrap();
        assert_eq!(r.output_point, r.final_iterate);
    }

    #[test]
    fn noiseless_least_squares_rate() {
        let n = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let a = Array2::from_shape_simple_fn((n, n), || StandardNormal.sample(&mut rng));
        let unif = Uniform::new(-1.0, 1.0).unwrap();
        let x_true = Array1::from_shape_simple_fn(n, || unif.sample(&mut rng));
        let b = a.dot(&x_true);
        let lf = a.iter().map(|v| v * v).sum::<f64>();
        let p = box_problem(Arc::new(LeastSquares { a, b }), n, 1.0, lf, 0.0, Array1::zeros(n));
        let r = run_spgma(&p, &SolverConfig::constant(SolverKind::Spgma, 1.0 / (4.0 * lf), 1024, 0)).unwrap();
        let ks: Vec<f64> = (5..=10).map(|e| (1u32 << e) as f64).collect();
        let pts: Vec<(f64, f64)> = r
            .gap_history
            .iter()
            .filter(|(k, _)| ks.contains(&(*k as f64)))
            .map(|&(k, v)| ((k as f64).ln(), v.ln()))
            .collect();
        assert_eq!(pts.len(), ks.len());
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope <= -1.7, "slope {slope}");
    }

    #[test]
    fn all_sequences_stay_feasible_and_runs_are_reproducible() {
        let obj: Arc<dyn Objective<f64>> = Arc::new(ShiftedQuadratic(array![4.0, -4.0, 0.5]));
        let oracle = Arc::new(NoisyOracle::new(obj.clone(), HeavyTailModel::new(1.3, 3.0).unwrap()));
        let p = box_problem(obj, 3, 1.0, 1.0, 0.0, Array1::zeros(3))
            .with_oracle(oracle, NoiseConstants::new(1.0, 1.2).unwrap());
        let cfg = SolverConfig::constant(SolverKind::Spgma, 0.01, 200, 8);
        let a = run_spgma(&p, &cfg).unwrap();
        assert_eq!(a.gap_history, run_spgma(&p, &cfg).unwrap().gap_history);
        assert_eq!(a.oracle_calls, 200);
        for k in [1, 2, 3, 10, 57, 200] {
            let r = run_spgma(&p, &SolverConfig::constant(SolverKind::Spgma, 0.01, k, 8)).unwrap();
            assert!(p.contains(r.output_point.view()));
            assert!(p.contains(r.final_iterate.view()));
        }
    }

    #[test]
    fn explicit_sequence_matches_base_rule() {
        let p = box_problem(Arc::new(ShiftedQuadratic(array![0.3, 0.9])), 2, 1.0, 1.0, 0.0, array![-1.0, 1.0]);
        let eta = 0.05;
        let seq: Vec<f64> = (0..30).map(|k| (k + 2) as f64 * eta / 2.0).collect();
        let mut cfg = SolverConfig::constant(SolverKind::Spgma, eta, 30, 0);
        let a = run_spgma(&p, &cfg).unwrap();
        cfg.step = StepRule::Sequence(seq);
        let b = run_spgma(&p, &cfg).unwrap();
        assert_eq!(a.output_point, b.output_point);
    }
}
