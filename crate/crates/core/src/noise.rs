//! Symmetric polynomial-tail noise with density `ω / (2(1 + |t|)^{1+ω})`
//! and the additive oracle `G(x; ξ) = ∇f(x) + ρξ`.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::problem::{NoiseConstants, Objective, StochasticOracle};
use crate::scalar::Scalar;

/// Tail index ω and scale ρ of the coordinate noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailModel {
    pub omega: f64,
    pub rho: f64,
}

impl HeavyTailModel {
    pub fn new(omega: f64, rho: f64) -> Result<Self> {
        if !(omega > 1.0) || !omega.is_finite() {
            return Err(invalid("omega", format!("tail index must exceed 1, got {omega}")));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(invalid("rho", format!("noise scale must be finite and nonnegative, got {rho}")));
        }
        Ok(Self { omega, rho })
    }

    /// `2 / ((ω − 1)(ω − 2))`, infinite for `ω ≤ 2`.
    pub fn variance(&self) -> f64 {
        if self.omega > 2.0 {
            2.0 / ((self.omega - 1.0) * (self.omega - 2.0))
        } else {
            f64::INFINITY
        }
    }
}

/// Inverse CDF evaluated at `u ∈ (0, 1)`.
pub fn heavy_tail_quantile(omega: f64, u: f64) -> f64 {
    let d = u - 0.5;
    let w = 1.0 - 2.0 * d.abs();
    let mag = w.powf(-1.0 / omega) - 1.0;
    if d > 0.0 {
        mag
    } else if d < 0.0 {
        -mag
    } else {
        0.0
    }
}

/// `½ + ½·sign(t)·(1 − (1 + |t|)^{−ω})`.
pub fn heavy_tail_cdf(omega: f64, t: f64) -> f64 {
    let tail = 1.0 - (1.0 + t.abs()).powf(-omega);
    if t >= 0.0 {
        0.5 + 0.5 * tail
    } else {
        0.5 - 0.5 * tail
    }
}

/// `E|ξ|^α = ω·B(α + 1, ω − α)`, finite for `0 ≤ α < ω`.
pub fn heavy_tail_abs_moment(omega: f64, alpha: f64) -> f64 {
    if alpha >= omega {
        return f64::INFINITY;
    }
    omega * statrs::function::beta::beta(alpha + 1.0, omega - alpha)
}

/// One draw by inversion. A uniform exactly at the median is redrawn.
pub fn sample_heavy_tail<R: Rng + ?Sized>(model: &HeavyTailModel, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.sample(Open01);
        if u != 0.5 {
            return heavy_tail_quantile(model.omega, u);
        }
    }
}

/// `n` independent unit-scale draws; `ρ` is applied by the oracle.
pub fn sample_noise_vector<T: Scalar, R: Rng + ?Sized>(model: &HeavyTailModel, n: usize, rng: &mut R) -> Array1<T> {
    Array1::from_shape_simple_fn(n, || T::lit(sample_heavy_tail(model, rng)))
}

/// `G(x; ξ) = ∇f(x) + ρξ` with i.i.d. heavy-tailed coordinates.
pub struct NoisyOracle<T: Scalar> {
    objective: Arc<dyn Objective<T>>,
    model: HeavyTailModel,
}

impl<T: Scalar> NoisyOracle<T> {
    pub fn new(objective: Arc<dyn Objective<T>>, model: HeavyTailModel) -> Self {
        Self { objective, model }
    }

    pub fn model(&self) -> &HeavyTailModel {
        &self.model
    }
}

impl<T: Scalar> StochasticOracle<T> for NoisyOracle<T> {
    fn draw(&self, x: ArrayView1<T>, rng: &mut dyn RngCore) -> Array1<T> {
        let mut g = self.objective.subgradient(x);
        if self.model.rho == 0.0 {
            return g;
        }
        let rho = T::lit(self.model.rho);
        for gi in g.iter_mut() {
            *gi += rho * T::lit(sample_heavy_tail(&self.model, rng));
        }
        g
    }
}

/// Number of pre-draws used by the Monte Carlo moment estimate.
pub const PLUG_IN_DRAWS: usize = 100_000;

/// `(σ, α)` for the step-size formulas of an `n`-dimensional instance.
///
/// `α = min(2, 0.95ω)`. For `ω > 2`, `σ = ρ(n·Var)^{1/2}`, which bounds the
/// α-th moment of `‖ρξ‖` by Jensen. Otherwise `σ` is the plug-in
/// `ρ(mean ‖ξ‖^α)^{1/α}` over [`PLUG_IN_DRAWS`] vectors from `seed`.
pub fn plug_in_noise_constants(model: &HeavyTailModel, n: usize, seed: u64) -> NoiseConstants<f64> {
    let alpha = (0.95 * model.omega).min(2.0);
    if model.rho == 0.0 {
        return NoiseConstants { scale: 0.0, moment_order: alpha };
    }
    let sigma = if model.omega > 2.0 {
        model.rho * (n as f64 * model.variance()).sqrt()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = 0.0;
        for _ in 0..PLUG_IN_DRAWS {
            let sq: f64 = (0..n).map(|_| sample_heavy_tail(model, &mut rng).powi(2)).sum();
            acc += sq.powf(alpha / 2.0);
        }
        model.rho * (acc / PLUG_IN_DRAWS as f64).powf(1.0 / alpha)
    };
    NoiseConstants { scale: sigma, moment_order: alpha }
}

/// Counter-based substreams: one ChaCha key per run, and a fixed window of
/// the keystream per iteration, so draw `k` never depends on how many
/// uniforms iterations `< k` consumed.
#[derive(Debug, Clone)]
pub struct Substreams {
    rng: ChaCha8Rng,
}

/// 32-bit words reserved for each iteration (2^20 words = 4 MiB).
const WORDS_PER_ITERATION: u32 = 20;

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Stream for iteration `k` of the main recursion.
    pub fn iteration(&mut self, k: u64) -> &mut ChaCha8Rng {
        self.rng.set_stream(0);
        self.rng.set_word_pos(u128::from(k) << WORDS_PER_ITERATION);
        &mut self.rng
    }

    /// An auxiliary stream, disjoint from every iteration stream.
    pub fn auxiliary(&mut self, id: u64) -> &mut ChaCha8Rng {
        self.rng.set_stream(id + 1);
        self.rng.set_word_pos(0);
        &mut self.rng
    }
}

/// SplitMix64 finalizer, used to derive independent run seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(omega: f64) -> HeavyTailModel {
        HeavyTailModel::new(omega, 1.0).unwrap()
    }

    // Composite Simpson on the density over [a, b].
    fn integrate_density(omega: f64, a: f64, b: f64, n: usize) -> f64 {
        let p = |t: f64| omega / (2.0 * (1.0 + t.abs()).powf(1.0 + omega));
        let h = (b - a) / n as f64;
        let mut s = p(a) + p(b);
        for i in 1..n {
            s += p(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn median_boundary() {
        assert_eq!(heavy_tail_quantile(2.0, 0.5), 0.0);
        let v = heavy_tail_quantile(2.0, 0.5 + 1e-9);
        assert!(v > 0.0 && v < 1e-8);
    }

    #[test]
    fn quantile_at_seven_eighths() {
        assert_relative_eq!(heavy_tail_quantile(2.0, 0.875), 1.0, epsilon = 1e-15);
        // CDF(1) by quadrature: mass of (−∞, 0] is ½ by symmetry.
        let mass = 0.5 + integrate_density(2.0, 0.0, 1.0, 10_000);
        assert_relative_eq!(mass, 0.875, epsilon = 1e-10);
    }

    #[test]
    fn quantile_matches_numerical_inverse() {
        let q = heavy_tail_quantile(1.5, 0.1);
        assert_relative_eq!(q, -(0.2f64.powf(-2.0 / 3.0) - 1.0), epsilon = 1e-14);
        assert_relative_eq!(q, -1.92402, epsilon = 1e-5);
        // Bisection on the analytic CDF.
        let (mut lo, mut hi) = (-100.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if heavy_tail_cdf(1.5, mid) < 0.1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((q - 0.5 * (lo + hi)).abs() < 1e-6);
    }

    #[test]
    fn cdf_consistent_with_density() {
        for &t in &[-3.0, -0.4, 0.7, 5.0] {
            let mass = if t > 0.0 {
                integrate_density(3.0, 0.0, t, 20_000)
            } else {
                -integrate_density(3.0, t, 0.0, 20_000)
            };
            assert_relative_eq!(heavy_tail_cdf(3.0, t), 0.5 + mass, epsilon = 1e-10);
        }
        assert_eq!(heavy_tail_cdf(3.0, 0.0), 0.5);
    }

    #[test]
    fn analytic_moments() {
        // ω = 3: E ξ² = Var = 1, and E|ξ| = 3 B(2, 2) = 1/2.
        assert_relative_eq!(heavy_tail_abs_moment(3.0, 2.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(heavy_tail_abs_moment(3.0, 1.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(model(3.0).variance(), 1.0);
        assert!(heavy_tail_abs_moment(1.5, 1.6).is_infinite());
    }

    #[test]
    fn determinism() {
        let m = model(1.8);
        let a: Array1<f64> = sample_noise_vector(&m, 3, &mut ChaCha8Rng::seed_from_u64(42));
        let b: Array1<f64> = sample_noise_vector(&m, 3, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        let c: Array1<f64> = sample_noise_vector(&m, 3, &mut ChaCha8Rng::seed_from_u64(43));
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_median_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v: Vec<f64> = (0..100_000).map(|_| sample_heavy_tail(&model(1.2), &mut rng)).collect();
        v.sort_by(f64::total_cmp);
        assert!(v[50_000].abs() <= 0.02);
    }

    #[test]
    fn empirical_variance_omega_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_heavy_tail(&model(3.0), &mut rng);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((var - 1.0).abs() <= 0.05, "variance {var}");
    }

    fn ks_statistic(omega: f64, seed: u64, n: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| sample_heavy_tail(&model(omega), &mut rng)).collect();
        v.sort_by(f64::total_cmp);
        let nf = n as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = heavy_tail_cdf(omega, x);
                (f - i as f64 / nf).abs().max((f - (i + 1) as f64 / nf).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn kolmogorov_smirnov() {
        let crit = 1.95 / (1e5f64).sqrt();
        for &omega in &[1.2, 1.8, 3.0] {
            let fails = (0..20).filter(|&s| ks_statistic(omega, 1000 + s, 100_000) > crit).count();
            assert!(fails <= 1, "ω = {omega}: {fails} KS rejections");
        }
    }

    #[test]
    fn oracle_noise_free_is_exact() {
        struct Lin;
        impl Objective<f64> for Lin {
            fn value(&self, x: ArrayView1<f64>) -> f64 {
                x.sum()
            }
            fn subgradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
                Array1::ones(x.len())
            }
        }
        let o = NoisyOracle::new(Arc::new(Lin), HeavyTailModel::new(1.5, 0.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array1::zeros(4);
        assert_eq!(o.draw(x.view(), &mut rng), Array1::<f64>::ones(4));
    }

    #[test]
    fn oracle_mean_within_clt_band() {
        struct Quad;
        impl Objective<f64> for Quad {
            fn value(&self, x: ArrayView1<f64>) -> f64 {
                0.5 * x.dot(&x)
            }
            fn subgradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
                x.to_owned()
            }
        }
        let o = NoisyOracle::new(Arc::new(Quad), model(3.0));
        let x = ndarray::array![0.5, -2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let mut s = Array1::<f64>::zeros(2);
        let mut s2 = Array1::<f64>::zeros(2);
        for _ in 0..n {
            let g = o.draw(x.view(), &mut rng);
            s += &g;
            s2 += &g.mapv(|v| v * v);
        }
        for i in 0..2 {
            let mean = s[i] / n as f64;
            let std = (s2[i] / n as f64 - mean * mean).sqrt();
            assert!((mean - x[i]).abs() <= 5.0 * std / (n as f64).sqrt());
        }
    }

    fn batch_moments(omega: f64, alpha: f64, batch: usize, batches: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..batches)
            .map(|_| (0..batch).map(|_| sample_heavy_tail(&model(omega), &mut rng).abs().powf(alpha)).sum::<f64>() / batch as f64)
            .collect()
    }

    #[test]
    fn finite_moments_are_stable_and_match_beta_formula() {
        for &(omega, alpha) in &[(3.0, 1.5), (2.0, 1.2), (1.5, 1.2)] {
            let est = batch_moments(omega, alpha, 100_000, 10, 23);
            let lo = est.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = est.iter().cloned().fold(0.0, f64::max);
            let pooled = est.iter().sum::<f64>() / est.len() as f64;
            assert!((hi - lo) / pooled < 0.5, "spread for ({omega}, {alpha})");
            let exact = heavy_tail_abs_moment(omega, alpha);
            assert!((pooled - exact).abs() / exact < 0.1, "({omega}, {alpha}): {pooled} vs {exact}");
        }
    }

    #[test]
    fn infinite_moment_grows_with_batch_size() {
        let median = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[4] + v[5])
        };
        let small = median(batch_moments(1.5, 1.6, 1_000, 10, 31));
        let large = median(batch_moments(1.5, 1.6, 1_000_000, 10, 37));
        assert!(large > small, "median batch moment {small} -> {large}");
    }

    #[test]
    fn plug_in_constants() {
        let c = plug_in_noise_constants(&HeavyTailModel::new(3.0, 2.0).unwrap(), 4, 0);
        assert_eq!(c.moment_order, 2.0);
        assert_relative_eq!(c.scale, 2.0 * 2.0, epsilon = 1e-12);
        let h = plug_in_noise_constants(&HeavyTailModel::new(1.8, 1.0).unwrap(), 3, 0);
        assert_relative_eq!(h.moment_order, 1.71, epsilon = 1e-12);
        assert!(h.scale.is_finite() && h.scale > 0.0);
        assert_eq!(h, plug_in_noise_constants(&HeavyTailModel::new(1.8, 1.0).unwrap(), 3, 0));
        assert_eq!(plug_in_noise_constants(&HeavyTailModel::new(1.8, 0.0).unwrap(), 3, 0).scale, 0.0);
    }

    #[test]
    fn substreams_are_position_addressed() {
        let mut a = Substreams::new(3);
        let first: f64 = a.iteration(5).random();
        let _: Vec<f64> = (0..1000).map(|_| a.iteration(4).random()).collect();
        let again: f64 = a.iteration(5).random();
        assert_eq!(first, again);
        let aux: f64 = a.auxiliary(0).random();
        assert_ne!(aux, first);
    }
}
