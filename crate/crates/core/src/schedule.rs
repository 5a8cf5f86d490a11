//! Step sizes and iteration bounds for the two methods.
//!
//! Everything here is closed-form arithmetic on the problem constants:
//! the inexact Lipschitz constant `L(ε)`, the noise terms `Λ(ε)²` and
//! `Λ̃(δ, ε)²`, the steps `η` / `η̃`, and the iteration bounds K1 to K4.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::{NoiseConstants, SmoothnessConstants};
use crate::scalar::Scalar;
use crate::verify::CheckReport;

/// The constants a schedule depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProblemConstants<T: Scalar> {
    pub smoothness: SmoothnessConstants<T>,
    pub noise: NoiseConstants<T>,
    /// Domain diameter `D_h`.
    pub diameter: T,
}

impl<T: Scalar> ProblemConstants<T> {
    pub fn new(smoothness: SmoothnessConstants<T>, noise: NoiseConstants<T>, diameter: T) -> Result<Self> {
        smoothness.validate()?;
        noise.validate()?;
        if !(diameter > T::zero()) || !diameter.is_finite() {
            return Err(invalid("diameter", format!("must be positive and finite, got {diameter}")));
        }
        Ok(Self { smoothness, noise, diameter })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Spgm,
    Spgma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Expectation,
    HighProbability,
}

/// Which iteration bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// SPGM, expectation (K1).
    T21i,
    /// SPGM, high probability (K2).
    T21ii,
    /// SPGM-A, expectation (K3).
    T31i,
    /// SPGM-A, high probability (K4).
    T31ii,
}

impl Theorem {
    pub fn for_run(algorithm: Algorithm, mode: Mode) -> Self {
        match (algorithm, mode) {
            (Algorithm::Spgm, Mode::Expectation) => Theorem::T21i,
            (Algorithm::Spgm, Mode::HighProbability) => Theorem::T21ii,
            (Algorithm::Spgma, Mode::Expectation) => Theorem::T31i,
            (Algorithm::Spgma, Mode::HighProbability) => Theorem::T31ii,
        }
    }
}

/// `L(ε) = H^{2/(1+ν)} (4/ε)^{(1−ν)/(1+ν)}`.
pub fn inexact_lipschitz<T: Scalar>(holder_constant: T, nu: T, eps: T) -> T {
    if holder_constant == T::zero() {
        return T::zero();
    }
    let one = T::one();
    let two = T::lit(2.0);
    holder_constant.powf(two / (one + nu)) * (T::lit(4.0) / eps).powf((one - nu) / (one + nu))
}

/// `Λ(ε)² = 8(α−1)² (σ/α)^{α/(α−1)} (8D/ε)^{(2−α)/(α−1)}`.
pub fn lambda_sq<T: Scalar>(noise: &NoiseConstants<T>, diameter: T, eps: T) -> T {
    let sigma = noise.scale;
    if sigma == T::zero() {
        return T::zero();
    }
    let a = noise.moment_order;
    let one = T::one();
    let am1 = a - one;
    T::lit(8.0)
        * am1
        * am1
        * (sigma / a).powf(a / am1)
        * (T::lit(8.0) * diameter / eps).powf((T::lit(2.0) - a) / am1)
}

/// `Λ̃(δ, ε)² = (1 + ln(2/δ))^{1/(α−1)} Λ(ε)²`.
pub fn lambda_tilde_sq<T: Scalar>(noise: &NoiseConstants<T>, diameter: T, eps: T, delta: T) -> T {
    let am1 = noise.moment_order - T::one();
    (T::one() + (T::lit(2.0) / delta).ln()).powf(T::one() / am1) * lambda_sq(noise, diameter, eps)
}

/// Expectation-mode and (when `δ` is given) high-probability-mode steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepPair<T: Scalar> {
    pub eta: T,
    pub eta_tilde: Option<T>,
}

fn check_eps<T: Scalar>(eps: T) -> Result<()> {
    if eps > T::zero() && eps.is_finite() {
        Ok(())
    } else {
        Err(invalid("eps", format!("must be positive, got {eps}")))
    }
}

fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if delta > T::zero() && delta < T::one() {
        Ok(())
    } else {
        Err(invalid("delta", format!("must lie in (0, 1), got {delta}")))
    }
}

fn min_branch<T: Scalar>(cap: T, noise_branch: T) -> Result<T> {
    let eta = cap.min(noise_branch);
    if eta.is_finite() && eta > T::zero() {
        Ok(eta)
    } else {
        Err(Error::Config(
            "step size undefined: the smoothness branch and the noise branch are both unbounded".into(),
        ))
    }
}

/// `1/(4(L_f + L))`, or `+∞` when the denominator vanishes.
fn smoothness_cap<T: Scalar>(lf: T, l_eps: T) -> T {
    let s = lf + l_eps;
    if s > T::zero() {
        T::one() / (T::lit(4.0) * s)
    } else {
        T::infinity()
    }
}

fn ratio_or_inf<T: Scalar>(num: T, den: T) -> T {
    if den > T::zero() {
        num / den
    } else {
        T::infinity()
    }
}

fn check_budget(k: u64) -> Result<()> {
    if k >= 1 {
        Ok(())
    } else {
        Err(invalid("K", "iteration budget must be at least 1"))
    }
}

/// Constant SPGM steps for a planned budget `k`.
///
/// `η = min{1/(4(L_f + L(ε))), D / [2K(M_f² + Λ(ε)²)]^{1/2}}`, and `η̃` uses
/// `Λ̃(δ, ε)` in place of `Λ(ε)`.
pub fn spgm_step<T: Scalar>(c: &ProblemConstants<T>, k: u64, eps: T, delta: Option<T>) -> Result<StepPair<T>> {
    check_budget(k)?;
    check_eps(eps)?;
    let s = &c.smoothness;
    let cap = smoothness_cap(s.grad_lipschitz, inexact_lipschitz(s.holder_constant, s.holder_exponent, eps));
    let kk = T::from_u64(k).unwrap_or_else(T::max_value);
    let branch = |lam2: T| {
        let den = (T::lit(2.0) * kk * (s.subgrad_bound * s.subgrad_bound + lam2)).sqrt();
        ratio_or_inf(c.diameter, den)
    };
    let eta = min_branch(cap, branch(lambda_sq(&c.noise, c.diameter, eps)))?;
    let eta_tilde = match delta {
        Some(d) => {
            check_delta(d)?;
            Some(min_branch(cap, branch(lambda_tilde_sq(&c.noise, c.diameter, eps, d)))?)
        }
        None => None,
    };
    Ok(StepPair { eta, eta_tilde })
}

/// Base SPGM-A steps; iteration `k` uses `(k + 2)η/2`.
///
/// The smoothness branch evaluates `L` at `ε/K`.
pub fn spgma_steps<T: Scalar>(c: &ProblemConstants<T>, k: u64, eps: T, delta: Option<T>) -> Result<StepPair<T>> {
    check_budget(k)?;
    check_eps(eps)?;
    let s = &c.smoothness;
    let kk = T::from_u64(k).unwrap_or_else(T::max_value);
    let cap = smoothness_cap(s.grad_lipschitz, inexact_lipschitz(s.holder_constant, s.holder_exponent, eps / kk));
    let m2 = s.subgrad_bound * s.subgrad_bound;
    let two = T::lit(2.0);
    let eta_branch = {
        let den = (m2 + lambda_sq(&c.noise, c.diameter, eps)) * (two * kk + T::lit(3.0)) * (kk + two) * kk;
        ratio_or_inf(T::lit(6.0), den).sqrt() * c.diameter
    };
    let eta = min_branch(cap, eta_branch)?;
    let eta_tilde = match delta {
        Some(d) => {
            check_delta(d)?;
            let den = (m2 + lambda_tilde_sq(&c.noise, c.diameter, eps, d)) * (kk + two) * (kk + two) * kk;
            Some(min_branch(cap, ratio_or_inf(two, den).sqrt() * c.diameter)?)
        }
        None => None,
    };
    Ok(StepPair { eta, eta_tilde })
}

/// Real-valued right-hand side of the chosen iteration bound.
///
/// Unlike [`k_bound`] this accepts any `ε > 0`, which the budget inversion in
/// [`epsilon_for_budget`] needs.
pub fn k_bound_real<T: Scalar>(theorem: Theorem, c: &ProblemConstants<T>, eps: T, delta: T) -> T {
    let s = &c.smoothness;
    let d = c.diameter;
    let d2 = d * d;
    let one = T::one();
    let two = T::lit(2.0);
    let nu = s.holder_exponent;
    let l_eps = inexact_lipschitz(s.holder_constant, nu, eps);
    let alpha = c.noise.moment_order;
    let am1 = alpha - one;
    let indicator = if alpha < two { one } else { T::zero() };
    let log_term = |scale: T| {
        ((scale * alpha * d * c.noise.scale / eps).powf(alpha / am1) + indicator) * (two / delta).ln() / am1
    };
    let holder_exp = (one + nu) / (one + T::lit(3.0) * nu);
    let terms: Vec<T> = match theorem {
        Theorem::T21i => {
            let lam = lambda_sq(&c.noise, d, eps).sqrt();
            vec![
                T::lit(8.0) * d2 * (s.grad_lipschitz + l_eps) / eps,
                T::lit(8.0) * d2 * (s.subgrad_bound + lam).powi(2) / (eps * eps),
                one,
            ]
        }
        Theorem::T21ii => {
            let lam = lambda_tilde_sq(&c.noise, d, eps, delta).sqrt();
            vec![
                T::lit(8.0) * d2 * (s.grad_lipschitz + l_eps) / eps,
                T::lit(32.0) * d2 * (s.subgrad_bound + lam).powi(2) / (eps * eps),
                log_term(T::lit(4.0)),
                one,
            ]
        }
        Theorem::T31i => {
            let lam = lambda_sq(&c.noise, d, eps).sqrt();
            vec![
                (T::lit(48.0) * d2 * s.grad_lipschitz / eps).sqrt(),
                (T::lit(48.0) * d2 * l_eps / eps).powf(holder_exp),
                (T::lit(24.0) * d).powi(2) * (s.subgrad_bound + lam).powi(2) / (T::lit(3.0) * eps * eps),
                two,
            ]
        }
        Theorem::T31ii => {
            let lam = lambda_tilde_sq(&c.noise, d, eps, delta).sqrt();
            vec![
                (T::lit(64.0) * d2 * s.grad_lipschitz / eps).sqrt(),
                (T::lit(64.0) * d2 * l_eps / eps).powf(holder_exp),
                two * (T::lit(16.0) * d).powi(2) * (s.subgrad_bound + lam).powi(2) / (eps * eps),
                log_term(T::lit(16.0)),
                two,
            ]
        }
    };
    terms.into_iter().fold(T::zero(), T::max)
}

/// Smallest integer `K` satisfying the chosen theorem's bound.
///
/// `δ` is ignored by the expectation bounds.
pub fn k_bound<T: Scalar>(theorem: Theorem, c: &ProblemConstants<T>, eps: T, delta: T) -> Result<u64> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    check_delta(delta)?;
    let k = k_bound_real(theorem, c, eps, delta).ceil();
    k.to_u64()
        .ok_or_else(|| Error::Config(format!("iteration bound {k} does not fit in 64 bits")))
}

/// The smallest `ε` whose bound fits in `budget` iterations, found by
/// bisection on `log ε`. Used to run the theory steps at a fixed budget.
pub fn epsilon_for_budget<T: Scalar>(theorem: Theorem, c: &ProblemConstants<T>, budget: u64, delta: T) -> T {
    let target = T::from_u64(budget).unwrap_or_else(T::max_value);
    let fits = |e: T| k_bound_real(theorem, c, e, delta) <= target;
    let (mut lo, mut hi) = (T::lit(-60.0), T::lit(60.0));
    if fits(lo.exp()) {
        return lo.exp();
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if fits(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.exp()
}

/// All derived quantities for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SchedulePlan<T: Scalar> {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub epsilon: T,
    pub delta: T,
    /// Planned iteration budget.
    pub k: u64,
    /// `L(ε)` for SPGM, `L(ε/K)` for SPGM-A.
    pub l_eps: T,
    pub lambda_sq: T,
    pub lambda_tilde_sq: T,
    pub eta: T,
    pub eta_tilde: T,
    /// K1..K4 at `(ε, δ)`; `None` when `ε ≥ 1`, outside the theorems' range.
    pub k_bounds: Option<[u64; 4]>,
}

impl<T: Scalar> SchedulePlan<T> {
    /// Steps for a caller-chosen budget `k`.
    pub fn with_budget(
        algorithm: Algorithm,
        mode: Mode,
        c: &ProblemConstants<T>,
        eps: T,
        delta: T,
        k: u64,
    ) -> Result<Self> {
        check_delta(delta)?;
        let steps = match algorithm {
            Algorithm::Spgm => spgm_step(c, k, eps, Some(delta))?,
            Algorithm::Spgma => spgma_steps(c, k, eps, Some(delta))?,
        };
        let s = &c.smoothness;
        let l_at = match algorithm {
            Algorithm::Spgm => eps,
            Algorithm::Spgma => eps / T::from_u64(k).unwrap_or_else(T::max_value),
        };
        let k_bounds = if eps < T::one() {
            let all = [Theorem::T21i, Theorem::T21ii, Theorem::T31i, Theorem::T31ii];
            let mut out = [0u64; 4];
            for (o, th) in out.iter_mut().zip(all) {
                *o = k_bound(th, c, eps, delta)?;
            }
            Some(out)
        } else {
            None
        };
        Ok(Self {
            algorithm,
            mode,
            epsilon: eps,
            delta,
            k,
            l_eps: inexact_lipschitz(s.holder_constant, s.holder_exponent, l_at),
            lambda_sq: lambda_sq(&c.noise, c.diameter, eps),
            lambda_tilde_sq: lambda_tilde_sq(&c.noise, c.diameter, eps, delta),
            eta: steps.eta,
            eta_tilde: steps.eta_tilde.expect("delta supplied"),
            k_bounds,
        })
    }

    /// Theory mode: `K` is the theorem's bound at `(ε, δ)` and the steps are
    /// recomputed for that `K`.
    pub fn theory(algorithm: Algorithm, mode: Mode, c: &ProblemConstants<T>, eps: T, delta: T) -> Result<Self> {
        let k = k_bound(Theorem::for_run(algorithm, mode), c, eps, delta)?;
        Self::with_budget(algorithm, mode, c, eps, delta, k)
    }

    /// The step the chosen mode prescribes.
    pub fn step(&self) -> T {
        match self.mode {
            Mode::Expectation => self.eta,
            Mode::HighProbability => self.eta_tilde,
        }
    }
}

/// Slack of `c σ^α η^{α−1} ≤ (α−1) c^{1/(α−1)} (8/ε)^{(2−α)/(α−1)} σ^{α/(α−1)} η + ε/8`
/// (right minus left; nonnegative when the inequality holds).
pub fn young_margin(c: f64, sigma: f64, eta: f64, eps: f64, alpha: f64) -> f64 {
    let am1 = alpha - 1.0;
    let lhs = c * sigma.powf(alpha) * eta.powf(am1);
    let rhs = am1 * c.powf(1.0 / am1) * (8.0 / eps).powf((2.0 - alpha) / am1) * sigma.powf(alpha / am1) * eta + eps / 8.0;
    rhs - lhs
}

/// Minimizer of `a/t + bt` over `(0, c]`: `min{c, (a/b)^{1/2}}`.
pub fn quad_min_point(a: f64, b: f64, c: f64) -> f64 {
    c.min((a / b).sqrt())
}

/// The closed-form upper bound `a/c + 2(ab)^{1/2}` on that minimum.
pub fn quad_min_bound(a: f64, b: f64, c: f64) -> f64 {
    a / c + 2.0 * (a * b).sqrt()
}

fn unit_open_closed(rng: &mut rand_chacha::ChaCha8Rng, hi: f64) -> f64 {
    use rand::Rng;
    hi * (1.0 - rng.random::<f64>())
}

/// Young-type inequality on `tuples` random `(c, σ, η, ε) ∈ (0, 10]⁴` for
/// each α; a violation is `lhs − rhs > 1e-12`.
pub fn check_young_inequality(tuples: usize, alphas: &[f64], seed: u64) -> Result<CheckReport> {
    use rand::SeedableRng;
    if let Some(a) = alphas.iter().find(|a| !(**a > 1.0 && **a <= 2.0)) {
        return Err(invalid("alpha", format!("must lie in (1, 2], got {a}")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut violations, mut worst) = (0, f64::NEG_INFINITY);
    for _ in 0..tuples {
        let [c, sigma, eta, eps] = std::array::from_fn(|_| unit_open_closed(&mut rng, 10.0));
        for &alpha in alphas {
            let margin = -young_margin(c, sigma, eta, eps, alpha);
            worst = worst.max(margin);
            if margin > 1e-12 {
                violations += 1;
            }
        }
    }
    Ok(CheckReport::new("young_inequality", (tuples * alphas.len()) as u64, violations, worst))
}

/// Decades below `c` covered by the log grid of [`check_quad_min`].
const QUAD_GRID_DECADES: f64 = 12.0;

/// Closed-form minimum of `a/t + bt` on `(0, c]` against an exhaustive
/// `grid_points`-point log grid on `[c·10⁻¹², c]`, for random
/// `(a, b, c) ∈ (0, 10]³`. A tuple violates when the two minima differ by
/// more than `1e-6`, or when the minimum exceeds `a/c + 2(ab)^{1/2}`.
pub fn check_quad_min(tuples: usize, grid_points: usize, seed: u64) -> Result<CheckReport> {
    use rand::SeedableRng;
    use rayon::prelude::*;
    if grid_points < 2 {
        return Err(invalid("grid_points", "need at least two grid points"));
    }
    let last = (grid_points - 1) as f64;
    let u: Vec<f64> = (0..grid_points)
        .map(|j| if j + 1 == grid_points { 1.0 } else { 10f64.powf(-QUAD_GRID_DECADES * (1.0 - j as f64 / last)) })
        .collect();
    let w: Vec<f64> = u.iter().map(|x| 1.0 / x).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let abc: Vec<[f64; 3]> = (0..tuples).map(|_| std::array::from_fn(|_| unit_open_closed(&mut rng, 10.0))).collect();
    let margins: Vec<f64> = abc
        .par_iter()
        .map(|&[a, b, c]| {
            let t = quad_min_point(a, b, c);
            let exact = a / t + b * t;
            let grid = grid_min(a / c, b * c, &w, &u);
            let bound_gap = exact - quad_min_bound(a, b, c);
            ((grid - exact).abs() - 1e-6).max(bound_gap - 1e-12 * exact)
        })
        .collect();
    let violations = margins.iter().filter(|m| **m > 0.0).count() as u64;
    let worst = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckReport::new("quadratic_min", tuples as u64, violations, worst))
}

/// `min_j (p·w_j + q·u_j)`, written for vectorization.
fn grid_min(p: f64, q: f64, w: &[f64], u: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [f64::INFINITY; LANES];
    let (wc, uc) = (w.chunks_exact(LANES), u.chunks_exact(LANES));
    let (wr, ur) = (wc.remainder(), uc.remainder());
    for (wv, uv) in wc.zip(uc) {
        for k in 0..LANES {
            let v = p * wv[k] + q * uv[k];
            acc[k] = if v < acc[k] { v } else { acc[k] };
        }
    }
    let mut m = acc.iter().copied().fold(f64::INFINITY, f64::min);
    for (x, y) in wr.iter().zip(ur) {
        m = m.min(p * x + q * y);
    }
    m
}
