//! The two residual-regression families.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{gaussian_matrix, gaussian_vector, oracle_for, plug_in, spectral_norm, Family, GeneratedInstance, InstanceMetadata, InstanceSpec};
use crate::error::{invalid, Result};
use crate::problem::{CompositeProblem, Objective, SmoothnessConstants};
use crate::prox::{domain_diameter_ball, BallProx, BoxL1Prox, domain_diameter_box};

/// Power-iteration budget for `‖A‖₂`.
const POWER_ITERATIONS: usize = 200;
const POWER_RTOL: f64 = 1e-10;

/// `f(x) = ½‖r‖² + (1/p)‖r‖_p^p + μ‖r‖₁` with `r = Ax − b`.
///
/// The subgradient is `Aᵀ(r + sign(r)|r|^{p−1} + μ sign(r))` with
/// `sign(0) = 0`.
pub struct ResidualObjective {
    a: Arc<Array2<f64>>,
    b: Array1<f64>,
    p: f64,
    l1_weight: f64,
}

impl ResidualObjective {
    pub fn new(a: Arc<Array2<f64>>, b: Array1<f64>, p: f64, l1_weight: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(invalid("b", "length must match the rows of A"));
        }
        Ok(Self { a, b, p, l1_weight })
    }

    pub fn residual(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.a.dot(&x) - &self.b
    }

    /// Gradient of the `(1/p)‖r‖_p^p` term alone.
    pub fn p_term_gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let e = self.p - 1.0;
        let phi = self.residual(x).mapv(|r| sign(r) * pow_abs(r.abs(), e));
        transpose_times(&self.a, &phi)
    }
}

/// `a^e` for `a ≥ 0`, through `sqrt` for the default `p = 1.5`.
fn pow_abs(a: f64, e: f64) -> f64 {
    if e == 0.5 {
        a.sqrt()
    } else if e == 1.5 {
        a * a.sqrt()
    } else {
        a.powf(e)
    }
}

/// `Aᵀw` as a sum of rows, which stays on contiguous memory.
fn transpose_times(a: &Array2<f64>, w: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(a.ncols());
    for (&wi, row) in w.iter().zip(a.rows()) {
        out.scaled_add(wi, &row);
    }
    out
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Objective<f64> for ResidualObjective {
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let r = self.residual(x);
        let (mut sq, mut pp, mut l1) = (0.0, 0.0, 0.0);
        for &ri in r.iter() {
            let a = ri.abs();
            sq += ri * ri;
            pp += pow_abs(a, self.p);
            l1 += a;
        }
        0.5 * sq + pp / self.p + if self.l1_weight > 0.0 { self.l1_weight * l1 } else { 0.0 }
    }

    fn subgradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let e = self.p - 1.0;
        let mu = self.l1_weight;
        let w = self.residual(x).mapv(|r| {
            let s = sign(r);
            r + s * pow_abs(r.abs(), e) + mu * s
        });
        transpose_times(&self.a, &w)
    }

    fn is_differentiable(&self) -> bool {
        self.l1_weight == 0.0
    }
}

/// `L_f`, `H_f`, `M_f` for the residual objective given `‖A‖₂`.
///
/// `t ↦ sign(t)|t|^{p−1}` is `(p−1)`-Hölder with constant `2^{2−p}`; summing
/// over coordinates and composing with `A` gives
/// `H_f = 2^{2−p} ‖A‖^p n^{(2−p)/2}`. The `ℓ1` residual term moves the
/// subgradient by at most `μ‖A‖·‖s − s'‖ ≤ 2μ‖A‖√n`.
pub(super) fn residual_constants(norm_a: f64, n: usize, p: f64, l1_weight: f64) -> Result<SmoothnessConstants<f64>> {
    let nf = n as f64;
    SmoothnessConstants::new(
        norm_a * norm_a,
        2f64.powf(2.0 - p) * norm_a.powf(p) * nf.powf((2.0 - p) / 2.0),
        p - 1.0,
        2.0 * l1_weight * norm_a * nf.sqrt(),
    )
}

/// Box family: `A` standard normal, `x*` normal with a random half zeroed,
/// `b = Ax*`. `F*` is not known in closed form.
pub fn generate_box_l1(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    if spec.family != Family::BoxL1Regression {
        return Err(invalid("family", "expected the box family"));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = gaussian_matrix(n, &mut rng);
    let mut x_star = gaussian_vector(n, &mut rng);
    for i in index::sample(&mut rng, n, n / 2) {
        x_star[i] = 0.0;
    }
    let b = a.dot(&x_star);
    let norm = spectral_norm(&a, POWER_ITERATIONS, POWER_RTOL, spec.seed);
    let metadata = InstanceMetadata {
        spectral_norm: Some(norm),
        smoothness: residual_constants(norm, n, spec.p, 0.0)?,
        noise: plug_in(spec),
        diameter: domain_diameter_box(
            Array1::from_elem(n, -spec.bound).view(),
            Array1::from_elem(n, spec.bound).view(),
        ),
    };
    build_box_l1(spec.clone(), Arc::new(a), b, x_star, metadata)
}

pub(super) fn build_box_l1(
    spec: InstanceSpec,
    a: Arc<Array2<f64>>,
    b: Array1<f64>,
    x_star: Array1<f64>,
    metadata: InstanceMetadata,
) -> Result<GeneratedInstance> {
    let n = spec.n;
    let objective: Arc<dyn Objective<f64>> = Arc::new(ResidualObjective::new(a.clone(), b.clone(), spec.p, 0.0)?);
    let problem = CompositeProblem::new(
        objective.clone(),
        Arc::new(BoxL1Prox::uniform(n, -spec.bound, spec.bound, spec.lambda)?),
        oracle_for(&objective, &spec),
        metadata.smoothness,
        metadata.noise,
        Array1::zeros(n),
    )?;
    Ok(GeneratedInstance {
        spec,
        a: Some(a),
        b: Some(b),
        x_star,
        problem,
        f_star_reference: None,
        metadata,
    })
}

/// Ball family: `A` and `x*` standard normal (redrawn while `‖x*‖` exceeds
/// the radius), `b = Ax*`, hence `F* = 0` at `x*`.
pub fn generate_ball_residual(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    if spec.family != Family::BallResidualRegression {
        return Err(invalid("family", "expected the ball family"));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = gaussian_matrix(n, &mut rng);
    let x_star = loop {
        let x = gaussian_vector(n, &mut rng);
        if x.dot(&x).sqrt() <= spec.bound {
            break x;
        }
    };
    let b = a.dot(&x_star);
    let norm = spectral_norm(&a, POWER_ITERATIONS, POWER_RTOL, spec.seed);
    let metadata = InstanceMetadata {
        spectral_norm: Some(norm),
        smoothness: residual_constants(norm, n, spec.p, spec.lambda)?,
        noise: plug_in(spec),
        diameter: domain_diameter_ball(spec.bound),
    };
    build_ball_residual(spec.clone(), Arc::new(a), b, x_star, metadata)
}

pub(super) fn build_ball_residual(
    spec: InstanceSpec,
    a: Arc<Array2<f64>>,
    b: Array1<f64>,
    x_star: Array1<f64>,
    metadata: InstanceMetadata,
) -> Result<GeneratedInstance> {
    let n = spec.n;
    let objective: Arc<dyn Objective<f64>> =
        Arc::new(ResidualObjective::new(a.clone(), b.clone(), spec.p, spec.lambda)?);
    let problem = CompositeProblem::new(
        objective.clone(),
        Arc::new(BallProx::new(spec.bound, n)?),
        oracle_for(&objective, &spec),
        metadata.smoothness,
        metadata.noise,
        Array1::zeros(n),
    )?
    .with_reference(0.0, Some(x_star.clone()));
    Ok(GeneratedInstance {
        spec,
        a: Some(a),
        b: Some(b),
        x_star,
        problem,
        f_star_reference: Some(0.0),
        metadata,
    })
}
