//! Exact proximal maps for the regularizers used by the experiment problems.

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::Regularizer;
use crate::scalar::Scalar;

/// `sign(t) · max(|t| − τ, 0)`, with `sign(0) = 0`.
#[inline]
pub fn soft_threshold<T: Scalar>(t: T, tau: T) -> T {
    if t > tau {
        t - tau
    } else if t < -tau {
        t + tau
    } else {
        T::zero()
    }
}

/// `h(x) = λ‖x‖₁ + I_[l,u](x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoxL1Prox<T: Scalar> {
    lower: Array1<T>,
    upper: Array1<T>,
    weight: T,
}

impl<T: Scalar> BoxL1Prox<T> {
    pub fn new(lower: Array1<T>, upper: Array1<T>, weight: T) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("upper", "bounds must have equal length"));
        }
        if Zip::from(&lower).and(&upper).any(|&l, &u| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(invalid("lower", "need finite bounds with lower <= upper componentwise"));
        }
        if !(weight >= T::zero()) {
            return Err(invalid("weight", format!("must be nonnegative, got {weight}")));
        }
        Ok(Self { lower, upper, weight })
    }

    /// Box `[lo, hi]^n` with ℓ1 weight `weight`.
    pub fn uniform(n: usize, lo: T, hi: T, weight: T) -> Result<Self> {
        Self::new(Array1::from_elem(n, lo), Array1::from_elem(n, hi), weight)
    }

    pub fn lower(&self) -> &Array1<T> {
        &self.lower
    }

    pub fn upper(&self) -> &Array1<T> {
        &self.upper
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    fn apply(&self, v: ArrayView1<T>, eta: T) -> Array1<T> {
        let tau = eta * self.weight;
        let mut w = Array1::zeros(v.len());
        Zip::from(&mut w)
            .and(&v)
            .and(&self.lower)
            .and(&self.upper)
            .for_each(|w, &v, &l, &u| *w = soft_threshold(v, tau).max(l).min(u));
        w
    }
}

/// Componentwise soft-threshold by `eta·λ`, then clamp to `[l, u]`.
///
/// Each coordinate problem is one-dimensional and convex, so clamping the
/// unconstrained minimizer gives the constrained one.
pub fn prox_box_l1<T: Scalar>(p: &BoxL1Prox<T>, v: ArrayView1<T>, eta: T) -> Result<Array1<T>> {
    check_step(eta)?;
    check_input(v, p.lower.len())?;
    Ok(p.apply(v, eta))
}

impl<T: Scalar> Regularizer<T> for BoxL1Prox<T> {
    fn value(&self, x: ArrayView1<T>) -> T {
        if self.weight == T::zero() {
            return T::zero();
        }
        self.weight * x.fold(T::zero(), |acc, &xi| acc + xi.abs())
    }

    fn prox(&self, v: ArrayView1<T>, step: T) -> Array1<T> {
        self.apply(v, step)
    }

    fn contains(&self, x: ArrayView1<T>) -> bool {
        if x.len() != self.lower.len() {
            return false;
        }
        let rel = T::epsilon() * T::lit(4.0);
        Zip::from(&x).and(&self.lower).and(&self.upper).all(|&xi, &l, &u| {
            let slack = rel * l.abs().max(u.abs()).max(T::one());
            xi >= l - slack && xi <= u + slack
        })
    }

    fn diameter(&self) -> T {
        domain_diameter_box(self.lower.view(), self.upper.view())
    }
}

/// `h(x) = I_{‖x‖ ≤ r}(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BallProx<T: Scalar> {
    radius: T,
    dimension: usize,
}

impl<T: Scalar> BallProx<T> {
    pub fn new(radius: T, dimension: usize) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(invalid("radius", format!("must be positive and finite, got {radius}")));
        }
        Ok(Self { radius, dimension })
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    fn apply(&self, v: ArrayView1<T>) -> Array1<T> {
        let norm = v.dot(&v).sqrt();
        if norm <= self.radius {
            v.to_owned()
        } else {
            let s = self.radius / norm;
            v.mapv(|vi| vi * s)
        }
    }
}

/// Euclidean projection onto the ball; the step is irrelevant for a pure
/// indicator.
pub fn prox_ball<T: Scalar>(p: &BallProx<T>, v: ArrayView1<T>, eta: T) -> Result<Array1<T>> {
    check_step(eta)?;
    check_input(v, p.dimension)?;
    Ok(p.apply(v))
}

impl<T: Scalar> Regularizer<T> for BallProx<T> {
    fn value(&self, _x: ArrayView1<T>) -> T {
        T::zero()
    }

    fn prox(&self, v: ArrayView1<T>, _step: T) -> Array1<T> {
        self.apply(v)
    }

    fn contains(&self, x: ArrayView1<T>) -> bool {
        let n = T::from_usize(x.len().max(1)).unwrap_or_else(T::one);
        let slack = T::epsilon() * T::lit(8.0) * n.sqrt();
        x.len() == self.dimension && x.dot(&x).sqrt() <= self.radius * (T::one() + slack)
    }

    fn diameter(&self) -> T {
        domain_diameter_ball(self.radius)
    }
}

/// `‖u − l‖₂`.
pub fn domain_diameter_box<T: Scalar>(lower: ArrayView1<T>, upper: ArrayView1<T>) -> T {
    Zip::from(&lower)
        .and(&upper)
        .fold(T::zero(), |acc, &l, &u| acc + (u - l) * (u - l))
        .sqrt()
}

pub fn domain_diameter_ball<T: Scalar>(radius: T) -> T {
    T::lit(2.0) * radius
}

fn check_step<T: Scalar>(eta: T) -> Result<()> {
    if eta > T::zero() && eta.is_finite() {
        Ok(())
    } else {
        Err(invalid("eta", format!("step must be positive and finite, got {eta}")))
    }
}

fn check_input<T: Scalar>(v: ArrayView1<T>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(invalid("v", format!("expected length {n}, got {}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            term: "prox input",
            detail: format!("coordinate {i} is {}", v[i]),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_inactive_box() {
        let p = BoxL1Prox::uniform(2, -100.0, 100.0, 1.0).unwrap();
        let w = prox_box_l1(&p, array![3.0, -0.5].view(), 1.0).unwrap();
        assert_eq!(w, array![2.0, 0.0]);
    }

    #[test]
    fn clamp_dominates() {
        let p = BoxL1Prox::uniform(2, 0.0, 1.0, 1.0).unwrap();
        let w = prox_box_l1(&p, array![5.0, -5.0].view(), 1.0).unwrap();
        assert_eq!(w, array![1.0, 0.0]);
    }

    // Grid minimization of λ|z| + (z − v)²/(2η) over [−1, 1] at spacing 1e−6.
    fn grid_coordinate_min(v: f64, lambda: f64, eta: f64) -> f64 {
        let steps = 2_000_000;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let z = -1.0 + 2.0 * k as f64 / steps as f64;
            let obj = lambda * z.abs() + (z - v) * (z - v) / (2.0 * eta);
            if obj < best.0 {
                best = (obj, z);
            }
        }
        best.1
    }

    #[test]
    fn matches_coordinate_grid_oracle() {
        let p = BoxL1Prox::uniform(3, -1.0, 1.0, 0.7).unwrap();
        let v = array![2.0, -1.2, 0.3];
        let w = prox_box_l1(&p, v.view(), 2.0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(w[i], grid_coordinate_min(v[i], 0.7, 2.0), epsilon = 1e-5);
        }
    }

    #[test]
    fn ball_interior_unchanged() {
        let b = BallProx::new(100.0, 2).unwrap();
        let v = array![30.0, 40.0];
        assert_eq!(prox_ball(&b, v.view(), 1.0).unwrap(), v);
    }

    #[test]
    fn ball_scaling() {
        let b = BallProx::new(1.0, 2).unwrap();
        let w = prox_ball(&b, array![3.0, 4.0].view(), 0.3).unwrap();
        assert_abs_diff_eq!(w[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn ball_projection_agrees_with_projected_gradient() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let mut v: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let nv = v.dot(&v).sqrt();
        v.mapv_inplace(|x| x * 10.0 / nv);
        let b = BallProx::new(2.5, n).unwrap();
        let w = prox_ball(&b, v.view(), 1.0).unwrap();

        // Projected gradient on ½‖z − v‖², step 1/2 so iterates stay interior-biased.
        let mut z = Array1::<f64>::zeros(n);
        for _ in 0..200 {
            let g = &z - &v;
            let cand = &z - &(g * 0.5);
            let nc = cand.dot(&cand).sqrt();
            z = if nc > 2.5 { cand * (2.5 / nc) } else { cand };
        }
        for i in 0..n {
            assert_abs_diff_eq!(w[i], z[i], epsilon = 1e-8);
        }
        assert_abs_diff_eq!(w.dot(&w).sqrt(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn diameters() {
        let l = Array1::from_elem(500, -100.0);
        let u = Array1::from_elem(500, 100.0);
        assert_abs_diff_eq!(domain_diameter_box(l.view(), u.view()), 200.0 * 500f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(domain_diameter_box(l.view(), u.view()), 4472.1360, epsilon = 1e-4);
        assert_eq!(domain_diameter_box(l.view(), l.view()), 0.0);
        assert_eq!(domain_diameter_box(array![0.0, 0.0].view(), array![3.0, 4.0].view()), 5.0);
        assert_eq!(domain_diameter_ball(100.0), 200.0);
        assert_eq!(domain_diameter_ball(1.0), 2.0);
        assert_eq!(domain_diameter_ball(0.5), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = BoxL1Prox::uniform(2, -1.0, 1.0, 1.0).unwrap();
        assert!(prox_box_l1(&p, array![f64::NAN, 0.0].view(), 1.0).is_err());
        assert!(prox_box_l1(&p, array![0.0, 0.0].view(), 0.0).is_err());
        assert!(BoxL1Prox::new(array![1.0], array![0.0], 1.0).is_err());
        assert!(BallProx::new(0.0, 3).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let p = BoxL1Prox::<f32>::uniform(2, -1.0, 1.0, 0.5).unwrap();
        let w = prox_box_l1(&p, array![0.75f32, -3.0].view(), 1.0).unwrap();
        assert_eq!(w, array![0.25f32, -1.0]);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-20.0..20.0f64, n)
    }

    proptest! {
        #[test]
        fn box_l1_nonexpansive(v in vec_strategy(4), w in vec_strategy(4), eta in 0.01..5.0f64) {
            let p = BoxL1Prox::uniform(4, -3.0, 2.0, 0.8).unwrap();
            let (v, w) = (Array1::from(v), Array1::from(w));
            let d = &prox_box_l1(&p, v.view(), eta).unwrap() - &prox_box_l1(&p, w.view(), eta).unwrap();
            let dv = &v - &w;
            prop_assert!(d.dot(&d).sqrt() <= dv.dot(&dv).sqrt() + 1e-12);
        }

        #[test]
        fn ball_nonexpansive(v in vec_strategy(3), w in vec_strategy(3)) {
            let b = BallProx::new(4.0, 3).unwrap();
            let (v, w) = (Array1::from(v), Array1::from(w));
            let d = &prox_ball(&b, v.view(), 1.0).unwrap() - &prox_ball(&b, w.view(), 1.0).unwrap();
            let dv = &v - &w;
            prop_assert!(d.dot(&d).sqrt() <= dv.dot(&dv).sqrt() + 1e-12);
        }

        #[test]
        fn box_outputs_feasible_and_bounds_exact(v in vec_strategy(5), eta in 0.01..5.0f64) {
            let p = BoxL1Prox::uniform(5, -1.5, 0.5, 0.3).unwrap();
            let out = prox_box_l1(&p, Array1::from(v.clone()).view(), eta).unwrap();
            prop_assert!(p.contains(out.view()));
            for (i, &o) in out.iter().enumerate() {
                prop_assert!((-1.5..=0.5).contains(&o));
                let unclamped = soft_threshold(v[i], eta * 0.3);
                if unclamped > 0.5 { prop_assert_eq!(o, 0.5); }
                if unclamped < -1.5 { prop_assert_eq!(o, -1.5); }
            }
        }

        #[test]
        fn fixed_point_at_minimizer(x in vec_strategy(3), eta in 0.01..5.0f64, lambda in 0.0..2.0f64) {
            // v = x + η·s with s ∈ λ∂‖x‖₁ keeps x optimal for the unconstrained-box prox.
            let p = BoxL1Prox::uniform(3, -20.0, 20.0, lambda).unwrap();
            let x = Array1::from(x);
            let v = x.mapv(|xi| xi + eta * lambda * xi.signum());
            let out = prox_box_l1(&p, v.view(), eta).unwrap();
            for i in 0..3 {
                prop_assert!((out[i] - x[i]).abs() <= 1e-12 * (1.0 + x[i].abs()));
            }
        }
    }
}
