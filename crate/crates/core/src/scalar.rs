//! Floating-point scalar abstraction shared by the solver math.

use ndarray::NdFloat;
use num_traits::FromPrimitive;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the solvers are generic over: `f32` or `f64`.
pub trait Scalar: NdFloat + FromPrimitive + Default + Serialize + DeserializeOwned {
    /// Converts an `f64` literal, panicking only for types that cannot hold it.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
