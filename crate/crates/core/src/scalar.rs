//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("index representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `T::lit(x)`.
#[inline]
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Extrinsic point or tangent vector of the target sphere.
pub type Vec3<T> = [T; 3];

#[inline]
pub(crate) fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm2<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a)
}

#[inline]
pub(crate) fn sub<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn scale<T: Real>(s: T, a: &Vec3<T>) -> Vec3<T> {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub(crate) fn axpy<T: Real>(s: T, x: &Vec3<T>, y: &Vec3<T>) -> Vec3<T> {
    [s * x[0] + y[0], s * x[1] + y[1], s * x[2] + y[2]]
}

/// Infinitesimal rotation about the target's polar axis, `A(x, y, z) = (-y, x, 0)`.
#[inline]
pub(crate) fn rot_gen<T: Real>(u: &Vec3<T>) -> Vec3<T> {
    [-u[1], u[0], T::zero()]
}

/// `exp(tau A) u`.
#[inline]
pub(crate) fn rotate<T: Real>(tau: T, u: &Vec3<T>) -> Vec3<T> {
    let (s, co) = tau.sin_cos();
    [co * u[0] - s * u[1], s * u[0] + co * u[1], u[2]]
}
