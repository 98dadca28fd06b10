//! Scalar abstraction over the floating-point type used by the numeric core.
//!
//! Everything downstream (state sampling, distances, clustering thresholds,
//! fits, tail bounds) is generic over [`Scalar`]; `f64` is the type the CLI
//! and the file formats use, `f32` exists for memory-bound experiments.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable throughout the numeric core.
///
/// Beyond the usual `num_traits` bundle this carries the one distribution the
/// simulator needs, so call sites only ever write `S: Scalar`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Draw one standard normal deviate from `rng`.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Convert an `f64` literal into `S`. Panics only if `S` cannot represent
/// ordinary finite constants, which no `Scalar` impl here fails to do.
#[inline]
pub(crate) fn lit<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("finite literal must be representable")
}

/// Pairwise (tree) summation. Bounds rounding-error growth to O(log n)
/// instead of O(n), which matters for inner products at D = 2^14.
pub fn pairwise_sum<S: Scalar>(xs: &[S]) -> S {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        let mut acc = S::zero();
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
