//! Scalar abstraction so every component works in `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the engine is generic over.
///
/// Implemented for `f32` and `f64`; everything numeric in this crate takes
/// an `R: Real` so a whole pipeline can run in either precision.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar type.
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 literal must convert to the scalar type")
}
