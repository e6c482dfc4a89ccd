//! Numeric traits the math is written against.
//!
//! Graph and group-index arithmetic only needs a field ([`Weight`]), so it also
//! runs over exact rationals. Anything touching timestamps or square roots
//! needs a float ([`Scalar`]).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Edge weights and index values: f32, f64, or an exact ratio type.
pub trait Weight: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

impl<T> Weight for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

/// Real-valued seconds and everything derived from them: f32 or f64.
pub trait Scalar:
    Weight + Float + ToPrimitive + Display + Default + Serialize + DeserializeOwned
{
    /// Lossy conversion from an f64 literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Weight + Float + ToPrimitive + Display + Default + Serialize + DeserializeOwned
{
}

pub(crate) fn from_count<W: Weight>(n: usize) -> W {
    W::from_usize(n).expect("count representable in weight type")
}
