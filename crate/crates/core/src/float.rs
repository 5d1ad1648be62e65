//! Scalar abstraction for the numeric core.

use std::fmt;

/// Floating-point scalar the whole pipeline is generic over.
///
/// Everything downstream (sample matrices, CI tests, regression, the
/// synthetic generator) works for any type implementing this trait;
/// `f32` and `f64` are the supported instantiations. Concrete `f64`
/// aliases live at the crate root.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + ndarray::ScalarOperand
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` for constants and thresholds.
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant converts to any Float")
    }

    /// Conversion to `f64` for p-value plumbing and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Float converts to f64")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("sample counts fit in any Float")
    }
}

impl Float for f32 {}
impl Float for f64 {}
