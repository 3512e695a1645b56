//! Numeric abstraction shared by every scheduling routine.
//!
//! All of the queue recursions, window bounds and planners only need ordered
//! field arithmetic, so they are written against [`Scalar`]. `f64` is the
//! production type; [`Rational64`] gives exact arithmetic for oracle checks on
//! small instances.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, SubAssign};

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Capacity type used by the max-flow kernel.
pub trait FlowValue: Num + PartialOrd + Copy + Debug + AddAssign + SubAssign + Send + Sync + 'static {}

impl FlowValue for i64 {}
impl FlowValue for Rational64 {}

/// Ordered field element used throughout the crate.
pub trait Scalar:
    Num
    + Signed
    + PartialOrd
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + AddAssign
    + SubAssign
    + Send
    + Sync
    + 'static
{
    /// Integral or exact type that the flow network runs on.
    type Flow: FlowValue;

    /// Slack used when comparing derived quantities. Zero for exact types.
    fn tolerance() -> Self;

    fn floor(self) -> Self;

    /// Round down onto the flow grid.
    fn to_flow_floor(self) -> Self::Flow;

    /// Round up onto the flow grid.
    fn to_flow_ceil(self) -> Self::Flow;

    fn from_flow(flow: Self::Flow) -> Self;

    /// Lossy conversion from `f64`; panics only for NaN or values the type
    /// cannot represent at all.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(|| panic!("{value} is not representable"))
    }

    fn of(count: usize) -> Self {
        Self::from_usize(count).expect("count is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// `max(self, 0)`.
    fn pos(self) -> Self {
        self.max_of(Self::zero())
    }

    /// `self <= other` up to [`Scalar::tolerance`].
    fn le_tol(self, other: Self) -> bool {
        self <= other + Self::tolerance()
    }
}

/// Flow quantum for floating scalars: 1e-6 kW.
pub const FLOW_RESOLUTION: f64 = 1e-6;

macro_rules! float_scalar {
    ($ty:ty, $tol:expr) => {
        impl Scalar for $ty {
            type Flow = i64;

            fn tolerance() -> Self {
                $tol
            }

            fn floor(self) -> Self {
                <$ty>::floor(self)
            }

            fn to_flow_floor(self) -> i64 {
                (self as f64 / FLOW_RESOLUTION).floor() as i64
            }

            fn to_flow_ceil(self) -> i64 {
                (self as f64 / FLOW_RESOLUTION).ceil() as i64
            }

            fn from_flow(flow: i64) -> Self {
                (flow as f64 * FLOW_RESOLUTION) as $ty
            }
        }
    };
}

float_scalar!(f64, 1e-9);
float_scalar!(f32, 1e-4);

impl Scalar for Rational64 {
    type Flow = Rational64;

    fn tolerance() -> Self {
        Rational64::from_integer(0)
    }

    fn floor(self) -> Self {
        Rational64::floor(&self)
    }

    fn to_flow_floor(self) -> Rational64 {
        self
    }

    fn to_flow_ceil(self) -> Rational64 {
        self
    }

    fn from_flow(flow: Rational64) -> Self {
        flow
    }

    fn lit(value: f64) -> Self {
        Rational64::approximate_float(value).unwrap_or_else(|| panic!("{value} is not representable"))
    }
}

/// Sum of a slice.
pub fn sum<S: Scalar>(values: &[S]) -> S {
    values.iter().fold(S::zero(), |acc, &v| acc + v)
}

/// Largest element, `None` on an empty slice.
pub fn max_elem<S: Scalar>(values: &[S]) -> Option<S> {
    values.iter().copied().reduce(S::max_of)
}

/// Smallest element, `None` on an empty slice.
pub fn min_elem<S: Scalar>(values: &[S]) -> Option<S> {
    values.iter().copied().reduce(S::min_of)
}
