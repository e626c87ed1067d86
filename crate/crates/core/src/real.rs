//! Scalar abstraction shared by the whole pipeline.
//!
//! Everything numeric is generic over [`Real`], implemented for `f64` and for
//! the double-double type [`crate::dd::DoubleDouble`] (about 32 significant
//! decimal digits).

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_traits::{FromPrimitive, ToPrimitive};

pub trait Real:
    Copy
    + Send
    + Sync
    + Debug
    + PartialOrd
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    /// Short backend name used in reports.
    const NAME: &'static str;
    /// Number of significant decimal digits carried (and printed).
    const DIGITS: usize;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Unit roundoff of the backend.
    fn epsilon() -> Self;
    fn pi() -> Self;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn abs(self) -> Self;
    fn floor(self) -> Self;
    fn is_finite(self) -> bool;

    /// Decimal scientific notation carrying [`Real::DIGITS`] significant digits.
    fn to_sci_string(self) -> String;
    fn parse_decimal(s: &str) -> Option<Self>;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }

    fn tan(self) -> Self {
        self.sin() / self.cos()
    }

    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { Self::one() / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    /// `self^p` for `self > 0`, through `exp(p ln self)`.
    fn powf(self, p: Self) -> Self {
        (p * self.ln()).exp()
    }

    fn ceil(self) -> Self {
        -((-self).floor())
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn log10(self) -> Self {
        self.ln() / Self::from_f64(10.0).ln()
    }

    /// Converts an arbitrary-size integer, rounding to the working precision.
    fn from_bigint(n: &BigInt) -> Self {
        let hi = n.to_f64().unwrap_or(f64::INFINITY);
        if !hi.is_finite() {
            return Self::from_f64(hi);
        }
        let rem = n - BigInt::from_f64(hi).expect("finite f64 is an integer here");
        let lo = rem.to_f64().unwrap_or(0.0);
        Self::from_f64(hi) + Self::from_f64(lo)
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";
    const DIGITS: usize = 17;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn epsilon() -> Self {
        f64::EPSILON / 2.0
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn floor(self) -> Self {
        f64::floor(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn to_sci_string(self) -> String {
        format!("{:.16e}", self)
    }
    fn parse_decimal(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
}

/// `a < b` with a relative guard of a few units of roundoff, so that a
/// comparison that passes is not an artefact of the last rounding.
pub fn certainly_lt<T: Real>(a: T, b: T) -> bool {
    let scale = a.abs().max(b.abs());
    a + T::from_f64(8.0) * T::epsilon() * scale < b
}

pub fn certainly_le<T: Real>(a: T, b: T) -> bool {
    let scale = a.abs().max(b.abs());
    a + T::from_f64(8.0) * T::epsilon() * scale <= b
}
