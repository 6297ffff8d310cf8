//! Number types shared by the exact, floating and enclosure code paths.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact rational numbers.
pub type Rational = BigRational;

/// Arithmetic the level recursion needs. Comparisons report only what is
/// certain for the number type.
pub trait Field:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + 'static
{
    /// Whether comparisons are decided without rounding error.
    const EXACT: bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_rational(r: &Rational) -> Self;

    fn to_f64(&self) -> f64;

    fn zero_value() -> Self {
        Self::from_ratio(0, 1)
    }

    fn one_value() -> Self {
        Self::from_ratio(1, 1)
    }

    /// Zero exactly, zero inside an enclosure, or within `tol` for floats.
    fn vanishes(&self, tol: f64) -> bool;

    /// `self < other` for certain.
    fn certainly_lt(&self, other: &Self) -> bool;

    /// `self <= other` for certain.
    fn certainly_le(&self, other: &Self) -> bool;

    /// Bits in the representation, used to cap exact growth.
    fn bits(&self) -> u64 {
        0
    }

    /// `num/den` for rationals, a decimal otherwise.
    fn render(&self) -> String;
}

/// An ordered field with absolute values, as used by the matrix code and
/// the linear solver. `f64` and [`Rational`] are the instances.
pub trait Scalar:
    Field
    + Display
    + PartialOrd
    + Signed
    + for<'a> std::ops::AddAssign<&'a Self>
    + for<'a> std::ops::SubAssign<&'a Self>
{
    /// Equality for exact types; relative-or-absolute closeness otherwise.
    fn close(&self, other: &Self, tol: f64) -> bool;
}

impl Field for f64 {
    const EXACT: bool = false;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn vanishes(&self, tol: f64) -> bool {
        self.abs() <= tol
    }

    fn certainly_lt(&self, other: &Self) -> bool {
        self < other
    }

    fn certainly_le(&self, other: &Self) -> bool {
        self <= other
    }

    fn render(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for f64 {
    fn close(&self, other: &Self, tol: f64) -> bool {
        let scale = 1f64.max(self.abs()).max(other.abs());
        (self - other).abs() <= tol * scale
    }
}

impl Field for Rational {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn vanishes(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn certainly_lt(&self, other: &Self) -> bool {
        self < other
    }

    fn certainly_le(&self, other: &Self) -> bool {
        self <= other
    }

    fn bits(&self) -> u64 {
        self.numer().bits() + self.denom().bits()
    }

    fn render(&self) -> String {
        if self.is_integer() {
            format!("{}/1", self.numer())
        } else {
            self.to_string()
        }
    }
}

impl Scalar for Rational {
    fn close(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
}

pub fn render<S: Field>(x: &S) -> String {
    x.render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_render_has_denominator() {
        assert_eq!(render(&Rational::from_ratio(4, 8)), "1/2");
        assert_eq!(render(&Rational::from_ratio(3, 1)), "3/1");
        assert_eq!(render(&0.625f64), "0.625");
    }

    #[test]
    fn float_close_is_relative() {
        assert!(1e9f64.close(&(1e9 + 1e-4), 1e-12));
        assert!(!1f64.close(&1.001, 1e-6));
    }

    #[test]
    fn rational_close_is_equality() {
        let a = Rational::from_ratio(1, 3);
        assert!(a.close(&Rational::from_ratio(2, 6), 0.0));
        assert!(!a.close(&Rational::from_ratio(1, 4), 1.0));
    }
}
