//! Outward-rounded interval arithmetic on fixed-point binary numbers.
//!
//! An [`Interval`] stores two integers `lo <= hi` standing for
//! `[lo, hi] * 2^-PRECISION`. Every operation rounds the lower end down and
//! the upper end up, so the true real result always lies inside. This
//! decides strict inequalities between quantities whose exact rational
//! forms grow too large to carry, as long as their gap exceeds the
//! accumulated width.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::scalar::{Field, Rational};

/// Fractional bits carried by every endpoint.
pub const PRECISION: u64 = 1024;

#[derive(Clone, PartialEq, Eq)]
pub struct Interval {
    lo: BigInt,
    hi: BigInt,
}

fn scale() -> BigInt {
    BigInt::one() << PRECISION
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

impl Interval {
    /// The tightest enclosure of a rational number.
    pub fn enclose(r: &Rational) -> Self {
        let num = r.numer() << PRECISION;
        let den = r.denom();
        Interval {
            lo: floor_div(&num, den),
            hi: ceil_div(&num, den),
        }
    }

    pub fn lower(&self) -> Rational {
        BigRational::new(self.lo.clone(), scale())
    }

    pub fn upper(&self) -> Rational {
        BigRational::new(self.hi.clone(), scale())
    }

    pub fn contains(&self, r: &Rational) -> bool {
        self.lower() <= *r && *r <= self.upper()
    }

    /// Width as a float (an upper estimate of the enclosure error).
    pub fn width(&self) -> f64 {
        ToPrimitive::to_f64(&BigRational::new(&self.hi - &self.lo, scale())).unwrap_or(f64::NAN)
    }

    fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo - o.hi,
            hi: self.hi - o.lo,
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let products = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let min = products.iter().min().expect("four products");
        let max = products.iter().max().expect("four products");
        let s = scale();
        Interval {
            lo: floor_div(min, &s),
            hi: ceil_div(max, &s),
        }
    }
}

impl Div for Interval {
    type Output = Interval;
    /// Panics when the divisor's enclosure contains zero.
    fn div(self, o: Interval) -> Interval {
        assert!(
            !o.contains_zero(),
            "interval division by an enclosure of zero"
        );
        let mut lo: Option<BigInt> = None;
        let mut hi: Option<BigInt> = None;
        for x in [&self.lo, &self.hi] {
            let shifted = x << PRECISION;
            for y in [&o.lo, &o.hi] {
                let f = floor_div(&shifted, y);
                let c = ceil_div(&shifted, y);
                lo = Some(lo.map_or(f.clone(), |l| l.min(f)));
                hi = Some(hi.map_or(c.clone(), |h| h.max(c)));
            }
        }
        Interval {
            lo: lo.expect("set"),
            hi: hi.expect("set"),
        }
    }
}

impl Field for Interval {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        Interval::enclose(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn from_rational(r: &Rational) -> Self {
        Interval::enclose(r)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(&BigRational::new(&self.lo + &self.hi, scale() << 1))
            .unwrap_or(f64::NAN)
    }

    fn vanishes(&self, _tol: f64) -> bool {
        self.contains_zero()
    }

    fn certainly_lt(&self, other: &Self) -> bool {
        self.hi < other.lo
    }

    fn certainly_le(&self, other: &Self) -> bool {
        self.hi <= other.lo
    }

    fn render(&self) -> String {
        format!("{:e}", self.to_f64())
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Interval({:e} +- {:e})",
            self.to_f64(),
            self.width() / 2.0
        )
    }
}

impl Zero for Interval {
    fn zero() -> Self {
        Interval {
            lo: BigInt::zero(),
            hi: BigInt::zero(),
        }
    }
    fn is_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn encloses_thirds() {
        let x = Interval::from_ratio(1, 3);
        assert!(x.contains(&q(1, 3)));
        assert!(x.width() > 0.0 && x.width() < 1e-300);
        let y = Interval::from_ratio(1, 4);
        assert_eq!(y.width(), 0.0);
    }

    #[test]
    fn operations_stay_enclosing() {
        let a = Interval::from_ratio(2, 7);
        let b = Interval::from_ratio(-5, 11);
        let (ra, rb) = (q(2, 7), q(-5, 11));
        assert!((a.clone() + b.clone()).contains(&(&ra + &rb)));
        assert!((a.clone() - b.clone()).contains(&(&ra - &rb)));
        assert!((a.clone() * b.clone()).contains(&(&ra * &rb)));
        assert!((a.clone() / b.clone()).contains(&(&ra / &rb)));
        assert!((b.clone() / a.clone()).contains(&(&rb / &ra)));
        assert!((-a.clone()).contains(&-ra));
    }

    #[test]
    fn comparisons_are_certain() {
        let a = Interval::from_ratio(1, 3);
        let b = Interval::from_ratio(1, 3);
        assert!(!a.certainly_lt(&b));
        assert!(!a.certainly_le(&b));
        assert!((a.clone() - b).vanishes(0.0));
        assert!(a.certainly_lt(&Interval::from_ratio(1, 2)));
    }

    #[test]
    #[should_panic(expected = "enclosure of zero")]
    fn division_by_zero_enclosure_panics() {
        let _ = Interval::from_ratio(1, 1) / Interval::zero();
    }
}
