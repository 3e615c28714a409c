//! Log-domain numbers at configurable binary precision.
//!
//! A [`LogValue`] is a point value on the natural-log scale (heights, log
//! measures, bound right-hand sides). Construction from exact rationals takes
//! a single `ln` at the working precision; arithmetic stays in the float
//! domain. Error bars of sampled quantities are tracked separately by the
//! callers as plain `f64`, never inside `LogValue`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use dashu_float::round::mode::HalfEven;
use num_traits::Signed;

use crate::{Int, Rational};

/// Binary floating-point backing store, half-even rounding.
pub type Float = dashu_float::FBig<HalfEven, 2>;

/// Working precision in significant binary digits. Default 128, minimum 60.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Precision(pub usize);

impl Default for Precision {
    fn default() -> Self {
        Precision(128)
    }
}

impl Precision {
    pub fn new(bits: usize) -> Self {
        Precision(bits.max(60))
    }
}

#[derive(Clone, Debug)]
pub struct LogValue {
    x: Float,
}

fn int_to_float(n: &Int, prec: Precision) -> Float {
    // Hex round-trip: exact for integers, no base-10 rounding involved.
    let hex = n.magnitude().to_str_radix(16);
    let mag = dashu_int::IBig::from_str_radix(&hex, 16).expect("hex round-trip");
    let mag = if n.is_negative() { -mag } else { mag };
    Float::from(mag).with_precision(prec.0).value()
}

/// Exact rational embedded as a float at working precision.
pub fn rational_to_float(q: &Rational, prec: Precision) -> Float {
    int_to_float(q.numer(), prec) / int_to_float(q.denom(), prec)
}

impl LogValue {
    pub fn zero(_prec: Precision) -> Self {
        LogValue { x: Float::ZERO }
    }

    pub fn from_float(x: Float) -> Self {
        LogValue { x }
    }

    /// ln of a strictly positive rational. ln(1) is exactly zero.
    pub fn ln_rational(q: &Rational, prec: Precision) -> Self {
        assert!(q.is_positive(), "ln of non-positive rational");
        if q.numer() == q.denom() {
            return Self::zero(prec);
        }
        LogValue {
            x: rational_to_float(q, prec).ln(),
        }
    }

    pub fn ln_u64(n: u64, prec: Precision) -> Self {
        assert!(n > 0);
        if n == 1 {
            return Self::zero(prec);
        }
        LogValue {
            x: Float::from(n).with_precision(prec.0).value().ln(),
        }
    }

    /// Exact rational embedded on the log scale (i.e. the value itself, not
    /// its logarithm). Used for harmonic sums and other rational bound terms.
    pub fn from_rational(q: &Rational, prec: Precision) -> Self {
        LogValue {
            x: rational_to_float(q, prec),
        }
    }

    pub fn from_i64(n: i64, prec: Precision) -> Self {
        LogValue {
            x: Float::from(n).with_precision(prec.0).value(),
        }
    }

    pub fn from_f64(v: f64) -> Self {
        LogValue {
            x: Float::try_from(v).expect("finite f64"),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.x.repr().is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.x.to_f64().value()
    }

    pub fn raw(&self) -> &Float {
        &self.x
    }

    pub fn max(&self, other: &Self) -> Self {
        if self.x >= other.x {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn scale_i64(&self, k: i64) -> Self {
        LogValue {
            x: &self.x * Float::from(k),
        }
    }

    pub fn scale_rational(&self, q: &Rational, prec: Precision) -> Self {
        LogValue {
            x: &self.x * rational_to_float(q, prec),
        }
    }
}

impl PartialEq for LogValue {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x
    }
}

impl PartialOrd for LogValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.x.partial_cmp(&other.x)
    }
}

impl Add for &LogValue {
    type Output = LogValue;
    fn add(self, rhs: &LogValue) -> LogValue {
        LogValue { x: &self.x + &rhs.x }
    }
}

impl Sub for &LogValue {
    type Output = LogValue;
    fn sub(self, rhs: &LogValue) -> LogValue {
        LogValue { x: &self.x - &rhs.x }
    }
}

impl Neg for &LogValue {
    type Output = LogValue;
    fn neg(self) -> LogValue {
        LogValue { x: -self.x.clone() }
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, rhs: LogValue) -> LogValue {
        &self + &rhs
    }
}

impl Sub for LogValue {
    type Output = LogValue;
    fn sub(self, rhs: LogValue) -> LogValue {
        &self - &rhs
    }
}

impl AddAssign<&LogValue> for LogValue {
    fn add_assign(&mut self, rhs: &LogValue) {
        self.x += &rhs.x;
    }
}

impl Mul<i64> for &LogValue {
    type Output = LogValue;
    fn mul(self, k: i64) -> LogValue {
        self.scale_i64(k)
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl serde::Serialize for LogValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// ln 2 at working precision.
pub fn ln2(prec: Precision) -> LogValue {
    LogValue::ln_u64(2, prec)
}

/// Parse a rational from its canonical "p/q" or "p" form.
pub fn parse_rational(s: &str) -> Option<Rational> {
    Rational::from_str(s).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn ln_of_one_is_exactly_zero() {
        let v = LogValue::ln_rational(&q("1"), Precision::default());
        assert!(v.is_zero());
    }

    #[test]
    fn ln_matches_reference_digits() {
        let v = LogValue::ln_rational(&q("3/8"), Precision::default());
        assert!((v.to_f64() - (-0.9808292530117262)).abs() < 1e-15);
    }

    #[test]
    fn precision_floor_is_sixty_bits() {
        assert_eq!(Precision::new(10).0, 60);
        assert_eq!(Precision::new(200).0, 200);
    }

    #[test]
    fn arithmetic_is_exact_on_small_integers() {
        let p = Precision::default();
        let a = LogValue::from_i64(54, p);
        let b = a.scale_i64(2);
        assert_eq!(b.to_f64(), 108.0);
    }
}
