//! Places of the rationals and exact local absolute values.
//!
//! Normalization: |2|_inf = 2 and |p|_p = 1/p. For rational inputs every
//! local absolute value is itself an exact rational, so products over places
//! stay exact until a final logarithm.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_prime::nt_funcs::factorize;
use num_traits::{One, Signed, Zero};

use crate::logval::{LogValue, Precision};
use crate::{CoreError, Int, Rational, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Place {
    /// The archimedean place.
    Infinite,
    /// The p-adic place for a prime p.
    Finite(u64),
}

impl Place {
    pub fn is_finite(&self) -> bool {
        matches!(self, Place::Finite(_))
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Infinite => write!(f, "inf"),
            Place::Finite(p) => write!(f, "p:{p}"),
        }
    }
}

impl std::str::FromStr for Place {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "inf" {
            return Ok(Place::Infinite);
        }
        let p = s
            .strip_prefix("p:")
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| CoreError::Malformed(format!("place: {s:?}")))?;
        if !num_prime::nt_funcs::is_prime(&p, None).probably() {
            return Err(CoreError::Malformed(format!("place: {p} is not prime")));
        }
        Ok(Place::Finite(p))
    }
}

impl serde::Serialize for Place {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Place {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// p-adic valuation of a nonzero integer.
fn valuation_int(n: &Int, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let p = Int::from(p);
    let mut n = n.abs();
    let mut v = 0i64;
    loop {
        let (q, r) = num_integer::Integer::div_rem(&n, &p);
        if r.is_zero() {
            v += 1;
            n = q;
        } else {
            return v;
        }
    }
}

/// p-adic valuation of a nonzero rational.
pub fn valuation(x: &Rational, p: u64) -> i64 {
    assert!(!x.is_zero(), "valuation of zero");
    valuation_int(x.numer(), p) - valuation_int(x.denom(), p)
}

/// Exact local absolute value: |x| at the infinite place, p^(-v_p(x)) at a
/// finite place. |0|_v = 0 everywhere.
pub fn abs_v(x: &Rational, v: &Place) -> Rational {
    if x.is_zero() {
        return Rational::zero();
    }
    match v {
        Place::Infinite => x.abs(),
        Place::Finite(p) => {
            let val = valuation(x, *p);
            let pk = Int::from(*p).pow(val.unsigned_abs() as u32);
            if val >= 0 {
                Rational::new(Int::one(), pk)
            } else {
                Rational::new(pk, Int::one())
            }
        }
    }
}

fn prime_factors_of(n: &BigUint, out: &mut BTreeSet<u64>) {
    if n.is_one() || n.is_zero() {
        return;
    }
    for (p, _) in factorize(n.clone()) {
        let p: u64 = p.try_into().expect("prime factor fits u64 at desk scale");
        out.insert(p);
    }
}

/// The infinite place plus every prime dividing a numerator or denominator of
/// the nonzero inputs: exactly the places where some |x_i|_v differs from 1.
pub fn relevant_places(xs: &[Rational]) -> Vec<Place> {
    let mut primes = BTreeSet::new();
    for x in xs {
        if x.is_zero() {
            continue;
        }
        prime_factors_of(x.numer().magnitude(), &mut primes);
        prime_factors_of(x.denom().magnitude(), &mut primes);
    }
    let mut out = vec![Place::Infinite];
    out.extend(primes.into_iter().map(Place::Finite));
    out
}

/// Product of |x|_v over all relevant places, as an exact rational. For any
/// nonzero rational this is exactly 1.
pub fn place_product(x: &Rational) -> Rational {
    assert!(!x.is_zero(), "place product of zero");
    relevant_places(std::slice::from_ref(x))
        .iter()
        .fold(Rational::one(), |acc, v| acc * abs_v(x, v))
}

/// Sum of log|x|_v over relevant places. The product is formed exactly first,
/// so the result is exactly zero for every nonzero rational.
pub fn product_formula_check(x: &Rational, prec: Precision) -> LogValue {
    LogValue::ln_rational(&place_product(x), prec)
}

/// log max(1, |x_0|_v, ..., |x_k|_v) as an exact rational max before the log.
pub fn log_sup_norm_v(xs: &[Rational], v: &Place) -> Rational {
    let mut m = Rational::one();
    for x in xs {
        let a = abs_v(x, v);
        if a > m {
            m = a;
        }
    }
    m
}

/// Projective-style height of the point (1 : x_1 : ... : x_k): sum over
/// relevant places of log max(1, |x_i|_v), computed as one exact product
/// followed by a single ln.
pub fn height_point_with_one(xs: &[Rational], prec: Precision) -> LogValue {
    let prod = height_point_product(xs);
    LogValue::ln_rational(&prod, prec)
}

/// The exact product whose log is `height_point_with_one`.
pub fn height_point_product(xs: &[Rational]) -> Rational {
    let places = relevant_places(xs);
    places
        .iter()
        .fold(Rational::one(), |acc, v| acc * log_sup_norm_v(xs, v))
}

/// max(|x_0|_v, ..., |x_k|_v) without the floor at 1; the vector must be
/// nonempty.
pub fn sup_abs_v(xs: &[Rational], v: &Place) -> Rational {
    xs.iter()
        .map(|x| abs_v(x, v))
        .max()
        .expect("nonempty vector")
}

/// Coefficient-vector height: sum over relevant places of
/// log max |x_i|_v, with no floor at 1. Zero entries are ignored unless the
/// whole vector is zero, which errors.
pub fn gauss_weil_vector_height(xs: &[Rational], prec: Precision) -> Result<LogValue> {
    if xs.iter().all(|x| x.is_zero()) {
        return Err(CoreError::Degenerate(
            "height of the zero coefficient vector".into(),
        ));
    }
    let mut prod = Rational::one();
    for v in relevant_places(xs) {
        prod *= sup_abs_v(xs, &v);
    }
    Ok(LogValue::ln_rational(&prod, prec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logval::parse_rational;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn archimedean_value_is_plain_abs() {
        assert_eq!(abs_v(&q("-7/3"), &Place::Infinite), q("7/3"));
    }

    #[test]
    fn dyadic_value_of_three_eighths() {
        // v_2(3/8) = -3, so |3/8|_2 = 8.
        assert_eq!(abs_v(&q("3/8"), &Place::Finite(2)), q("8"));
    }

    #[test]
    fn relevant_places_of_six_and_minus_four() {
        let got = relevant_places(&[q("6"), q("-4")]);
        assert_eq!(
            got,
            vec![Place::Infinite, Place::Finite(2), Place::Finite(3)]
        );
    }

    #[test]
    fn product_formula_is_exactly_zero() {
        let v = product_formula_check(&q("-364/2475"), Precision::default());
        assert!(v.is_zero());
    }

    #[test]
    fn place_parse_round_trip() {
        assert_eq!("inf".parse::<Place>().unwrap(), Place::Infinite);
        assert_eq!("p:13".parse::<Place>().unwrap(), Place::Finite(13));
        assert!("p:12".parse::<Place>().is_err());
    }

    #[test]
    fn height_of_point_one_half() {
        // (1 : 1/2): max(1,1/2) = 1 at inf, max(1,|1/2|_2) = 2 at p=2.
        let h = height_point_product(&[q("1/2")]);
        assert_eq!(h, q("2"));
    }
}
