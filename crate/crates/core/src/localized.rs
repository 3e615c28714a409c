//! Polynomial fractions with a fixed denominator base.
//!
//! A value num / base^pow where the base polynomial is owned by the caller
//! (one base per computation). Addition aligns powers by multiplying the
//! smaller side up; nothing is ever cancelled mid-computation. Reduction is
//! on demand only, in verification steps.

use num_traits::Zero;

use crate::poly::SparsePolynomial;
use crate::Rational;

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizedPolynomial {
    pub num: SparsePolynomial,
    pub pow: u32,
}

impl LocalizedPolynomial {
    pub fn zero(vars: Vec<String>) -> Self {
        LocalizedPolynomial {
            num: SparsePolynomial::zero_owned(vars),
            pow: 0,
        }
    }

    pub fn from_poly(num: SparsePolynomial) -> Self {
        LocalizedPolynomial { num, pow: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Alignment to a common denominator power, then numerator addition.
    pub fn add(&self, other: &Self, base: &SparsePolynomial) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let pow = self.pow.max(other.pow);
        let lift = |v: &Self| -> SparsePolynomial {
            let mut n = v.num.clone();
            for _ in v.pow..pow {
                n = n.mul(base);
            }
            n
        };
        LocalizedPolynomial {
            num: lift(self).add(&lift(other)),
            pow,
        }
    }

    pub fn neg(&self) -> Self {
        LocalizedPolynomial {
            num: self.num.neg(),
            pow: self.pow,
        }
    }

    /// Product: numerators multiply, powers add. No base needed.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return LocalizedPolynomial {
                num: SparsePolynomial::zero_owned(self.num.vars().to_vec()),
                pow: 0,
            };
        }
        LocalizedPolynomial {
            num: self.num.mul(&other.num),
            pow: self.pow + other.pow,
        }
    }

    pub fn mul_poly(&self, p: &SparsePolynomial) -> Self {
        LocalizedPolynomial {
            num: self.num.mul(p),
            pow: self.pow,
        }
    }

    /// Division by one more power of the base.
    pub fn div_base(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        LocalizedPolynomial {
            num: self.num.clone(),
            pow: self.pow + 1,
        }
    }

    /// Exact rational value at a point where the base does not vanish.
    pub fn eval(&self, point: &[Rational], base_at_point: &Rational) -> Rational {
        assert!(!base_at_point.is_zero(), "denominator base vanishes");
        let n = self.num.eval(point);
        let mut d = Rational::from(crate::Int::from(1));
        for _ in 0..self.pow {
            d *= base_at_point;
        }
        n / d
    }

    /// Whether the value lies in (1/base^bound) * B: true when the stored
    /// power already satisfies the bound, otherwise checked by exact division
    /// of the numerator by the excess base power.
    pub fn clears_at(&self, bound: u32, base: &SparsePolynomial) -> bool {
        if self.is_zero() || self.pow <= bound {
            return true;
        }
        let mut excess = base.clone();
        for _ in 1..(self.pow - bound) {
            excess = excess.mul(base);
        }
        self.num.try_divide_exact(&excess).is_some()
    }

    /// Numerator after clearing the denominator at exactly the given power:
    /// num * base^(bound - pow). Panics if pow exceeds bound and the excess
    /// does not divide exactly.
    pub fn cleared_numerator(&self, bound: u32, base: &SparsePolynomial) -> SparsePolynomial {
        if self.pow <= bound {
            let mut n = self.num.clone();
            for _ in self.pow..bound {
                n = n.mul(base);
            }
            n
        } else {
            let mut excess = base.clone();
            for _ in 1..(self.pow - bound) {
                excess = excess.mul(base);
            }
            self.num
                .try_divide_exact(&excess)
                .expect("denominator power exceeds bound and does not clear")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logval::parse_rational;
    use crate::poly::MultiIndex;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn base_t() -> SparsePolynomial {
        // 2T over vars [Y, T].
        SparsePolynomial::from_terms(
            vec!["Y".into(), "T".into()],
            [(MultiIndex(vec![0, 1]), q("2"))],
        )
        .unwrap()
    }

    #[test]
    fn addition_aligns_powers() {
        let base = base_t();
        let one = SparsePolynomial::constant(&["Y", "T"], q("1"));
        let a = LocalizedPolynomial { num: one.clone(), pow: 1 };
        let b = LocalizedPolynomial { num: one.clone(), pow: 2 };
        let s = a.add(&b, &base);
        assert_eq!(s.pow, 2);
        // 1/(2T) + 1/(2T)^2 = (2T + 1)/(2T)^2.
        assert_eq!(s.num.coeff(&MultiIndex(vec![0, 1])), q("2"));
        assert_eq!(s.num.coeff(&MultiIndex(vec![0, 0])), q("1"));
    }

    #[test]
    fn clearing_checks_honour_excess_powers() {
        let base = base_t();
        // (4T^2) / (2T)^3 clears at bound 1: 4T^2 = (2T)^2.
        let num = SparsePolynomial::from_terms(
            vec!["Y".into(), "T".into()],
            [(MultiIndex(vec![0, 2]), q("4"))],
        )
        .unwrap();
        let v = LocalizedPolynomial { num, pow: 3 };
        assert!(v.clears_at(1, &base));
        assert!(!v.clears_at(0, &base));
        let cleared = v.cleared_numerator(1, &base);
        assert_eq!(cleared, SparsePolynomial::constant(&["Y", "T"], q("1")));
    }
}
