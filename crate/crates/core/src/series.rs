//! Truncated multivariate power series with rational coefficients.
//!
//! A series is a polynomial together with a truncation order: every operation
//! discards terms of total degree above the order. Used for specialized
//! Taylor expansions and for composing polynomials with series arguments.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::poly::MultiIndex;
use crate::Rational;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    pub arity: usize,
    pub order: u32,
    pub terms: BTreeMap<MultiIndex, Rational>,
}

impl TruncatedSeries {
    pub fn zero(arity: usize, order: u32) -> Self {
        TruncatedSeries {
            arity,
            order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, order: u32, c: Rational) -> Self {
        let mut s = Self::zero(arity, order);
        s.insert_add(MultiIndex::zero(arity), c);
        s
    }

    pub fn insert_add(&mut self, exp: MultiIndex, coef: Rational) {
        debug_assert_eq!(exp.arity(), self.arity);
        if coef.is_zero() || exp.total() > self.order {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exp) {
            Entry::Vacant(e) => {
                e.insert(coef);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += coef;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn coeff(&self, exp: &MultiIndex) -> Rational {
        self.terms.get(exp).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.arity, other.arity);
        let order = self.order.min(other.order);
        let mut out = Self::zero(self.arity, order);
        for (e, c) in self.terms.iter().chain(&other.terms) {
            out.insert_add(e.clone(), c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.arity, other.arity);
        let order = self.order.min(other.order);
        let mut out = Self::zero(self.arity, order);
        for (ea, ca) in &self.terms {
            if ea.total() > order {
                continue;
            }
            for (eb, cb) in &other.terms {
                if ea.total() + eb.total() > order {
                    continue;
                }
                out.insert_add(ea.add(eb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(self.arity, self.order, Rational::from(crate::Int::from(1)));
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Terms of total degree exactly d.
    pub fn slice(&self, d: u32) -> BTreeMap<MultiIndex, Rational> {
        self.terms
            .iter()
            .filter(|(e, _)| e.total() == d)
            .map(|(e, c)| (e.clone(), c.clone()))
            .collect()
    }

    /// Compose a univariate polynomial (ascending coefficients) with this
    /// series: Horner evaluation, truncated at the series order.
    pub fn compose_univariate(coeffs: &[Rational], arg: &Self) -> Self {
        let mut acc = Self::zero(arg.arity, arg.order);
        for c in coeffs.iter().rev() {
            acc = acc.mul(arg);
            acc.insert_add(MultiIndex::zero(arg.arity), c.clone());
        }
        acc
    }
}
