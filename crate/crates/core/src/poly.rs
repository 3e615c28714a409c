//! Sparse multivariate polynomials over the rationals.
//!
//! Terms live in a BTreeMap keyed by graded-lexicographic multi-indices, so
//! iteration order, printing and serialization are canonical. The input
//! envelope is arity <= 16 and total degree <= 64; intermediate products may
//! exceed the degree envelope transiently (exponents are u16).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::places::{abs_v, Place};
use crate::{CoreError, Int, Rational, Result};

pub const MAX_ARITY: usize = 16;
pub const MAX_TOTAL_DEGREE: u32 = 64;

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex(pub Vec<u16>);

impl MultiIndex {
    pub fn zero(arity: usize) -> Self {
        MultiIndex(vec![0; arity])
    }

    pub fn unit(arity: usize, k: usize) -> Self {
        let mut v = vec![0; arity];
        v[k] = 1;
        MultiIndex(v)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// |I|: sum of the entries.
    pub fn total(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.arity(), other.arity());
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    /// Componentwise difference, None if any entry would go negative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        debug_assert_eq!(self.arity(), other.arity());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a.checked_sub(b))
            .collect::<Option<Vec<u16>>>()
            .map(MultiIndex)
    }

    /// Componentwise <=.
    pub fn divides(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| a <= b)
    }

    /// I! = prod of entry factorials.
    pub fn factorial(&self) -> Int {
        let mut acc = Int::one();
        for &e in &self.0 {
            for k in 2..=e as u64 {
                acc *= Int::from(k);
            }
        }
        acc
    }

    /// binom(J, I) = prod binom(j_t, i_t); zero if I does not divide J.
    pub fn binomial(upper: &Self, lower: &Self) -> Int {
        debug_assert_eq!(upper.arity(), lower.arity());
        let mut acc = Int::one();
        for (&j, &i) in upper.0.iter().zip(&lower.0) {
            if i > j {
                return Int::zero();
            }
            acc *= num_integer::binomial(Int::from(j), Int::from(i));
        }
        acc
    }

    /// All multi-indices of the given arity with total <= bound, ascending
    /// graded-lex.
    pub fn all_upto(arity: usize, bound: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for d in 0..=bound {
            out.extend(Self::all_of_total(arity, d));
        }
        out
    }

    /// All multi-indices of the given arity with total exactly d, ascending
    /// lex within the degree class.
    pub fn all_of_total(arity: usize, d: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u16; arity];
        fn rec(k: usize, rem: u32, cur: &mut Vec<u16>, out: &mut Vec<MultiIndex>) {
            if k + 1 == cur.len() {
                cur[k] = rem as u16;
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for e in 0..=rem {
                cur[k] = e as u16;
                rec(k + 1, rem - e, cur, out);
            }
        }
        if arity == 0 {
            if d == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return out;
        }
        rec(0, d, &mut cur, &mut out);
        out.sort();
        out
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.arity(), other.arity(), "arity mismatch in compare");
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(MultiIndex(Vec::<u16>::deserialize(d)?))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Total degree with a sentinel for the zero polynomial that compares below
/// every finite degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Degree {
    NegInfinity,
    Finite(u32),
}

impl Degree {
    pub fn finite(self) -> Option<u32> {
        match self {
            Degree::NegInfinity => None,
            Degree::Finite(d) => Some(d),
        }
    }

    pub fn leq(self, bound: u32) -> bool {
        match self {
            Degree::NegInfinity => true,
            Degree::Finite(d) => d <= bound,
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInfinity => write!(f, "-inf"),
            Degree::Finite(d) => write!(f, "{d}"),
        }
    }
}

impl Serialize for Degree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Degree::NegInfinity => s.serialize_str("-inf"),
            Degree::Finite(d) => s.serialize_u32(*d),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SparsePolynomial {
    vars: Vec<String>,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl SparsePolynomial {
    pub fn zero(vars: &[&str]) -> Self {
        Self::zero_owned(vars.iter().map(|s| s.to_string()).collect())
    }

    pub fn zero_owned(vars: Vec<String>) -> Self {
        assert!(!vars.is_empty() && vars.len() <= MAX_ARITY, "arity envelope");
        SparsePolynomial {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &[&str], c: Rational) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(MultiIndex::zero(p.arity()), c);
        }
        p
    }

    pub fn variable(vars: &[&str], k: usize) -> Self {
        let mut p = Self::zero(vars);
        p.terms
            .insert(MultiIndex::unit(p.arity(), k), Rational::one());
        p
    }

    pub fn monomial(vars: &[&str], exp: MultiIndex, coef: Rational) -> Self {
        let mut p = Self::zero(vars);
        assert_eq!(exp.arity(), p.arity());
        if !coef.is_zero() {
            p.terms.insert(exp, coef);
        }
        p
    }

    /// Validating constructor used by parsers and instance generators:
    /// enforces the arity/degree envelope, rejects duplicate exponents.
    pub fn from_terms<I>(vars: Vec<String>, it: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Rational)>,
    {
        if vars.is_empty() || vars.len() > MAX_ARITY {
            return Err(CoreError::Arity(vars.len()));
        }
        let mut terms = BTreeMap::new();
        for (exp, coef) in it {
            if exp.arity() != vars.len() {
                return Err(CoreError::VarMismatch(format!(
                    "exponent arity {} vs {} variables",
                    exp.arity(),
                    vars.len()
                )));
            }
            let d = exp.total();
            if d > MAX_TOTAL_DEGREE {
                return Err(CoreError::TotalDegree(d));
            }
            if coef.is_zero() {
                continue;
            }
            if terms.insert(exp, coef).is_some() {
                return Err(CoreError::Malformed("duplicate exponent vector".into()));
            }
        }
        Ok(SparsePolynomial { vars, terms })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, exp: &MultiIndex) -> Rational {
        self.terms.get(exp).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &Rational> {
        self.terms.values()
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(self.vars, other.vars, "variable set mismatch");
    }

    pub fn insert_add(&mut self, exp: MultiIndex, coef: Rational) {
        if coef.is_zero() {
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

    pub fn add(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_add(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_add(e.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scale(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Self::zero_owned(self.vars.clone());
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= k;
        }
        out
    }

    /// Packed exponent key: one byte per variable. Valid while every entry
    /// stays below 256, which the degree envelope guarantees with margin.
    fn pack(exp: &MultiIndex) -> u128 {
        debug_assert!(exp.arity() <= MAX_ARITY);
        let mut key = 0u128;
        for (i, &e) in exp.0.iter().enumerate() {
            debug_assert!(e < 256, "exponent exceeds packed byte");
            key |= (e as u128) << (8 * i);
        }
        key
    }

    fn unpack(key: u128, arity: usize) -> MultiIndex {
        MultiIndex(
            (0..arity)
                .map(|i| ((key >> (8 * i)) & 0xff) as u16)
                .collect(),
        )
    }

    /// Common denominator and integer-scaled terms: self = (1/den) * sum.
    fn integer_scaled(&self) -> (Int, Vec<(u128, Int)>) {
        let mut den = Int::one();
        for c in self.terms.values() {
            den = den.lcm(c.denom());
        }
        let scaled = self
            .terms
            .iter()
            .map(|(e, c)| {
                let num = c.numer() * (&den / c.denom());
                (Self::pack(e), num)
            })
            .collect();
        (den, scaled)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        if self.is_zero() || other.is_zero() {
            return Self::zero_owned(self.vars.clone());
        }
        let (da, ta) = self.integer_scaled();
        let (db, tb) = other.integer_scaled();
        let mut acc: HashMap<u128, Int> = HashMap::with_capacity(ta.len() * tb.len() / 2 + 8);
        // Keys add bytewise without carry: entries stay far below 256.
        for (ka, ca) in &ta {
            for (kb, cb) in &tb {
                let key = ka + kb;
                let prod = ca * cb;
                acc.entry(key)
                    .and_modify(|v| *v += &prod)
                    .or_insert(prod);
            }
        }
        let den = da * db;
        let arity = self.arity();
        let mut terms = BTreeMap::new();
        for (key, num) in acc {
            if num.is_zero() {
                continue;
            }
            terms.insert(Self::unpack(key, arity), Rational::new(num, den.clone()));
        }
        SparsePolynomial {
            vars: self.vars.clone(),
            terms,
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant_owned(self.vars.clone(), Rational::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    fn constant_owned(vars: Vec<String>, c: Rational) -> Self {
        let mut p = Self::zero_owned(vars);
        if !c.is_zero() {
            p.terms.insert(MultiIndex::zero(p.arity()), c);
        }
        p
    }

    pub fn eval(&self, point: &[Rational]) -> Rational {
        assert_eq!(point.len(), self.arity(), "evaluation point arity");
        // Power tables per variable up to the maximum exponent present.
        let mut maxes = vec![0u16; self.arity()];
        for e in self.terms.keys() {
            for (m, &x) in maxes.iter_mut().zip(&e.0) {
                *m = (*m).max(x);
            }
        }
        let pows: Vec<Vec<Rational>> = point
            .iter()
            .zip(&maxes)
            .map(|(x, &m)| {
                let mut v = Vec::with_capacity(m as usize + 1);
                v.push(Rational::one());
                for _ in 0..m {
                    v.push(v.last().unwrap() * x);
                }
                v
            })
            .collect();
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (k, &ex) in e.0.iter().enumerate() {
                if ex > 0 {
                    t *= &pows[k][ex as usize];
                }
            }
            acc += t;
        }
        acc
    }

    /// d/dX_k.
    pub fn partial_derivative(&self, k: usize) -> Self {
        let mut out = Self::zero_owned(self.vars.clone());
        for (e, c) in &self.terms {
            if e.0[k] == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne.0[k] -= 1;
            out.insert_add(ne, c * Rational::from(Int::from(e.0[k])));
        }
        out
    }

    /// Divided derivative D^I = (1/I!) d^{|I|}/dX^I: maps X^J to
    /// binom(J,I) X^{J-I}.
    pub fn divided_derivative(&self, i: &MultiIndex) -> Self {
        assert_eq!(i.arity(), self.arity());
        let mut out = Self::zero_owned(self.vars.clone());
        for (j, c) in &self.terms {
            if let Some(rest) = j.checked_sub(i) {
                let b = MultiIndex::binomial(j, i);
                out.insert_add(rest, c * Rational::from(b));
            }
        }
        out
    }

    pub fn total_degree(&self) -> Degree {
        self.terms
            .keys()
            .map(|e| e.total())
            .max()
            .map_or(Degree::NegInfinity, Degree::Finite)
    }

    pub fn degree_in(&self, k: usize) -> Degree {
        self.terms
            .keys()
            .map(|e| e.0[k] as u32)
            .max()
            .map_or(Degree::NegInfinity, Degree::Finite)
    }

    /// Total degree in a contiguous block of variables.
    pub fn degree_in_block(&self, block: std::ops::Range<usize>) -> Degree {
        self.terms
            .keys()
            .map(|e| e.0[block.clone()].iter().map(|&x| x as u32).sum())
            .max()
            .map_or(Degree::NegInfinity, Degree::Finite)
    }

    /// Some(d) when every term has total degree d.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|e| e.total());
        let d = it.next()?;
        it.all(|x| x == d).then_some(d)
    }

    /// Some(multidegree) when each variable block is homogeneous of a fixed
    /// degree; blocks are given by their sizes, covering all variables.
    pub fn multihomogeneous_degree(&self, block_sizes: &[usize]) -> Option<Vec<u32>> {
        assert_eq!(block_sizes.iter().sum::<usize>(), self.arity());
        let mut degs: Option<Vec<u32>> = None;
        for e in self.terms.keys() {
            let mut start = 0;
            let mut cur = Vec::with_capacity(block_sizes.len());
            for &sz in block_sizes {
                cur.push(e.0[start..start + sz].iter().map(|&x| x as u32).sum());
                start += sz;
            }
            match &degs {
                None => degs = Some(cur),
                Some(d) if *d == cur => {}
                _ => return None,
            }
        }
        degs
    }

    /// Terms of total degree exactly d.
    pub fn homogeneous_component(&self, d: u32) -> Self {
        let mut out = Self::zero_owned(self.vars.clone());
        for (e, c) in &self.terms {
            if e.total() == d {
                out.terms.insert(e.clone(), c.clone());
            }
        }
        out
    }

    /// Leading term in graded-lex order.
    pub fn leading(&self) -> Option<(&MultiIndex, &Rational)> {
        self.terms.iter().next_back()
    }

    /// Substitute a polynomial (same variable set) for variable k, by Horner
    /// evaluation in that variable.
    pub fn substitute_var(&self, k: usize, replacement: &Self) -> Self {
        self.assert_compatible(replacement);
        let deg = match self.degree_in(k) {
            Degree::NegInfinity => return self.clone(),
            Degree::Finite(d) => d,
        };
        // Coefficient polynomials of x_k^j, exponent k zeroed out.
        let mut coeffs: Vec<SparsePolynomial> =
            vec![Self::zero_owned(self.vars.clone()); deg as usize + 1];
        for (e, c) in &self.terms {
            let j = e.0[k] as usize;
            let mut ne = e.clone();
            ne.0[k] = 0;
            coeffs[j].insert_add(ne, c.clone());
        }
        let mut acc = coeffs[deg as usize].clone();
        for j in (0..deg as usize).rev() {
            acc = acc.mul(replacement).add(&coeffs[j]);
        }
        acc
    }

    /// Set variable k to 1 and drop it from the variable set.
    pub fn set_var_to_one(&self, k: usize) -> Self {
        assert!(self.arity() >= 2, "cannot drop the only variable");
        let vars: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, v)| v.clone())
            .collect();
        let mut out = Self::zero_owned(vars);
        for (e, c) in &self.terms {
            let ne: Vec<u16> = e
                .0
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, &x)| x)
                .collect();
            out.insert_add(MultiIndex(ne), c.clone());
        }
        out
    }

    /// Reinterpret over a larger variable set: old variable i becomes
    /// variable positions[i] of `new_vars`.
    pub fn embed(&self, new_vars: &[&str], positions: &[usize]) -> Self {
        assert_eq!(positions.len(), self.arity());
        let mut out = Self::zero(new_vars);
        for (e, c) in &self.terms {
            let mut ne = vec![0u16; new_vars.len()];
            for (i, &p) in positions.iter().enumerate() {
                ne[p] = e.0[i];
            }
            out.terms.insert(MultiIndex(ne), c.clone());
        }
        out
    }

    /// Rename variables in place (same arity).
    pub fn rename(&self, new_vars: &[&str]) -> Self {
        assert_eq!(new_vars.len(), self.arity());
        SparsePolynomial {
            vars: new_vars.iter().map(|s| s.to_string()).collect(),
            terms: self.terms.clone(),
        }
    }

    /// Group terms by the exponents of the selected variable positions;
    /// values are polynomials over the remaining variables.
    pub fn split_coefficients(
        &self,
        positions: &[usize],
    ) -> BTreeMap<MultiIndex, SparsePolynomial> {
        let keep: Vec<usize> = (0..self.arity())
            .filter(|i| !positions.contains(i))
            .collect();
        assert!(!keep.is_empty(), "no remaining variables");
        let rem_vars: Vec<String> = keep.iter().map(|&i| self.vars[i].clone()).collect();
        let mut out: BTreeMap<MultiIndex, SparsePolynomial> = BTreeMap::new();
        for (e, c) in &self.terms {
            let key = MultiIndex(positions.iter().map(|&i| e.0[i]).collect());
            let rest = MultiIndex(keep.iter().map(|&i| e.0[i]).collect());
            out.entry(key)
                .or_insert_with(|| Self::zero_owned(rem_vars.clone()))
                .insert_add(rest, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// L_v: sum of local absolute values of the coefficients.
    pub fn length_v(&self, v: &Place) -> Rational {
        self.terms
            .values()
            .fold(Rational::zero(), |acc, c| acc + abs_v(c, v))
    }

    /// H_v (Gauss-Weil local measure): max of local absolute values of the
    /// coefficients. Zero polynomial gives 0.
    pub fn gauss_weil_v(&self, v: &Place) -> Rational {
        let mut m = Rational::zero();
        for c in self.terms.values() {
            let a = abs_v(c, v);
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Squared Euclidean norm of the coefficient vector, exact.
    pub fn l2_norm_squared(&self) -> Rational {
        self.terms
            .values()
            .fold(Rational::zero(), |acc, c| acc + c * c)
    }

    /// Positive content c and primitive integer part Q with self = c * Q.
    /// Zero polynomial returns (0, 0).
    pub fn content_primitive(&self) -> (Rational, SparsePolynomial) {
        if self.is_zero() {
            return (Rational::zero(), self.clone());
        }
        let mut den = Int::one();
        for c in self.terms.values() {
            den = den.lcm(c.denom());
        }
        let mut g = Int::zero();
        for c in self.terms.values() {
            let num = c.numer() * (&den / c.denom());
            g = g.gcd(&num);
        }
        let content = Rational::new(g.clone(), den.clone());
        let mut prim = Self::zero_owned(self.vars.clone());
        for (e, c) in &self.terms {
            let num = c.numer() * (&den / c.denom());
            prim.terms.insert(e.clone(), Rational::from(num / &g));
        }
        (content, prim)
    }

    /// Exact polynomial division: Some(q) with self = q * divisor, or None.
    /// Graded-lex leading-term elimination.
    pub fn try_divide_exact(&self, divisor: &Self) -> Option<Self> {
        self.assert_compatible(divisor);
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let (dlead_e, dlead_c) = divisor.leading().unwrap();
        let mut rem = self.clone();
        let mut quot = Self::zero_owned(self.vars.clone());
        while let Some((rlead_e, rlead_c)) = rem.leading() {
            let t_exp = rlead_e.checked_sub(dlead_e)?;
            let t_coef = rlead_c / dlead_c;
            quot.insert_add(t_exp.clone(), t_coef.clone());
            let piece = Self::monomial_owned(self.vars.clone(), t_exp, t_coef);
            rem = rem.sub(&piece.mul(divisor));
        }
        Some(quot)
    }

    fn monomial_owned(vars: Vec<String>, exp: MultiIndex, coef: Rational) -> Self {
        let mut p = Self::zero_owned(vars);
        if !coef.is_zero() {
            p.terms.insert(exp, coef);
        }
        p
    }

    /// Coefficients as a dense ascending vector; requires arity 1.
    pub fn to_univariate(&self) -> Vec<Rational> {
        assert_eq!(self.arity(), 1, "univariate view of multivariate input");
        let d = match self.total_degree() {
            Degree::NegInfinity => return Vec::new(),
            Degree::Finite(d) => d,
        };
        let mut out = vec![Rational::zero(); d as usize + 1];
        for (e, c) in &self.terms {
            out[e.0[0] as usize] = c.clone();
        }
        out
    }
}

impl fmt::Display for SparsePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let unit_coef = mag.is_one() && !e.is_zero();
            if !unit_coef {
                write!(f, "{mag}")?;
            }
            let mut wrote_var = false;
            for (k, &ex) in e.0.iter().enumerate() {
                if ex == 0 {
                    continue;
                }
                if wrote_var || !unit_coef {
                    write!(f, "*")?;
                }
                wrote_var = true;
                write!(f, "{}", self.vars[k])?;
                if ex > 1 {
                    write!(f, "^{ex}")?;
                }
            }
            Ok::<(), fmt::Error>(())?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct WireTerm {
    exp: Vec<u16>,
    coef: String,
}

#[derive(Serialize, Deserialize)]
struct WirePoly {
    vars: Vec<String>,
    terms: Vec<WireTerm>,
}

impl Serialize for SparsePolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // Leading term first: descending graded-lex.
        let terms = self
            .terms
            .iter()
            .rev()
            .map(|(e, c)| WireTerm {
                exp: e.0.clone(),
                coef: c.to_string(),
            })
            .collect();
        WirePoly {
            vars: self.vars.clone(),
            terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparsePolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = WirePoly::deserialize(d)?;
        let mut parsed = Vec::with_capacity(wire.terms.len());
        for t in wire.terms {
            let coef = crate::logval::parse_rational(&t.coef)
                .ok_or_else(|| D::Error::custom(format!("bad rational {:?}", t.coef)))?;
            parsed.push((MultiIndex(t.exp), coef));
        }
        SparsePolynomial::from_terms(wire.vars, parsed).map_err(D::Error::custom)
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use num_traits::{One, ToPrimitive};

    #[derive(Clone, Debug, PartialEq)]
    enum Tok {
        Num(Int),
        Ident(String),
        Op(char),
    }

    fn lex(src: &str) -> Vec<Tok> {
        let mut out = Vec::new();
        let mut it = src.chars().peekable();
        while let Some(&c) = it.peek() {
            if c.is_whitespace() {
                it.next();
            } else if c.is_ascii_digit() {
                let mut n = String::new();
                while let Some(&d) = it.peek() {
                    if d.is_ascii_digit() {
                        n.push(d);
                        it.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Num(n.parse().unwrap()));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut n = String::new();
                while let Some(&d) = it.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        n.push(d);
                        it.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Ident(n));
            } else {
                assert!("+-*/^()".contains(c), "unexpected character {c:?}");
                out.push(Tok::Op(c));
                it.next();
            }
        }
        out
    }

    struct Parser<'a> {
        toks: Vec<Tok>,
        pos: usize,
        vars: &'a [&'a str],
    }

    impl Parser<'_> {
        fn peek(&self) -> Option<&Tok> {
            self.toks.get(self.pos)
        }

        fn bump(&mut self) -> Option<Tok> {
            let t = self.toks.get(self.pos).cloned();
            self.pos += 1;
            t
        }

        fn expr(&mut self) -> SparsePolynomial {
            let mut acc = match self.peek() {
                Some(Tok::Op('-')) => {
                    self.pos += 1;
                    self.term().neg()
                }
                Some(Tok::Op('+')) => {
                    self.pos += 1;
                    self.term()
                }
                _ => self.term(),
            };
            while let Some(&Tok::Op(op @ ('+' | '-'))) = self.peek() {
                self.pos += 1;
                let rhs = self.term();
                acc = if op == '+' { acc.add(&rhs) } else { acc.sub(&rhs) };
            }
            acc
        }

        fn term(&mut self) -> SparsePolynomial {
            let mut acc = self.factor();
            while let Some(&Tok::Op(op @ ('*' | '/'))) = self.peek() {
                self.pos += 1;
                let rhs = self.factor();
                if op == '*' {
                    acc = acc.mul(&rhs);
                } else {
                    assert!(rhs.total_degree().leq(0), "division only by constants");
                    let c = rhs.coeff(&MultiIndex::zero(rhs.arity()));
                    acc = acc.scale(&(Rational::one() / c));
                }
            }
            acc
        }

        fn factor(&mut self) -> SparsePolynomial {
            let base = self.base();
            if self.peek() == Some(&Tok::Op('^')) {
                self.pos += 1;
                match self.bump() {
                    Some(Tok::Num(n)) => base.pow(n.to_u32().expect("small exponent")),
                    t => panic!("expected an exponent, got {t:?}"),
                }
            } else {
                base
            }
        }

        fn base(&mut self) -> SparsePolynomial {
            match self.bump() {
                Some(Tok::Num(n)) => SparsePolynomial::constant(self.vars, Rational::from(n)),
                Some(Tok::Ident(name)) => {
                    let k = self
                        .vars
                        .iter()
                        .position(|v| **v == name)
                        .unwrap_or_else(|| panic!("unknown variable {name:?}"));
                    SparsePolynomial::variable(self.vars, k)
                }
                Some(Tok::Op('(')) => {
                    let e = self.expr();
                    assert_eq!(self.bump(), Some(Tok::Op(')')), "unbalanced parenthesis");
                    e
                }
                Some(Tok::Op('-')) => self.factor().neg(),
                t => panic!("unexpected token {t:?}"),
            }
        }
    }

    /// Parses a readable expression like "3*X^2*Y - 1/2*Y + (X - 2)*(Y - 3)"
    /// over the given variables. Panics on malformed input; tests only.
    pub(crate) fn parse_poly(vars: &[&str], src: &str) -> SparsePolynomial {
        let mut p = Parser { toks: lex(src), pos: 0, vars };
        let out = p.expr();
        assert_eq!(p.pos, p.toks.len(), "trailing tokens in {src:?}");
        out
    }

    #[test]
    fn parser_round_trips_display() {
        let p = parse_poly(&["X", "Y"], "(X - 2)*(Y - 3) - X*Y");
        assert_eq!(p.to_string(), "-3*X - 2*Y + 6");
        let q = parse_poly(&["X"], "-X^2 + 1/2");
        assert_eq!(q.to_string(), "-X^2 + 1/2");
    }
}
