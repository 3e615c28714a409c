//! Joint embedding of a torus block product into one projective space: per
//! block the full list of degree-delta monomials, across blocks their
//! products, with the induced pullback of linear forms and an exact height
//! transfer check.
//!
//! The target coordinates are indexed by the monomial list in descending
//! lex order on the concatenated exponent vectors (all entries share the
//! same total degree, so this is also graded). A form whose multidegree
//! matches the embedding degrees becomes the linear section with the same
//! coefficients, one per monomial; evaluating the section on an embedded
//! point recovers the form's value exactly, and the coefficient height is
//! untouched because the coefficient multiset is.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::group::{MultiForm, TorusModel};
use crate::implicit::rational_pow;
use crate::logval::{LogValue, Precision};
use crate::places;
use crate::poly::MultiIndex;
use crate::{CoreError, Int, Rational, Result};

/// Hard cap on the number of target coordinates one map may materialize.
pub const COORDINATE_CAP: u64 = 2_000_000;

/// A linear form on the embedding target, sparse over coordinate positions.
/// Kept out of the polynomial type on purpose: the target dimension routinely
/// exceeds the polynomial arity envelope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSection {
    coeffs: BTreeMap<usize, Rational>,
    coords: usize,
}

impl LinearSection {
    pub fn coefficients(&self) -> &BTreeMap<usize, Rational> {
        &self.coeffs
    }

    pub fn coordinate_count(&self) -> usize {
        self.coords
    }

    pub fn eval(&self, point: &[Rational]) -> Result<Rational> {
        if point.len() != self.coords {
            return Err(CoreError::Arity(point.len()));
        }
        let mut acc = Rational::zero();
        for (&pos, c) in &self.coeffs {
            acc += c * &point[pos];
        }
        Ok(acc)
    }

    /// Sum over places of log max |coefficient|_v.
    pub fn height(&self, prec: Precision) -> Result<LogValue> {
        let values: Vec<Rational> = self.coeffs.values().cloned().collect();
        places::gauss_weil_vector_height(&values, prec)
    }
}

#[derive(Clone, Debug)]
pub struct SegreVeroneseMap {
    model: TorusModel,
    degrees: Vec<u32>,
    /// Full-coordinate exponent vectors, descending lex; the position in
    /// this list is the target coordinate index.
    monomials: Vec<MultiIndex>,
    positions: BTreeMap<MultiIndex, usize>,
}

impl SegreVeroneseMap {
    pub fn new(model: &TorusModel, degrees: &[u32]) -> Result<Self> {
        if degrees.len() != model.block_count() {
            return Err(CoreError::Malformed(format!(
                "{} embedding degrees for {} blocks",
                degrees.len(),
                model.block_count()
            )));
        }
        if degrees.iter().any(|&d| d == 0) {
            return Err(CoreError::Malformed(
                "embedding degrees must be at least 1".into(),
            ));
        }
        let expected = Self::expected_cardinality(model, degrees);
        if expected > Int::from(COORDINATE_CAP) {
            return Err(CoreError::Budget(format!(
                "embedding would need {expected} coordinates, cap is {COORDINATE_CAP}"
            )));
        }

        // Per block: all exponent vectors of the block degree, descending
        // lex; then the across-blocks product, outer blocks most
        // significant, which keeps the concatenation descending.
        let per_block: Vec<Vec<MultiIndex>> = model
            .block_dims()
            .iter()
            .zip(degrees)
            .map(|(&n, &d)| {
                let mut list = MultiIndex::all_of_total(n + 1, d);
                list.reverse();
                list
            })
            .collect();
        let mut monomials: Vec<MultiIndex> = vec![MultiIndex(Vec::new())];
        for block in &per_block {
            let mut next = Vec::with_capacity(monomials.len() * block.len());
            for head in &monomials {
                for tail in block {
                    let mut joined = head.0.clone();
                    joined.extend_from_slice(&tail.0);
                    next.push(MultiIndex(joined));
                }
            }
            monomials = next;
        }
        let positions: BTreeMap<MultiIndex, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(SegreVeroneseMap {
            model: model.clone(),
            degrees: degrees.to_vec(),
            monomials,
            positions,
        })
    }

    /// Closed-form coordinate count: the product over blocks of
    /// binom(n_l + delta_l, delta_l). The constructor enumerates the
    /// monomials independently, so the two can cross-check each other.
    pub fn expected_cardinality(model: &TorusModel, degrees: &[u32]) -> Int {
        model
            .block_dims()
            .iter()
            .zip(degrees)
            .map(|(&n, &d)| {
                num_integer::binomial(Int::from(n as u64 + u64::from(d)), Int::from(d))
            })
            .product()
    }

    pub fn model(&self) -> &TorusModel {
        &self.model
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn cardinality(&self) -> usize {
        self.monomials.len()
    }

    /// Target projective dimension: one less than the coordinate count.
    pub fn ambient_dim(&self) -> usize {
        self.monomials.len() - 1
    }

    /// The embedded point, one monomial value per target coordinate.
    pub fn embed_point(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        if x.len() != self.model.coord_count() {
            return Err(CoreError::Arity(x.len()));
        }
        Ok(self
            .monomials
            .iter()
            .map(|m| {
                let mut acc = Rational::one();
                for (pos, &e) in m.0.iter().enumerate() {
                    if e > 0 {
                        acc *= rational_pow(&x[pos], u32::from(e));
                    }
                }
                acc
            })
            .collect())
    }

    /// The linear section cutting out the form's image: the form's
    /// coefficients, repositioned onto the target coordinates.
    pub fn section(&self, form: &MultiForm) -> Result<LinearSection> {
        if form.multidegree() != self.degrees {
            return Err(CoreError::Malformed(format!(
                "form multidegree {:?} does not match the embedding degrees {:?}",
                form.multidegree(),
                self.degrees
            )));
        }
        let mut coeffs = BTreeMap::new();
        for (e, c) in form.poly().terms() {
            let pos = *self
                .positions
                .get(e)
                .expect("multidegree matched, so every exponent is a listed monomial");
            coeffs.insert(pos, c.clone());
        }
        Ok(LinearSection {
            coeffs,
            coords: self.monomials.len(),
        })
    }

    /// Exact round trip: the section evaluated on the embedded point equals
    /// the form at the source point, for each given point.
    pub fn roundtrip_check(&self, form: &MultiForm, points: &[Vec<Rational>]) -> Result<bool> {
        let section = self.section(form)?;
        for x in points {
            let direct = form.poly().eval(x);
            let through = section.eval(&self.embed_point(x)?)?;
            if direct != through {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Whether the section's coefficient height matches the form's at every
    /// place, as exact rationals. The coefficient multisets agree by
    /// construction; this verifies the stored data really does.
    pub fn height_transfer_exact(&self, form: &MultiForm) -> Result<bool> {
        let section = self.section(form)?;
        let form_coeffs: Vec<Rational> = form.poly().coefficients().cloned().collect();
        let section_coeffs: Vec<Rational> = section.coeffs.values().cloned().collect();
        let mut vs = places::relevant_places(&form_coeffs);
        for v in places::relevant_places(&section_coeffs) {
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        Ok(vs.iter().all(|v| {
            places::sup_abs_v(&form_coeffs, v) == places::sup_abs_v(&section_coeffs, v)
        }))
    }
}
