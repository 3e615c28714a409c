//! Batch frontend for the exact-arithmetic verification toolkit.
//!
//! One-shot commands inspect a single polynomial, staircase or chart;
//! `campaign` generates seeded instance families and certifies every
//! requested inequality, emitting machine-readable reports. Reports are
//! byte-reproducible: the same configuration always renders the same bytes,
//! and wall-clock stamps live in an opt-in envelope field so they never
//! break that contract.

pub mod campaign;
pub mod gen;
pub mod report;
pub mod single;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use polycert_core::chart::GroupChart;
use polycert_core::group::{MultiForm, TorusModel};
use polycert_core::implicit::ImplicitProblem;
use polycert_core::logval::parse_rational;
use polycert_core::{Place, Rational, SparsePolynomial};

/// Output layout: one pretty JSON document, or compact JSON Lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Jsonl,
}

/// Parses a canonical rational token (`p/q` or `p`).
pub fn rational_flag(s: &str) -> Result<Rational> {
    parse_rational(s.trim()).ok_or_else(|| anyhow!("not a rational: {s:?}"))
}

/// Parses a comma-separated list of rationals.
pub fn rational_list(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(rational_flag).collect()
}

/// Parses a comma-separated list of place tokens (`inf`, `p:<prime>`),
/// sorted and deduplicated.
pub fn place_list(tokens: &[String]) -> Result<Vec<Place>> {
    let mut out = Vec::new();
    for t in tokens {
        for part in t.split(',').filter(|p| !p.is_empty()) {
            let v: Place = part.parse().with_context(|| format!("place {part:?}"))?;
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// An implicit-function instance in wire form: the defining polynomial
/// (variables `Y1..Yn, T`), the base point as canonical rationals, and the
/// degree cap passed to the series machinery.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImplicitSpec {
    pub poly: SparsePolynomial,
    pub base: Vec<String>,
    pub degree_bound: u32,
}

impl ImplicitSpec {
    pub fn from_parts(poly: SparsePolynomial, base: &[Rational], degree_bound: u32) -> Self {
        ImplicitSpec {
            poly,
            base: base.iter().map(|x| x.to_string()).collect(),
            degree_bound,
        }
    }

    pub fn base_point(&self) -> Result<Vec<Rational>> {
        self.base.iter().map(|s| rational_flag(s)).collect()
    }

    pub fn build(&self) -> Result<ImplicitProblem> {
        Ok(ImplicitProblem::new(
            self.poly.clone(),
            self.base_point()?,
            self.degree_bound,
        )?)
    }
}

/// A group chart in wire form: group dimension, neutral point coordinates
/// and one defining form per dependent coordinate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartSpec {
    pub g: usize,
    pub neutral: Vec<String>,
    pub forms: Vec<SparsePolynomial>,
}

impl ChartSpec {
    pub fn from_parts(g: usize, neutral: &[Rational], forms: Vec<SparsePolynomial>) -> Self {
        ChartSpec {
            g,
            neutral: neutral.iter().map(|x| x.to_string()).collect(),
            forms,
        }
    }

    pub fn build(&self) -> Result<GroupChart> {
        let neutral: Vec<Rational> = self
            .neutral
            .iter()
            .map(|s| rational_flag(s))
            .collect::<Result<_>>()?;
        Ok(GroupChart::new(self.g, neutral, self.forms.clone())?)
    }
}

/// A multihomogeneous form in wire form: torus block dimensions plus the
/// polynomial over the block coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiFormSpec {
    pub blocks: Vec<usize>,
    pub poly: SparsePolynomial,
}

impl MultiFormSpec {
    pub fn model(&self) -> Result<TorusModel> {
        Ok(TorusModel::new(self.blocks.clone())?)
    }

    pub fn build(&self) -> Result<MultiForm> {
        Ok(MultiForm::new(&self.model()?, self.poly.clone())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_polynomial_round_trips_through_the_documented_shape() {
        let src = r#"{"vars": ["Y1", "T"],
                      "terms": [{"exp": [0, 2], "coef": "1"},
                                {"exp": [1, 0], "coef": "-1"}]}"#;
        let p: SparsePolynomial = serde_json::from_str(src).unwrap();
        assert_eq!(p.vars(), ["Y1", "T"]);
        assert_eq!(p.num_terms(), 2);
        let back = serde_json::to_string(&p).unwrap();
        let again: SparsePolynomial = serde_json::from_str(&back).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn place_lists_parse_sort_and_reject_junk() {
        let v = place_list(&["p:7,inf".into(), "p:2".into()]).unwrap();
        assert_eq!(v, [Place::Infinite, Place::Finite(2), Place::Finite(7)]);
        assert!(place_list(&["p:6".into()]).is_err());
        assert!(place_list(&["q:3".into()]).is_err());
    }

    #[test]
    fn implicit_spec_builds_the_problem_it_serializes() {
        let src = r#"{"poly": {"vars": ["Y1", "T"],
                                "terms": [{"exp": [0, 2], "coef": "1"},
                                          {"exp": [1, 0], "coef": "-1"}]},
                      "base": ["1", "1"],
                      "degree_bound": 2}"#;
        let spec: ImplicitSpec = serde_json::from_str(src).unwrap();
        let problem = spec.build().unwrap();
        assert_eq!(problem.n(), 1);
        assert!(problem.p().eval(&spec.base_point().unwrap()).is_zero());
    }
}
