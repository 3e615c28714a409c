//! Serialization helpers for report fields holding exact rationals.
//!
//! Rationals are emitted as canonical `p/q` strings (matching the
//! coefficient encoding of the polynomial wire format) rather than
//! numerator/denominator pairs, so reports stay lossless and diff-able.

use std::collections::BTreeMap;

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::poly::MultiIndex;
use crate::Rational;

pub(crate) fn rat<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(q)
}

pub(crate) fn rats<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for q in v {
        seq.serialize_element(&q.to_string())?;
    }
    seq.end()
}

#[derive(Serialize)]
struct IndexedValue<'a> {
    index: &'a MultiIndex,
    value: String,
}

pub(crate) fn index_rat_pairs<S: Serializer>(
    v: &[(MultiIndex, Rational)],
    s: S,
) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (index, q) in v {
        seq.serialize_element(&IndexedValue { index, value: q.to_string() })?;
    }
    seq.end()
}

/// JSON objects need string keys, so an index-keyed map flattens to an
/// array of index/value entries, in the map's own (deterministic) order.
pub(crate) fn index_rat_map<S: Serializer>(
    m: &BTreeMap<MultiIndex, Rational>,
    s: S,
) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for (index, q) in m {
        seq.serialize_element(&IndexedValue { index, value: q.to_string() })?;
    }
    seq.end()
}
