//! Finite lower sets of exponent vectors ("staircases") with block structure,
//! rational simplex truncations, Minkowski sums, extremal block functionals
//! and exact multiplicity volumes with an independent lattice oracle.
//!
//! A staircase lives in `N^g` where the `g` coordinates are partitioned into
//! consecutive blocks of sizes `(g_1, ..., g_p)`.  Membership is closed
//! downward: removing one from any coordinate of a member lands on another
//! member.  The closure property is asserted on every construction instead of
//! being silently repaired, so a violation always points at a real bug in the
//! caller.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::poly::MultiIndex;
use crate::{CoreError, Rational, Result};

/// Hard cap on enumerated members, shared by simplex enumeration and
/// Minkowski sums.  Requests past the cap return `CoreError::Budget` rather
/// than silently truncating.
pub const MEMBER_CAP: usize = 10_000_000;

fn check_blocks(blocks: &[usize]) -> Result<usize> {
    if blocks.is_empty() {
        return Err(CoreError::Malformed("block list is empty".into()));
    }
    if blocks.iter().any(|&b| b == 0) {
        return Err(CoreError::Malformed("zero-size block".into()));
    }
    Ok(blocks.iter().sum())
}

/// Maps each coordinate index to the index of the block containing it.
fn block_of_coordinate(blocks: &[usize]) -> Vec<usize> {
    let mut owner = Vec::with_capacity(blocks.iter().sum());
    for (ell, &size) in blocks.iter().enumerate() {
        owner.extend(std::iter::repeat(ell).take(size));
    }
    owner
}

/// Per-block coordinate sums of one exponent vector.
pub fn block_lengths(index: &MultiIndex, blocks: &[usize]) -> Vec<u32> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut at = 0;
    for &size in blocks {
        out.push(index.0[at..at + size].iter().map(|&e| u32::from(e)).sum());
        at += size;
    }
    out
}

/// True when every coordinate decrement of every member stays in the set.
pub fn is_lower_set(members: &BTreeSet<MultiIndex>) -> bool {
    members.iter().all(|m| {
        (0..m.arity()).all(|j| {
            if m.0[j] == 0 {
                return true;
            }
            let mut down = m.clone();
            down.0[j] -= 1;
            members.contains(&down)
        })
    })
}

/// A finite, downward-closed set of exponent vectors with a fixed block
/// partition of the coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Staircase {
    blocks: Vec<usize>,
    members: BTreeSet<MultiIndex>,
}

/// Extremal lengths of a nonempty staircase: the largest coordinate sum
/// inside each block and the largest total degree.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct StaircaseFunctionals {
    pub block_lengths: Vec<u32>,
    pub total_length: u32,
}

impl Staircase {
    /// Builds a staircase after checking arities, origin membership and
    /// downward closure.  An empty member set is allowed; a nonempty one must
    /// contain the origin (which downward closure already forces, but the
    /// direct check gives a sharper error).
    pub fn new(blocks: Vec<usize>, members: BTreeSet<MultiIndex>) -> Result<Self> {
        let g = check_blocks(&blocks)?;
        if let Some(bad) = members.iter().find(|m| m.arity() != g) {
            return Err(CoreError::Malformed(format!(
                "member arity {} does not fit {} coordinates",
                bad.arity(),
                g
            )));
        }
        if !members.is_empty() && !members.contains(&MultiIndex::zero(g)) {
            return Err(CoreError::Malformed(
                "nonempty staircase misses the origin".into(),
            ));
        }
        if !is_lower_set(&members) {
            return Err(CoreError::Malformed(
                "member set is not downward closed".into(),
            ));
        }
        Ok(Self { blocks, members })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Number of coordinates (the sum of the block sizes).
    pub fn arity(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn members(&self) -> &BTreeSet<MultiIndex> {
        &self.members
    }

    pub fn cardinality(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, index: &MultiIndex) -> bool {
        self.members.contains(index)
    }

    /// Pairwise sums of members, with the same block partition.  A sum of
    /// lower sets is again a lower set, so the constructor check doubles as
    /// an internal consistency assertion here.
    pub fn minkowski_sum(&self, other: &Staircase) -> Result<Staircase> {
        if self.blocks != other.blocks {
            return Err(CoreError::Malformed(
                "minkowski sum needs identical block partitions".into(),
            ));
        }
        let mut sums = BTreeSet::new();
        for a in &self.members {
            for b in &other.members {
                sums.insert(a.add(b));
                if sums.len() > MEMBER_CAP {
                    return Err(CoreError::Budget(format!(
                        "minkowski sum exceeds {MEMBER_CAP} members"
                    )));
                }
            }
        }
        Staircase::new(self.blocks.clone(), sums)
    }

    /// Members common to both staircases.  An intersection of lower sets is
    /// again a lower set.
    pub fn intersection(&self, other: &Staircase) -> Result<Staircase> {
        if self.blocks != other.blocks {
            return Err(CoreError::Malformed(
                "intersection needs identical block partitions".into(),
            ));
        }
        let common = self.members.intersection(&other.members).cloned().collect();
        Staircase::new(self.blocks.clone(), common)
    }

    pub fn is_subset_of(&self, other: &Staircase) -> bool {
        self.blocks == other.blocks && self.members.is_subset(&other.members)
    }

    /// Maximal block lengths and the maximal total degree over all members.
    /// Along the way every member is checked to split its total degree
    /// exactly across the blocks.  Empty staircases have no maxima and are
    /// rejected.
    pub fn functionals(&self) -> Result<StaircaseFunctionals> {
        if self.members.is_empty() {
            return Err(CoreError::Malformed(
                "functionals of an empty staircase".into(),
            ));
        }
        let mut maxima = vec![0u32; self.blocks.len()];
        let mut total = 0u32;
        for m in &self.members {
            let lengths = block_lengths(m, &self.blocks);
            if lengths.iter().sum::<u32>() != m.total() {
                return Err(CoreError::Malformed(format!(
                    "block lengths of {:?} do not add up to its degree",
                    m.0
                )));
            }
            for (slot, len) in maxima.iter_mut().zip(lengths) {
                *slot = (*slot).max(len);
            }
            total = total.max(m.total());
        }
        Ok(StaircaseFunctionals {
            block_lengths: maxima,
            total_length: total,
        })
    }
}

/// The rational simplex truncation: all exponent vectors whose block lengths
/// satisfy `sum_l |I_l| / delta_l < epsilon` with a strict inequality.  One
/// positive rational bound per block, one global positive rational radius.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexStaircase {
    blocks: Vec<usize>,
    delta: Vec<Rational>,
    epsilon: Rational,
}

impl SimplexStaircase {
    pub fn new(blocks: Vec<usize>, delta: Vec<Rational>, epsilon: Rational) -> Result<Self> {
        check_blocks(&blocks)?;
        if delta.len() != blocks.len() {
            return Err(CoreError::Malformed(format!(
                "{} block bounds for {} blocks",
                delta.len(),
                blocks.len()
            )));
        }
        if delta.iter().any(|d| !d.is_positive()) {
            return Err(CoreError::Malformed("block bound must be positive".into()));
        }
        if !epsilon.is_positive() {
            return Err(CoreError::Malformed("radius must be positive".into()));
        }
        Ok(Self {
            blocks,
            delta,
            epsilon,
        })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn arity(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn delta(&self) -> &[Rational] {
        &self.delta
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    /// The weight `sum_l |I_l| / delta_l` deciding membership.
    pub fn weight(&self, index: &MultiIndex) -> Result<Rational> {
        if index.arity() != self.arity() {
            return Err(CoreError::Arity(index.arity()));
        }
        let lengths = block_lengths(index, &self.blocks);
        let mut w = Rational::zero();
        for (len, d) in lengths.iter().zip(&self.delta) {
            w += Rational::from_integer((*len).into()) / d;
        }
        Ok(w)
    }

    pub fn contains(&self, index: &MultiIndex) -> Result<bool> {
        Ok(self.weight(index)? < self.epsilon)
    }

    /// Same blocks and bounds, radius scaled by an integer factor.
    pub fn scaled_radius(&self, factor: u32) -> Result<Self> {
        Self::new(
            self.blocks.clone(),
            self.delta.clone(),
            &self.epsilon * Rational::from_integer(factor.into()),
        )
    }

    /// Lists every member by depth-first search over the coordinates,
    /// pruning as soon as the accumulated weight reaches the radius.  The
    /// weight is linear in the exponents, so the prune is exact and the
    /// result is automatically downward closed; the `Staircase` constructor
    /// re-checks that all the same.
    pub fn enumerate(&self) -> Result<Staircase> {
        let g = self.arity();
        let owner = block_of_coordinate(&self.blocks);
        // Per-coordinate range check up front: coordinate j alone must keep
        // e_j / delta_b < epsilon, so e_j stays below epsilon * delta_b.
        // Exponents are stored in 16 bits; anything wider is out of scope.
        for (j, &b) in owner.iter().enumerate() {
            let reach = &self.epsilon * &self.delta[b];
            if reach > Rational::from_integer((u16::MAX as u32 + 1).into()) {
                return Err(CoreError::Budget(format!(
                    "coordinate {j} ranges past the 16-bit exponent limit"
                )));
            }
        }
        let mut members = BTreeSet::new();
        let mut cur = vec![0u16; g];
        self.collect(0, &owner, Rational::zero(), &mut cur, &mut members)?;
        Staircase::new(self.blocks.clone(), members)
    }

    fn collect(
        &self,
        j: usize,
        owner: &[usize],
        weight: Rational,
        cur: &mut Vec<u16>,
        members: &mut BTreeSet<MultiIndex>,
    ) -> Result<()> {
        if j == cur.len() {
            members.insert(MultiIndex(cur.clone()));
            if members.len() > MEMBER_CAP {
                return Err(CoreError::Budget(format!(
                    "enumeration exceeds {MEMBER_CAP} members"
                )));
            }
            return Ok(());
        }
        let step = Rational::one() / &self.delta[owner[j]];
        let mut e = 0u16;
        let mut w = weight;
        while w < self.epsilon {
            cur[j] = e;
            self.collect(j + 1, owner, w.clone(), cur, members)?;
            e += 1;
            w += &step;
        }
        cur[j] = 0;
        Ok(())
    }

    pub fn cardinality(&self) -> Result<usize> {
        Ok(self.enumerate()?.cardinality())
    }
}

/// Exact volume data for the restriction of a simplex staircase to a chosen
/// set of axes: the region `sum x_j / delta_block(j) < epsilon` with the
/// remaining coordinates frozen at zero.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct VolumeRecord {
    pub axes: Vec<usize>,
    /// `epsilon^k * prod_j delta_block(j) / k!` for `k` chosen axes.
    #[serde(serialize_with = "crate::ser::rat")]
    pub volume: Rational,
    /// `k!` times the volume, the multiplicity attached to the region.
    #[serde(serialize_with = "crate::ser::rat")]
    pub multiplicity: Rational,
}

fn check_axes(w: &SimplexStaircase, axes: &[usize]) -> Result<()> {
    if axes.is_empty() {
        return Err(CoreError::Malformed("no axes selected".into()));
    }
    let g = w.arity();
    if axes.iter().any(|&j| j >= g) {
        return Err(CoreError::Malformed(format!(
            "axis index out of range for {g} coordinates"
        )));
    }
    let distinct: BTreeSet<usize> = axes.iter().copied().collect();
    if distinct.len() != axes.len() {
        return Err(CoreError::Malformed("repeated axis index".into()));
    }
    Ok(())
}

/// Closed-form simplex volume along the chosen axes, exact in the rationals.
pub fn multiplicity_volume(w: &SimplexStaircase, axes: &[usize]) -> Result<VolumeRecord> {
    check_axes(w, axes)?;
    let owner = block_of_coordinate(w.blocks());
    let k = axes.len();
    let mut volume = Rational::one();
    for _ in 0..k {
        volume *= w.epsilon();
    }
    for &j in axes {
        volume *= &w.delta()[owner[j]];
    }
    let mut factorial = Rational::one();
    for i in 2..=k {
        factorial *= Rational::from_integer(i.into());
    }
    volume /= &factorial;
    let multiplicity = &volume * &factorial;
    Ok(VolumeRecord {
        axes: axes.to_vec(),
        volume,
        multiplicity,
    })
}

/// Midpoint lattice estimate of the same region, independent of the
/// closed-form volume.  The bounding box `prod [0, epsilon * delta_block(j))`
/// is cut into `refinement^k` congruent cells; a cell counts fully when its
/// midpoint lies strictly inside the simplex and half when the midpoint lies
/// exactly on the cut plane.  After scaling, the midpoint of cell `(i_1, ...,
/// i_k)` lies inside exactly when `sum (2 i_j + 1) < 2 * refinement`, an
/// integer comparison, so boundary cells are classified exactly and the only
/// error left is the genuine discretization error of order `refinement^-2`.
pub fn lattice_volume_estimate(
    w: &SimplexStaircase,
    axes: &[usize],
    refinement: u32,
) -> Result<Rational> {
    check_axes(w, axes)?;
    if refinement == 0 {
        return Err(CoreError::Malformed("zero refinement".into()));
    }
    let k = axes.len();
    let mut cells = 1u128;
    for _ in 0..k {
        cells = cells.saturating_mul(refinement as u128);
        if cells > 200_000_000 {
            return Err(CoreError::Budget(
                "lattice refinement grid is too large".into(),
            ));
        }
    }
    let mut inside = 0u64;
    let mut boundary = 0u64;
    count_cells(k, 2 * refinement as u64, 0, &mut inside, &mut boundary);
    // Each cell has volume epsilon * delta_block(j) / refinement per axis.
    let owner = block_of_coordinate(w.blocks());
    let mut cell_volume = Rational::one();
    for &j in axes {
        cell_volume *= w.epsilon() * &w.delta()[owner[j]]
            / Rational::from_integer(refinement.into());
    }
    let weighted = Rational::from_integer(inside.into())
        + Rational::from_integer(boundary.into()) / Rational::from_integer(2.into());
    Ok(weighted * cell_volume)
}

/// Walks the integer grid coordinate by coordinate, tracking the partial sum
/// of `2 i_j + 1`.  Remaining coordinates contribute at least one each, which
/// bounds the loop.
fn count_cells(left: usize, budget: u64, partial: u64, inside: &mut u64, boundary: &mut u64) {
    if left == 0 {
        if partial < budget {
            *inside += 1;
        } else if partial == budget {
            *boundary += 1;
        }
        return;
    }
    let mut term = 1u64;
    while partial + term + (left as u64 - 1) <= budget {
        count_cells(left - 1, budget, partial + term, inside, boundary);
        term += 2;
    }
}

/// Outcome of comparing a g-fold Minkowski sum of one simplex staircase with
/// the single staircase of radius scaled by g.  The sum always lands inside
/// the scaled staircase because weights add linearly; the reverse inclusion
/// can genuinely fail and the report lists the witnesses instead of asserting
/// anything about it.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SumComparisonReport {
    pub copies: u32,
    pub sum_cardinality: usize,
    pub scaled_cardinality: usize,
    pub sum_inside_scaled: bool,
    pub scaled_inside_sum: bool,
    /// Members of the scaled staircase missing from the iterated sum.
    pub missing_from_sum: Vec<MultiIndex>,
    /// Members of the iterated sum outside the scaled staircase (expected to
    /// stay empty; kept symmetric for the report).
    pub extra_in_sum: Vec<MultiIndex>,
}

/// Builds the `copies`-fold Minkowski sum of the enumerated staircase and
/// compares it against the staircase with radius `copies * epsilon`, both
/// directions, collecting counterexamples.
pub fn compare_iterated_sum(w: &SimplexStaircase, copies: u32) -> Result<SumComparisonReport> {
    if copies == 0 {
        return Err(CoreError::Malformed("zero copies in iterated sum".into()));
    }
    let single = w.enumerate()?;
    let mut sum = single.clone();
    for _ in 1..copies {
        sum = sum.minkowski_sum(&single)?;
    }
    let scaled = w.scaled_radius(copies)?.enumerate()?;
    let missing_from_sum: Vec<MultiIndex> = scaled
        .members()
        .difference(sum.members())
        .cloned()
        .collect();
    let extra_in_sum: Vec<MultiIndex> = sum
        .members()
        .difference(scaled.members())
        .cloned()
        .collect();
    Ok(SumComparisonReport {
        copies,
        sum_cardinality: sum.cardinality(),
        scaled_cardinality: scaled.cardinality(),
        sum_inside_scaled: extra_in_sum.is_empty(),
        scaled_inside_sum: missing_from_sum.is_empty(),
        missing_from_sum,
        extra_in_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(e: &[u16]) -> MultiIndex {
        MultiIndex(e.to_vec())
    }

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn simplex(blocks: &[usize], delta: &[(i64, i64)], eps: (i64, i64)) -> SimplexStaircase {
        SimplexStaircase::new(
            blocks.to_vec(),
            delta.iter().map(|&(n, d)| rat(n, d)).collect(),
            rat(eps.0, eps.1),
        )
        .unwrap()
    }

    #[test]
    fn two_block_unit_radius_staircase_has_five_members() {
        let w = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 1));
        let s = w.enumerate().unwrap();
        let expected: BTreeSet<MultiIndex> = [
            idx(&[0, 0]),
            idx(&[1, 0]),
            idx(&[2, 0]),
            idx(&[0, 1]),
            idx(&[1, 1]),
        ]
        .into_iter()
        .collect();
        assert_eq!(s.members(), &expected);
        let f = s.functionals().unwrap();
        assert_eq!(f.block_lengths, vec![2, 1]);
        assert_eq!(f.total_length, 2);
    }

    #[test]
    fn strict_inequality_cuts_the_boundary() {
        // 2/4 equals the radius 1/2 and must stay out.
        let w = simplex(&[1], &[(4, 1)], (1, 2));
        let s = w.enumerate().unwrap();
        let expected: BTreeSet<MultiIndex> = [idx(&[0]), idx(&[1])].into_iter().collect();
        assert_eq!(s.members(), &expected);
        assert!(!w.contains(&idx(&[2])).unwrap());
        assert!(w.contains(&idx(&[1])).unwrap());
    }

    #[test]
    fn tiny_radius_keeps_only_the_origin() {
        let w = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 10));
        let s = w.enumerate().unwrap();
        assert_eq!(s.cardinality(), 1);
        assert!(s.contains(&idx(&[0, 0])));
        let f = s.functionals().unwrap();
        assert_eq!(f.block_lengths, vec![0, 0]);
        assert_eq!(f.total_length, 0);
    }

    #[test]
    fn constructor_rejects_broken_sets() {
        let no_origin: BTreeSet<MultiIndex> = [idx(&[1])].into_iter().collect();
        assert!(Staircase::new(vec![1], no_origin).is_err());
        let gap: BTreeSet<MultiIndex> = [idx(&[0, 0]), idx(&[1, 1])].into_iter().collect();
        assert!(Staircase::new(vec![1, 1], gap).is_err());
        let wrong_arity: BTreeSet<MultiIndex> = [idx(&[0, 0])].into_iter().collect();
        assert!(Staircase::new(vec![1], wrong_arity).is_err());
        assert!(Staircase::new(vec![1], BTreeSet::new()).is_ok());
        assert!(Staircase::new(vec![], BTreeSet::new()).is_err());
    }

    #[test]
    fn simplex_constructor_rejects_bad_parameters() {
        assert!(SimplexStaircase::new(vec![1], vec![rat(0, 1)], rat(1, 1)).is_err());
        assert!(SimplexStaircase::new(vec![1], vec![rat(-2, 1)], rat(1, 1)).is_err());
        assert!(SimplexStaircase::new(vec![1], vec![rat(2, 1)], rat(0, 1)).is_err());
        assert!(SimplexStaircase::new(vec![1], vec![rat(2, 1), rat(2, 1)], rat(1, 1)).is_err());
        assert!(SimplexStaircase::new(vec![1, 0], vec![rat(2, 1), rat(2, 1)], rat(1, 1)).is_err());
    }

    #[test]
    fn minkowski_sum_of_intervals_concatenates_ranges() {
        let a = Staircase::new(
            vec![1],
            [idx(&[0]), idx(&[1])].into_iter().collect(),
        )
        .unwrap();
        let sum = a.minkowski_sum(&a).unwrap();
        let expected: BTreeSet<MultiIndex> =
            [idx(&[0]), idx(&[1]), idx(&[2])].into_iter().collect();
        assert_eq!(sum.members(), &expected);
    }

    #[test]
    fn origin_staircase_is_the_minkowski_identity() {
        let w = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 1));
        let a = w.enumerate().unwrap();
        let origin = Staircase::new(
            vec![1, 1],
            [idx(&[0, 0])].into_iter().collect(),
        )
        .unwrap();
        assert_eq!(a.minkowski_sum(&origin).unwrap(), a);
    }

    #[test]
    fn sums_and_intersections_demand_matching_blocks() {
        let a = Staircase::new(vec![1, 1], [idx(&[0, 0])].into_iter().collect()).unwrap();
        let b = Staircase::new(vec![2], [idx(&[0, 0])].into_iter().collect()).unwrap();
        assert!(a.minkowski_sum(&b).is_err());
        assert!(a.intersection(&b).is_err());
    }

    #[test]
    fn staircases_grow_with_the_radius_and_the_bounds() {
        let base = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 2));
        let wider = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 1));
        assert!(base.enumerate().unwrap().is_subset_of(&wider.enumerate().unwrap()));
        let slim = simplex(&[1, 1], &[(2, 1), (2, 1)], (1, 1));
        assert!(slim.enumerate().unwrap().is_subset_of(&wider.enumerate().unwrap()));
    }

    #[test]
    fn block_lengths_stay_under_radius_times_bound() {
        // t_l of the enumerated staircase never exceeds epsilon * delta_l.
        for num in 1..=6i64 {
            for den in 1..=3i64 {
                let w = simplex(&[2, 1], &[(5, 2), (7, 3)], (num, den));
                let s = w.enumerate().unwrap();
                let f = s.functionals().unwrap();
                for (ell, len) in f.block_lengths.iter().enumerate() {
                    let bound = w.epsilon() * &w.delta()[ell];
                    assert!(
                        Rational::from_integer((*len).into()) <= bound,
                        "block {ell} length {len} exceeds {bound} at radius {num}/{den}"
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_volume_matches_the_frozen_values() {
        // One axis: an interval of length epsilon * delta.
        let w1 = simplex(&[1], &[(5, 2)], (2, 1));
        let v1 = multiplicity_volume(&w1, &[0]).unwrap();
        assert_eq!(v1.volume, rat(5, 1));
        assert_eq!(v1.multiplicity, rat(5, 1));
        // Two axes of one block: a right triangle with both legs
        // epsilon * delta, area (2*2)/2 = 2 and multiplicity 4.
        let w2 = simplex(&[2], &[(2, 1)], (1, 1));
        let v2 = multiplicity_volume(&w2, &[0, 1]).unwrap();
        assert_eq!(v2.volume, rat(2, 1));
        assert_eq!(v2.multiplicity, rat(4, 1));
        // Mixed blocks: volume epsilon^2 * delta_1 * delta_2 / 2.
        let w3 = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 2));
        let v3 = multiplicity_volume(&w3, &[0, 1]).unwrap();
        assert_eq!(v3.volume, rat(3, 4));
        assert_eq!(v3.multiplicity, rat(3, 2));
    }

    #[test]
    fn volume_rejects_bad_axis_lists() {
        let w = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 1));
        assert!(multiplicity_volume(&w, &[]).is_err());
        assert!(multiplicity_volume(&w, &[0, 0]).is_err());
        assert!(multiplicity_volume(&w, &[2]).is_err());
    }

    #[test]
    fn lattice_estimate_agrees_with_the_closed_form() {
        let cases: Vec<(Vec<usize>, Vec<(i64, i64)>, (i64, i64), Vec<usize>)> = vec![
            (vec![1], vec![(5, 2)], (2, 1), vec![0]),
            (vec![2], vec![(2, 1)], (1, 1), vec![0, 1]),
            (vec![1, 1], vec![(3, 1), (2, 1)], (1, 2), vec![0, 1]),
            (vec![1, 2], vec![(7, 2), (3, 1)], (4, 3), vec![0, 1, 2]),
        ];
        for (blocks, delta, eps, axes) in cases {
            let w = simplex(&blocks, &delta, eps);
            let exact = multiplicity_volume(&w, &axes).unwrap().volume;
            let estimate = lattice_volume_estimate(&w, &axes, 64).unwrap();
            let gap = (&estimate - &exact).abs();
            assert!(
                gap <= rat(1, 100) * &exact,
                "lattice estimate {estimate} vs exact {exact} on axes {axes:?}"
            );
        }
    }

    #[test]
    fn one_axis_lattice_estimate_is_exact() {
        let w = simplex(&[1], &[(4, 1)], (1, 2));
        let estimate = lattice_volume_estimate(&w, &[0], 64).unwrap();
        assert_eq!(estimate, rat(2, 1));
    }

    #[test]
    fn iterated_sum_stays_inside_the_scaled_staircase() {
        let w = simplex(&[1, 1], &[(3, 1), (2, 1)], (1, 1));
        let report = compare_iterated_sum(&w, 2).unwrap();
        assert!(report.sum_inside_scaled);
        assert!(report.extra_in_sum.is_empty());
    }

    #[test]
    fn scaled_staircase_can_outgrow_the_iterated_sum() {
        // Radius 3/5 keeps only the origin, yet doubling the radius admits
        // the unit vectors: the reverse inclusion genuinely fails.
        let w = simplex(&[1, 1], &[(1, 1), (1, 1)], (3, 5));
        let report = compare_iterated_sum(&w, 2).unwrap();
        assert_eq!(report.sum_cardinality, 1);
        assert!(report.sum_inside_scaled);
        assert!(!report.scaled_inside_sum);
        assert!(report.missing_from_sum.contains(&idx(&[1, 0])));
        assert!(report.missing_from_sum.contains(&idx(&[0, 1])));
    }

    #[test]
    fn enumeration_budget_trips_on_oversized_requests() {
        let w = simplex(&[1], &[(100_000, 1)], (1_000, 1));
        assert!(matches!(w.enumerate(), Err(CoreError::Budget(_))));
    }
}
