//! Difference operators on forms over a product of split tori, the calculus
//! they obey, and growth certificates for the families they generate.
//!
//! The ambient object is a product of p blocks; block l carries projective
//! coordinates X_{l,0}, ..., X_{l,n_l}, and operator indices live over the
//! affine coordinates only (one slot per X_{l,i} with i >= 1). The operator
//! with index I rescales the coefficient of each monomial X^j by the product
//! of binomial coefficients binom(j, I) over the affine positions and lands
//! in shadow coordinates Y. Equivalently, it reads off the T^I coefficient
//! of P(..., X_{l,i} (1 + T_{l,i}), ...); both routes are implemented so one
//! can certify the other.
//!
//! On top of the operators: the sum and product rules, vanishing of a form
//! along a staircase of indices at a torus point (with an independent
//! expansion oracle), the constants expressing a composition of two
//! operators in the operator basis, coefficient tables for products of
//! chart rows, and exact per-place plus global height certificates for the
//! families of chart coefficients raised to such products.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::chart::{self, GroupChart};
use crate::exec::map_blocks;
use crate::implicit::rational_pow;
use crate::logval::{ln2, LogValue, Precision};
use crate::places::{self, Place};
use crate::poly::{MultiIndex, SparsePolynomial, MAX_ARITY};
use crate::staircase::Staircase;
use crate::verdict::Verdict;
use crate::{CoreError, Int, Rational, Result};

/// A product of p split torus blocks; block l has dimension n_l and sits in
/// P_{n_l} with one extra homogenizing coordinate. Operator indices have one
/// slot per affine coordinate, g = n_1 + ... + n_p slots in total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusModel {
    blocks: Vec<usize>,
}

impl TorusModel {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(CoreError::Malformed(
                "torus model needs at least one block".into(),
            ));
        }
        if blocks.iter().any(|&n| n == 0) {
            return Err(CoreError::Malformed(
                "torus blocks need dimension >= 1".into(),
            ));
        }
        Ok(TorusModel { blocks })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Group dimension g, the number of operator-index slots.
    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Total coordinate count, one homogenizing coordinate per block.
    pub fn coord_count(&self) -> usize {
        self.dim() + self.block_count()
    }

    fn names(&self, prefix: char, skip_zero: bool) -> Vec<String> {
        let mut out = Vec::new();
        for (l, &n) in self.blocks.iter().enumerate() {
            let start = usize::from(skip_zero);
            for i in start..=n {
                if self.blocks.len() == 1 {
                    out.push(format!("{prefix}{i}"));
                } else {
                    out.push(format!("{prefix}{}_{i}", l + 1));
                }
            }
        }
        out
    }

    /// Source coordinates X, one per projective coordinate of each block.
    pub fn x_vars(&self) -> Vec<String> {
        self.names('X', false)
    }

    /// Target coordinates Y, parallel to the X layout.
    pub fn y_vars(&self) -> Vec<String> {
        self.names('Y', false)
    }

    /// Expansion variables T, one per operator-index slot.
    pub fn t_vars(&self) -> Vec<String> {
        self.names('T', true)
    }

    /// Coordinate position of each operator-index slot, in slot order.
    pub fn affine_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut base = 0;
        for &n in &self.blocks {
            out.extend((base + 1)..=(base + n));
            base += n + 1;
        }
        out
    }

    /// The all-ones point, one value per coordinate.
    pub fn neutral(&self) -> Vec<Rational> {
        vec![Rational::one(); self.coord_count()]
    }

    /// Exact height of the model: the sum over blocks of the projective
    /// space height of the block's ambient space.
    pub fn height(&self) -> Rational {
        self.blocks
            .iter()
            .map(|&n| chart::projective_space_height(n as u64))
            .sum()
    }

    /// The bare chart of block l: the torus in P_{n_l} around the all-ones
    /// point, with no dependent coordinates.
    pub fn block_chart(&self, l: usize) -> Result<GroupChart> {
        let n = *self
            .blocks
            .get(l)
            .ok_or_else(|| CoreError::Malformed(format!("block {l} out of range")))?;
        GroupChart::new(n, vec![Rational::one(); n + 1], Vec::new())
    }
}

/// A nonzero polynomial over the model's X coordinates, homogeneous in each
/// block separately; the per-block degrees form the multidegree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiForm {
    blocks: Vec<usize>,
    multidegree: Vec<u32>,
    poly: SparsePolynomial,
}

impl MultiForm {
    pub fn new(model: &TorusModel, poly: SparsePolynomial) -> Result<Self> {
        if poly.vars() != model.x_vars().as_slice() {
            return Err(CoreError::VarMismatch(format!(
                "form variables {:?} do not match the model coordinates",
                poly.vars()
            )));
        }
        if poly.is_zero() {
            return Err(CoreError::Degenerate(
                "the zero polynomial is not a form".into(),
            ));
        }
        let sizes: Vec<usize> = model.block_dims().iter().map(|&n| n + 1).collect();
        let multidegree = poly.multihomogeneous_degree(&sizes).ok_or_else(|| {
            CoreError::Malformed("form is not homogeneous within every block".into())
        })?;
        Ok(MultiForm {
            blocks: model.block_dims().to_vec(),
            multidegree,
            poly,
        })
    }

    pub fn model(&self) -> TorusModel {
        TorusModel::new(self.blocks.clone()).expect("blocks were validated")
    }

    pub fn poly(&self) -> &SparsePolynomial {
        &self.poly
    }

    pub fn multidegree(&self) -> &[u32] {
        &self.multidegree
    }
}

/// Pads an operator index out to the full coordinate layout, zero at the
/// homogenizing positions.
fn full_index(model: &TorusModel, index: &MultiIndex) -> Result<MultiIndex> {
    if index.arity() != model.dim() {
        return Err(CoreError::Arity(index.arity()));
    }
    let mut full = vec![0u16; model.coord_count()];
    for (a, &pos) in model.affine_positions().iter().enumerate() {
        full[pos] = index.0[a];
    }
    Ok(MultiIndex(full))
}

/// All indices componentwise at most `bound`, ascending lex.
fn sub_indices(bound: &MultiIndex) -> Vec<MultiIndex> {
    fn rec(k: usize, bound: &[u16], cur: &mut Vec<u16>, out: &mut Vec<MultiIndex>) {
        if k == bound.len() {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for v in 0..=bound[k] {
            cur[k] = v;
            rec(k + 1, bound, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, &bound.0, &mut vec![0u16; bound.arity()], &mut out);
    out
}

/// Closed route on a raw polynomial over the model's X coordinates: scale
/// the coefficient of X^j by binom(j, I) over the affine positions and
/// rename to Y. The sum and product rules need operands, such as
/// differences of forms, that may fail the form conditions, so this does
/// not insist on a [`MultiForm`].
pub fn delta_poly(
    model: &TorusModel,
    poly: &SparsePolynomial,
    index: &MultiIndex,
) -> Result<SparsePolynomial> {
    if poly.arity() != model.coord_count() {
        return Err(CoreError::Arity(poly.arity()));
    }
    let full = full_index(model, index)?;
    let mut out = SparsePolynomial::zero_owned(model.y_vars());
    for (e, c) in poly.terms() {
        let b = MultiIndex::binomial(e, &full);
        if !b.is_zero() {
            out.insert_add(e.clone(), c * Rational::from_integer(b));
        }
    }
    Ok(out)
}

/// The operator with the given index applied to a form, closed route.
pub fn delta_closed(form: &MultiForm, index: &MultiIndex) -> Result<SparsePolynomial> {
    delta_poly(&form.model(), form.poly(), index)
}

/// The operator with the given index applied to a form by substitution:
/// replace each affine coordinate X_a by Y_a (1 + T_a), expand exactly, and
/// read off the coefficient of T^I. Independent of the closed route.
pub fn delta_subst(form: &MultiForm, index: &MultiIndex) -> Result<SparsePolynomial> {
    let model = form.model();
    if index.arity() != model.dim() {
        return Err(CoreError::Arity(index.arity()));
    }
    let g = model.dim();
    let coords = model.coord_count();
    if g + coords > MAX_ARITY {
        return Err(CoreError::Arity(g + coords));
    }
    let mut vars: Vec<String> = model.t_vars();
    vars.extend(model.y_vars());
    let vrefs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    let affine = model.affine_positions();

    // 1 + T_a over the combined (T, Y) variables, one per index slot.
    let shifts: Vec<SparsePolynomial> = (0..g)
        .map(|a| {
            let mut p =
                SparsePolynomial::monomial(&vrefs, MultiIndex::zero(g + coords), Rational::one());
            p.insert_add(MultiIndex::unit(g + coords, a), Rational::one());
            p
        })
        .collect();

    let mut acc = SparsePolynomial::zero(&vrefs);
    for (e, c) in form.poly().terms() {
        let mut exp = vec![0u16; g + coords];
        for (pos, &k) in e.0.iter().enumerate() {
            exp[g + pos] = k;
        }
        let mut term = SparsePolynomial::monomial(&vrefs, MultiIndex(exp), c.clone());
        for (a, &pos) in affine.iter().enumerate() {
            if e.0[pos] > 0 {
                term = term.mul(&shifts[a].pow(u32::from(e.0[pos])));
            }
        }
        acc = acc.add(&term);
    }
    let t_positions: Vec<usize> = (0..g).collect();
    let mut split = acc.split_coefficients(&t_positions);
    Ok(split
        .remove(index)
        .unwrap_or_else(|| SparsePolynomial::zero_owned(model.y_vars())))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DeltaIdentityReport {
    pub index: MultiIndex,
    pub additive_ok: bool,
    pub product_ok: bool,
    /// Delta^I(P + Q) - Delta^I P - Delta^I Q, when nonzero.
    pub additive_gap: Option<SparsePolynomial>,
    /// Delta^I(P Q) - sum over J <= I of Delta^J P * Delta^(I-J) Q, when
    /// nonzero.
    pub product_gap: Option<SparsePolynomial>,
}

impl DeltaIdentityReport {
    pub fn ok(&self) -> bool {
        self.additive_ok && self.product_ok
    }
}

/// Checks the sum rule and the convolution product rule for the operator
/// with the given index on two forms over the same model, exactly; a failed
/// rule returns the offending difference polynomial.
pub fn verify_delta_identities(
    p: &MultiForm,
    q: &MultiForm,
    index: &MultiIndex,
) -> Result<DeltaIdentityReport> {
    if p.blocks != q.blocks {
        return Err(CoreError::VarMismatch(
            "identity check needs both forms over the same model".into(),
        ));
    }
    let model = p.model();

    let sum = p.poly().add(q.poly());
    let lhs_add = delta_poly(&model, &sum, index)?;
    let rhs_add = delta_poly(&model, p.poly(), index)?.add(&delta_poly(&model, q.poly(), index)?);
    let additive_gap = lhs_add.sub(&rhs_add);

    let product = p.poly().mul(q.poly());
    let lhs_prod = delta_poly(&model, &product, index)?;
    let mut rhs_prod = SparsePolynomial::zero_owned(model.y_vars());
    for j in sub_indices(index) {
        let k = index.checked_sub(&j).expect("j is componentwise below");
        rhs_prod = rhs_prod
            .add(&delta_poly(&model, p.poly(), &j)?.mul(&delta_poly(&model, q.poly(), &k)?));
    }
    let product_gap = lhs_prod.sub(&rhs_prod);

    Ok(DeltaIdentityReport {
        index: index.clone(),
        additive_ok: additive_gap.is_zero(),
        product_ok: product_gap.is_zero(),
        additive_gap: (!additive_gap.is_zero()).then_some(additive_gap),
        product_gap: (!product_gap.is_zero()).then_some(product_gap),
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct VanishingReport {
    pub vanishes: bool,
    /// Staircase indices whose operator value at the point is nonzero,
    /// with the values.
    #[serde(serialize_with = "crate::ser::index_rat_pairs")]
    pub witnesses: Vec<(MultiIndex, Rational)>,
}

fn check_torus_point(model: &TorusModel, point: &[Rational], w: &Staircase) -> Result<()> {
    if point.len() != model.coord_count() {
        return Err(CoreError::Arity(point.len()));
    }
    if point.iter().any(|c| c.is_zero()) {
        return Err(CoreError::Degenerate(
            "vanishing checks need a point with every coordinate nonzero".into(),
        ));
    }
    if w.arity() != model.dim() {
        return Err(CoreError::Arity(w.arity()));
    }
    Ok(())
}

/// Whether every operator indexed by the staircase kills the form at the
/// point. The point must lie on the torus (no zero coordinate); an empty
/// staircase is vacuously killed. Members are checked in parallel.
pub fn vanishing_multiplicity_check(
    form: &MultiForm,
    point: &[Rational],
    w: &Staircase,
) -> Result<VanishingReport> {
    let model = form.model();
    check_torus_point(&model, point, w)?;
    let members: Vec<&MultiIndex> = w.members().iter().collect();
    let values: Vec<Rational> = map_blocks(members.len() as u64, |i| {
        delta_closed(form, members[i as usize])
            .expect("arity was validated")
            .eval(point)
    });
    let witnesses: Vec<(MultiIndex, Rational)> = members
        .into_iter()
        .zip(values)
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, v)| (i.clone(), v))
        .collect();
    Ok(VanishingReport {
        vanishes: witnesses.is_empty(),
        witnesses,
    })
}

/// Independent route to the same verdict: expand P(..., x_a (1 + T_a), ...)
/// at the point as a polynomial in T and inspect its coefficients over the
/// staircase. Agrees with [`vanishing_multiplicity_check`] witness for
/// witness because the T^I coefficient of the expansion is the operator
/// value at the point.
pub fn vanishing_multiplicity_oracle(
    form: &MultiForm,
    point: &[Rational],
    w: &Staircase,
) -> Result<VanishingReport> {
    let model = form.model();
    check_torus_point(&model, point, w)?;
    let g = model.dim();
    let tvars = model.t_vars();
    let trefs: Vec<&str> = tvars.iter().map(|s| s.as_str()).collect();
    let affine = model.affine_positions();

    let shifts: Vec<SparsePolynomial> = (0..g)
        .map(|a| {
            let mut p = SparsePolynomial::monomial(&trefs, MultiIndex::zero(g), Rational::one());
            p.insert_add(MultiIndex::unit(g, a), Rational::one());
            p
        })
        .collect();

    let mut acc = SparsePolynomial::zero(&trefs);
    for (e, c) in form.poly().terms() {
        let mut scalar = c.clone();
        for (pos, &k) in e.0.iter().enumerate() {
            scalar *= rational_pow(&point[pos], u32::from(k));
        }
        let mut term = SparsePolynomial::monomial(&trefs, MultiIndex::zero(g), scalar);
        for (a, &pos) in affine.iter().enumerate() {
            if e.0[pos] > 0 {
                term = term.mul(&shifts[a].pow(u32::from(e.0[pos])));
            }
        }
        acc = acc.add(&term);
    }

    let witnesses: Vec<(MultiIndex, Rational)> = w
        .members()
        .iter()
        .filter_map(|i| {
            let v = acc.coeff(i);
            (!v.is_zero()).then(|| (i.clone(), v))
        })
        .collect();
    Ok(VanishingReport {
        vanishes: witnesses.is_empty(),
        witnesses,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CompositionReport {
    /// Constants c_L, zero entries omitted.
    #[serde(serialize_with = "crate::ser::index_rat_map")]
    pub constants: BTreeMap<MultiIndex, Rational>,
    /// Whether Delta^I Delta^J P = sum of c_L Delta^L P held exactly on the
    /// supplied form.
    pub verified: bool,
}

/// One coordinate of the composition constants: c_0..c_{i+j} solved from
/// binom(x, i) binom(x, j) = sum over l of c_l binom(x, l) at
/// x = 0, ..., i + j. The system is unit triangular, so the solve is a
/// forward substitution and cannot fail.
fn composition_column(i: u32, j: u32) -> Vec<Rational> {
    let scalar_binom =
        |x: u32, l: u32| Rational::from_integer(num_integer::binomial(Int::from(x), Int::from(l)));
    let mut col: Vec<Rational> = Vec::with_capacity((i + j) as usize + 1);
    for x in 0..=(i + j) {
        let mut t = scalar_binom(x, i) * scalar_binom(x, j);
        for (l, c) in col.iter().enumerate() {
            t -= c * scalar_binom(x, l as u32);
        }
        col.push(t);
    }
    col
}

/// Constants expressing the composition of the operators with indices I and
/// J as a combination of single operators, per coordinate on a single-block
/// model, then verified exactly against the supplied form by applying the
/// operators (pulling the intermediate result back to the X side).
pub fn delta_composition(
    form: &MultiForm,
    i: &MultiIndex,
    j: &MultiIndex,
) -> Result<CompositionReport> {
    let model = form.model();
    if model.block_count() != 1 {
        return Err(CoreError::Malformed(
            "composition constants act per block; pass a single-block model".into(),
        ));
    }
    let g = model.dim();
    if i.arity() != g {
        return Err(CoreError::Arity(i.arity()));
    }
    if j.arity() != g {
        return Err(CoreError::Arity(j.arity()));
    }

    let per_coord: Vec<Vec<Rational>> = (0..g)
        .map(|a| composition_column(u32::from(i.0[a]), u32::from(j.0[a])))
        .collect();
    let mut constants = BTreeMap::new();
    for l in sub_indices(&i.add(j)) {
        let mut c = Rational::one();
        for (a, col) in per_coord.iter().enumerate() {
            c *= &col[l.0[a] as usize];
        }
        if !c.is_zero() {
            constants.insert(l, c);
        }
    }

    let x_vars = model.x_vars();
    let xrefs: Vec<&str> = x_vars.iter().map(|s| s.as_str()).collect();
    let inner = delta_poly(&model, form.poly(), j)?.rename(&xrefs);
    let lhs = delta_poly(&model, &inner, i)?;
    let mut rhs = SparsePolynomial::zero_owned(model.y_vars());
    for (l, c) in &constants {
        let scale = SparsePolynomial::monomial(
            &model.y_vars().iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            MultiIndex::zero(model.coord_count()),
            c.clone(),
        );
        rhs = rhs.add(&delta_poly(&model, form.poly(), l)?.mul(&scale));
    }

    Ok(CompositionReport {
        verified: lhs.sub(&rhs).is_zero(),
        constants,
    })
}

/// Multiplies two truncated index series, dropping everything past the cap.
fn series_mul(
    a: &BTreeMap<MultiIndex, Rational>,
    b: &BTreeMap<MultiIndex, Rational>,
    cap: u32,
) -> BTreeMap<MultiIndex, Rational> {
    let mut out: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
    for (ia, ca) in a {
        if ca.is_zero() {
            continue;
        }
        for (ib, cb) in b {
            if cb.is_zero() || ia.total() + ib.total() > cap {
                continue;
            }
            *out.entry(ia.add(ib)).or_insert_with(Rational::zero) += ca * cb;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// prod over coordinates i of (row_i)^(e_i), truncated at the cap; rows are
/// chart coefficient tables indexed over N^g.
fn table_product(
    rows: &[BTreeMap<MultiIndex, Rational>],
    exponents: &MultiIndex,
    g: usize,
    cap: u32,
) -> BTreeMap<MultiIndex, Rational> {
    let mut acc: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
    acc.insert(MultiIndex::zero(g), Rational::one());
    for (row, &e) in rows.iter().zip(&exponents.0) {
        for _ in 0..e {
            acc = series_mul(&acc, row, cap);
        }
    }
    acc
}

/// Coefficient table of the product of chart coordinate series raised to
/// the given exponents, through total order `truncation`. Entry keys are
/// operator indices; zero entries are omitted.
pub fn coefficient_table_c(
    chart: &GroupChart,
    exponents: &MultiIndex,
    truncation: u32,
) -> Result<BTreeMap<MultiIndex, Rational>> {
    if exponents.arity() != chart.ambient_dim() + 1 {
        return Err(CoreError::Arity(exponents.arity()));
    }
    let rows = chart.table(truncation)?;
    Ok(table_product(&rows, exponents, chart.g(), truncation))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FamilyPlaceCheck {
    pub place: Place,
    /// max(1, largest member absolute value) at the place.
    #[serde(serialize_with = "crate::ser::rat")]
    pub lhs: Rational,
    #[serde(serialize_with = "crate::ser::rat")]
    pub rhs: Rational,
    /// log(rhs / lhs); nonnegative when the bound holds.
    pub margin: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PowerFamilyReport {
    pub k: u32,
    pub order: u32,
    pub doubled: bool,
    /// One entry per place for the family of k-fold products of chart
    /// coefficients with total index budget `order`.
    pub product_checks: Vec<FamilyPlaceCheck>,
    /// One entry per place for the family of coefficient-table entries over
    /// all exponent vectors of total k.
    pub table_checks: Vec<FamilyPlaceCheck>,
    pub product_height: f64,
    pub product_height_bound: f64,
    pub product_verdict: Verdict,
    pub table_height: f64,
    pub table_height_bound: f64,
    pub table_verdict: Verdict,
    pub ok: bool,
}

/// Every k-fold product a^(i_1)_{I_1} ... a^(i_k)_{I_k} of chart
/// coefficients with |I_1| + ... + |I_k| <= m, deduplicated. Zero factors
/// are dropped: they never attain a maximum, since 1 is in the family.
fn product_family(
    rows: &[BTreeMap<MultiIndex, Rational>],
    k: u32,
    m: u32,
) -> Vec<Rational> {
    let entries: Vec<(u32, &Rational)> = rows
        .iter()
        .flat_map(|row| row.iter())
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (i.total(), c))
        .collect();
    fn rec(
        entries: &[(u32, &Rational)],
        start: usize,
        left: u32,
        budget: u32,
        acc: &Rational,
        out: &mut std::collections::BTreeSet<Rational>,
    ) {
        if left == 0 {
            out.insert(acc.clone());
            return;
        }
        for t in start..entries.len() {
            let (total, value) = &entries[t];
            if *total > budget {
                continue;
            }
            rec(entries, t, left - 1, budget - total, &(acc * *value), out);
        }
    }
    let mut out = std::collections::BTreeSet::new();
    rec(&entries, 0, k, m, &Rational::one(), &mut out);
    out.into_iter().collect()
}

/// Every entry of every coefficient table with exponent total k, truncated
/// at order m, deduplicated.
fn table_family(
    rows: &[BTreeMap<MultiIndex, Rational>],
    g: usize,
    k: u32,
    m: u32,
) -> Vec<Rational> {
    let mut out = std::collections::BTreeSet::new();
    for exponents in MultiIndex::all_of_total(rows.len(), k) {
        out.extend(table_product(rows, &exponents, g, m).into_values());
    }
    out.into_iter().collect()
}

fn sup_norm_v(values: &[Rational], v: &Place) -> Rational {
    let mut best = Rational::one();
    for x in values {
        let a = places::abs_v(x, v);
        if a > best {
            best = a;
        }
    }
    best
}

fn power_of_two(exp: u32) -> Rational {
    Rational::from_integer(Int::from(1) << (exp as usize))
}

/// Certifies the growth of the two power families built from a chart's
/// coefficient tables: k-fold plain products with index budget `order`, and
/// the table entries of exponent total k. Per place the family maximum is
/// compared exactly against s_v^(k g) * E_v^order * H_v(e)^k, with
/// E_v = s_v F_v for F_v the chart growth bracket and, for the table
/// family at the archimedean place, an extra factor 2^(order + g(k-1))
/// covering the number of summands that can collide in one table entry.
/// Globally the family heights are compared against the corresponding sums
/// of logs. With `doubled` unset the scale s is 1 everywhere, the sharper
/// variant satisfied by translates at the unit itself; set it for the
/// general constants (s = 2 at the archimedean place).
///
/// Places are the union of the requested ones and every place that can see
/// the family, the bracket, or the neutral point, so the global heights are
/// exact.
pub fn verify_power_family_bounds(
    chart: &GroupChart,
    k: u32,
    order: u32,
    extra_places: &[Place],
    prec: Precision,
    doubled: bool,
) -> Result<PowerFamilyReport> {
    if k == 0 {
        return Err(CoreError::Malformed("power families need k >= 1".into()));
    }
    let g = chart.g();
    let d = chart.degree();
    let rows = chart.table(order)?;
    let products = product_family(&rows, k, order);
    let tables = table_family(&rows, g, k, order);

    let mut support = chart::bracket_support(chart)?;
    support.extend(products.iter().cloned());
    support.extend(tables.iter().cloned());
    let mut places_all = places::relevant_places(&support);
    for v in extra_places {
        if !places_all.contains(v) {
            places_all.push(*v);
        }
    }
    places_all.sort();

    let kg = k * g as u32;
    let mut product_checks = Vec::new();
    let mut table_checks = Vec::new();
    let mut product_height = LogValue::zero(prec);
    let mut table_height = LogValue::zero(prec);
    let mut log_f = LogValue::zero(prec);
    let mut h_e = LogValue::zero(prec);
    for v in &places_all {
        let f_v = chart::growth_bracket_v(chart, v, d)?;
        let he_v = places::log_sup_norm_v(chart.neutral(), v);
        let s_pow = if doubled && !v.is_finite() {
            power_of_two(kg)
        } else {
            Rational::one()
        };
        let e_v = if doubled && !v.is_finite() {
            &f_v * power_of_two(1)
        } else {
            f_v.clone()
        };
        let base = s_pow * rational_pow(&e_v, order) * rational_pow(&he_v, k);
        let r_factor = if v.is_finite() {
            Rational::one()
        } else {
            power_of_two(order + g as u32 * (k - 1))
        };

        let lhs_prod = sup_norm_v(&products, v);
        let lhs_tab = sup_norm_v(&tables, v);
        let rhs_prod = base.clone();
        let rhs_tab = base * r_factor;
        product_checks.push(FamilyPlaceCheck {
            place: *v,
            margin: LogValue::ln_rational(&(&rhs_prod / &lhs_prod), prec).to_f64(),
            ok: lhs_prod <= rhs_prod,
            lhs: lhs_prod.clone(),
            rhs: rhs_prod,
        });
        table_checks.push(FamilyPlaceCheck {
            place: *v,
            margin: LogValue::ln_rational(&(&rhs_tab / &lhs_tab), prec).to_f64(),
            ok: lhs_tab <= rhs_tab,
            lhs: lhs_tab.clone(),
            rhs: rhs_tab,
        });
        product_height += &LogValue::ln_rational(&lhs_prod, prec);
        table_height += &LogValue::ln_rational(&lhs_tab, prec);
        log_f += &LogValue::ln_rational(&f_v, prec);
        h_e += &LogValue::ln_rational(&he_v, prec);
    }

    let log_s = if doubled {
        ln2(prec)
    } else {
        LogValue::zero(prec)
    };
    let log_e = log_f + if doubled { ln2(prec) } else { LogValue::zero(prec) };
    let product_bound =
        log_e.scale_i64(i64::from(order)) + (h_e.clone() + log_s.scale_i64(g as i64)).scale_i64(i64::from(k));
    let table_bound = (log_e + ln2(prec)).scale_i64(i64::from(order))
        + (h_e + (log_s + ln2(prec)).scale_i64(g as i64)).scale_i64(i64::from(k));

    let product_verdict =
        Verdict::classify((&product_bound - &product_height).to_f64(), 1e-9);
    let table_verdict = Verdict::classify((&table_bound - &table_height).to_f64(), 1e-9);
    let ok = product_checks.iter().all(|c| c.ok)
        && table_checks.iter().all(|c| c.ok)
        && !product_verdict.is_failure()
        && !table_verdict.is_failure();

    Ok(PowerFamilyReport {
        k,
        order,
        doubled,
        product_checks,
        table_checks,
        product_height: product_height.to_f64(),
        product_height_bound: product_bound.to_f64(),
        product_verdict,
        table_height: table_height.to_f64(),
        table_height_bound: table_bound.to_f64(),
        table_verdict,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::tests_support::parse_poly;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::collections::BTreeSet;

    fn gm1() -> TorusModel {
        TorusModel::new(vec![1]).unwrap()
    }

    fn form(model: &TorusModel, src: &str) -> MultiForm {
        let vars = model.x_vars();
        let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        MultiForm::new(model, parse_poly(&refs, src)).unwrap()
    }

    fn y_poly(model: &TorusModel, src: &str) -> SparsePolynomial {
        let vars = model.y_vars();
        let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        parse_poly(&refs, src)
    }

    fn idx(e: &[u16]) -> MultiIndex {
        MultiIndex(e.to_vec())
    }

    fn q(n: i64) -> Rational {
        Rational::from_integer(Int::from(n))
    }

    fn staircase(blocks: Vec<usize>, members: &[&[u16]]) -> Staircase {
        let set: BTreeSet<MultiIndex> = members.iter().map(|m| idx(m)).collect();
        Staircase::new(blocks, set).unwrap()
    }

    fn random_form(model: &TorusModel, deg_cap: u32, rng: &mut impl Rng) -> MultiForm {
        let sizes: Vec<usize> = model.block_dims().iter().map(|&n| n + 1).collect();
        let degrees: Vec<u32> = sizes.iter().map(|_| rng.gen_range(1..=deg_cap)).collect();
        loop {
            let mut p = SparsePolynomial::zero_owned(model.x_vars());
            for _ in 0..5 {
                let mut exp: Vec<u16> = Vec::new();
                for (&s, &d) in sizes.iter().zip(&degrees) {
                    let mut part = vec![0u16; s];
                    for _ in 0..d {
                        part[rng.gen_range(0..s)] += 1;
                    }
                    exp.extend(part);
                }
                p.insert_add(MultiIndex(exp), q(rng.gen_range(-5..=5)));
            }
            if !p.is_zero() {
                return MultiForm::new(model, p).unwrap();
            }
        }
    }

    #[test]
    fn model_bookkeeping_and_naming() {
        let m = gm1();
        assert_eq!(m.x_vars(), ["X0", "X1"]);
        assert_eq!(m.t_vars(), ["T1"]);
        assert_eq!(m.affine_positions(), [1]);

        let mm = TorusModel::new(vec![2, 1]).unwrap();
        assert_eq!(mm.dim(), 3);
        assert_eq!(mm.coord_count(), 5);
        assert_eq!(mm.x_vars(), ["X1_0", "X1_1", "X1_2", "X2_0", "X2_1"]);
        assert_eq!(mm.t_vars(), ["T1_1", "T1_2", "T2_1"]);
        assert_eq!(mm.affine_positions(), [1, 2, 4]);
        assert_eq!(
            mm.height(),
            chart::projective_space_height(2) + chart::projective_space_height(1)
        );

        assert!(TorusModel::new(vec![]).is_err());
        assert!(TorusModel::new(vec![1, 0]).is_err());
    }

    #[test]
    fn form_constructor_rejects_bad_input() {
        let m = gm1();
        let wrong_vars = parse_poly(&["Y0", "Y1"], "Y1");
        assert!(MultiForm::new(&m, wrong_vars).is_err());
        let zero = SparsePolynomial::zero(&["X0", "X1"]);
        assert!(MultiForm::new(&m, zero).is_err());
        let mixed = parse_poly(&["X0", "X1"], "X0 + X1^2");
        assert!(MultiForm::new(&m, mixed).is_err());
        assert_eq!(form(&m, "X1^2 - X0*X1").multidegree(), [2]);
    }

    #[test]
    fn worked_difference_triple_on_the_binomial_square() {
        let m = gm1();
        let p = form(&m, "X1^2 - 2*X0*X1 + X0^2");
        assert_eq!(
            delta_closed(&p, &idx(&[0])).unwrap(),
            y_poly(&m, "Y1^2 - 2*Y0*Y1 + Y0^2")
        );
        assert_eq!(
            delta_closed(&p, &idx(&[1])).unwrap(),
            y_poly(&m, "2*Y1^2 - 2*Y0*Y1")
        );
        assert_eq!(delta_closed(&p, &idx(&[2])).unwrap(), y_poly(&m, "Y1^2"));
        assert!(delta_closed(&p, &idx(&[3])).unwrap().is_zero());
        for i in 0u16..=3 {
            assert_eq!(
                delta_closed(&p, &idx(&[i])).unwrap(),
                delta_subst(&p, &idx(&[i])).unwrap()
            );
        }
        assert!(delta_closed(&p, &idx(&[0, 0])).is_err());
    }

    #[test]
    fn zero_index_is_a_rename() {
        let m = TorusModel::new(vec![1, 1]).unwrap();
        let vars = m.x_vars();
        let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        let p = MultiForm::new(
            &m,
            parse_poly(&refs, "X1_1^2*X2_1 - X1_0*X1_1*X2_0"),
        )
        .unwrap();
        let yrefs = m.y_vars();
        let expected = p
            .poly()
            .rename(&yrefs.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        assert_eq!(delta_closed(&p, &idx(&[0, 0])).unwrap(), expected);
        assert_eq!(delta_subst(&p, &idx(&[0, 0])).unwrap(), expected);
    }

    #[test]
    fn closed_and_substitution_routes_agree() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(41);
        for blocks in [vec![2], vec![1, 1]] {
            let model = TorusModel::new(blocks).unwrap();
            for _ in 0..12 {
                let p = random_form(&model, 3, &mut rng);
                for index in MultiIndex::all_upto(model.dim(), 3) {
                    assert_eq!(
                        delta_closed(&p, &index).unwrap(),
                        delta_subst(&p, &index).unwrap(),
                        "routes split on {:?} at {:?}",
                        p.poly(),
                        index
                    );
                }
            }
        }
    }

    #[test]
    fn difference_preserves_the_multidegree() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(43);
        let model = TorusModel::new(vec![1, 2]).unwrap();
        let sizes: Vec<usize> = model.block_dims().iter().map(|&n| n + 1).collect();
        for _ in 0..10 {
            let p = random_form(&model, 3, &mut rng);
            for index in MultiIndex::all_upto(model.dim(), 2) {
                let image = delta_closed(&p, &index).unwrap();
                if !image.is_zero() {
                    assert_eq!(
                        image.multihomogeneous_degree(&sizes).as_deref(),
                        Some(p.multidegree())
                    );
                }
            }
        }
    }

    #[test]
    fn sum_and_product_rules_hold_exactly() {
        let m = gm1();
        // Product rule on P = Q = X1 at index 1 is the two-term convolution
        // Y1 * Y1 + Y1 * Y1 = 2 Y1^2, which is also the closed image of X1^2.
        let linear = form(&m, "X1");
        let report = verify_delta_identities(&linear, &linear, &idx(&[1])).unwrap();
        assert!(report.ok());
        assert_eq!(
            delta_closed(&form(&m, "X1^2"), &idx(&[1])).unwrap(),
            y_poly(&m, "2*Y1^2")
        );

        // A scalar factor reduces the convolution to a single term.
        let one = form(&m, "1");
        let p = form(&m, "X1^2 - 2*X0*X1 + X0^2");
        let report = verify_delta_identities(&p, &one, &idx(&[2])).unwrap();
        assert!(report.ok());

        let mut rng = Xoshiro256PlusPlus::seed_from_u64(47);
        let model = TorusModel::new(vec![1, 1]).unwrap();
        for _ in 0..10 {
            let p = random_form(&model, 2, &mut rng);
            let q = random_form(&model, 2, &mut rng);
            for index in MultiIndex::all_upto(2, 2) {
                let report = verify_delta_identities(&p, &q, &index).unwrap();
                assert!(report.additive_ok, "sum rule failed at {index:?}");
                assert!(report.product_ok, "product rule failed at {index:?}");
            }
        }
    }

    #[test]
    fn vanishing_checks_match_the_expansion_oracle() {
        let m = gm1();
        let square = form(&m, "X1^2 - 2*X0*X1 + X0^2");
        let at_one = [q(1), q(1)];

        let low = staircase(vec![1], &[&[0], &[1]]);
        let report = vanishing_multiplicity_check(&square, &at_one, &low).unwrap();
        assert!(report.vanishes);

        let full = staircase(vec![1], &[&[0], &[1], &[2]]);
        let report = vanishing_multiplicity_check(&square, &at_one, &full).unwrap();
        assert!(!report.vanishes);
        assert_eq!(report.witnesses, vec![(idx(&[2]), q(1))]);

        let line = form(&m, "X1 - X0");
        let report =
            vanishing_multiplicity_check(&line, &[q(1), q(2)], &staircase(vec![1], &[&[0]]))
                .unwrap();
        assert_eq!(report.witnesses, vec![(idx(&[0]), q(1))]);

        let empty = Staircase::new(vec![1], BTreeSet::new()).unwrap();
        assert!(vanishing_multiplicity_check(&square, &at_one, &empty)
            .unwrap()
            .vanishes);

        assert!(matches!(
            vanishing_multiplicity_check(&square, &[q(0), q(1)], &low),
            Err(CoreError::Degenerate(_))
        ));

        let mut rng = Xoshiro256PlusPlus::seed_from_u64(53);
        let model = TorusModel::new(vec![2]).unwrap();
        let w = Staircase::new(
            vec![2],
            MultiIndex::all_upto(2, 2).into_iter().collect(),
        )
        .unwrap();
        for _ in 0..8 {
            let p = random_form(&model, 3, &mut rng);
            let point: Vec<Rational> =
                (0..3).map(|_| q(rng.gen_range(1..=4))).collect();
            let a = vanishing_multiplicity_check(&p, &point, &w).unwrap();
            let b = vanishing_multiplicity_oracle(&p, &point, &w).unwrap();
            assert_eq!(a.vanishes, b.vanishes);
            assert_eq!(a.witnesses, b.witnesses);
        }
    }

    #[test]
    fn composition_constants_match_the_hand_solve() {
        let m = gm1();
        let p = form(&m, "X1^3 - 2*X0^2*X1");
        let report = delta_composition(&p, &idx(&[1]), &idx(&[1])).unwrap();
        assert!(report.verified);
        let expected: BTreeMap<MultiIndex, Rational> =
            [(idx(&[1]), q(1)), (idx(&[2]), q(2))].into_iter().collect();
        assert_eq!(report.constants, expected);

        // A zero index on one side leaves the other operator unchanged.
        let report = delta_composition(&p, &idx(&[0]), &idx(&[2])).unwrap();
        assert!(report.verified);
        assert_eq!(
            report.constants,
            [(idx(&[2]), q(1))].into_iter().collect()
        );

        let two_blocks = TorusModel::new(vec![1, 1]).unwrap();
        let vars = two_blocks.x_vars();
        let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        let mf = MultiForm::new(&two_blocks, parse_poly(&refs, "X1_1*X2_1")).unwrap();
        assert!(delta_composition(&mf, &idx(&[1, 0]), &idx(&[0, 1])).is_err());

        let mut rng = Xoshiro256PlusPlus::seed_from_u64(59);
        let model = TorusModel::new(vec![2]).unwrap();
        for _ in 0..10 {
            let p = random_form(&model, 3, &mut rng);
            let budget = rng.gen_range(0..=4u32);
            let i = idx(&[
                rng.gen_range(0..=budget) as u16,
                rng.gen_range(0..=1) as u16,
            ]);
            let left = budget.saturating_sub(u32::from(i.0[0]) + u32::from(i.0[1]));
            let j = idx(&[rng.gen_range(0..=left) as u16, 0]);
            let report = delta_composition(&p, &i, &j).unwrap();
            assert!(report.verified, "composition failed for {i:?}, {j:?}");
        }
    }

    #[test]
    fn coefficient_tables_from_chart_rows() {
        let torus = GroupChart::new(1, vec![q(1), q(1)], Vec::new()).unwrap();
        let table = coefficient_table_c(&torus, &idx(&[0, 2]), 2).unwrap();
        let expected: BTreeMap<MultiIndex, Rational> =
            [(idx(&[0]), q(1)), (idx(&[1]), q(2)), (idx(&[2]), q(1))]
                .into_iter()
                .collect();
        assert_eq!(table, expected);

        let cut = coefficient_table_c(&torus, &idx(&[0, 2]), 1).unwrap();
        assert_eq!(
            cut,
            [(idx(&[0]), q(1)), (idx(&[1]), q(2))].into_iter().collect()
        );

        let trivial = coefficient_table_c(&torus, &idx(&[0, 0]), 3).unwrap();
        assert_eq!(trivial, [(idx(&[0]), q(1))].into_iter().collect());

        let constant_row = coefficient_table_c(&torus, &idx(&[2, 0]), 2).unwrap();
        assert_eq!(constant_row, [(idx(&[0]), q(1))].into_iter().collect());

        assert!(coefficient_table_c(&torus, &idx(&[1]), 2).is_err());
    }

    #[test]
    fn power_family_bounds_hold_on_small_charts() {
        let prec = Precision::new(128);
        let torus = GroupChart::new(1, vec![q(1), q(1)], Vec::new()).unwrap();
        for doubled in [false, true] {
            let report =
                verify_power_family_bounds(&torus, 2, 2, &[], prec, doubled).unwrap();
            assert!(report.ok, "torus family bounds failed, doubled={doubled}");
            assert!(!report.product_verdict.is_failure());
            assert!(!report.table_verdict.is_failure());
        }

        // One dependent coordinate with denominators: x2 = x1^2 around
        // (1 : 1/2 : 1/4), so the finite place 2 carries real content.
        let conic = GroupChart::new(
            1,
            vec![q(1), Rational::new(Int::from(1), Int::from(2)),
                 Rational::new(Int::from(1), Int::from(4))],
            vec![parse_poly(&["X0", "X1", "X2"], "X0*X2 - X1^2")],
        )
        .unwrap();
        let report = verify_power_family_bounds(&conic, 2, 2, &[], prec, true).unwrap();
        assert!(report.ok);
        assert!(report
            .product_checks
            .iter()
            .any(|c| c.place == Place::Finite(2)));
        let report = verify_power_family_bounds(&conic, 1, 2, &[], prec, false).unwrap();
        assert!(report.ok);

        assert!(matches!(
            verify_power_family_bounds(&torus, 0, 2, &[], prec, true),
            Err(CoreError::Malformed(_))
        ));
    }
}
