//! Closed-form budgets for the multiplicity endgame.
//!
//! Every function here evaluates the right-hand side of one inequality: the
//! height budget of the family of difference operators applied to a form,
//! the degree and height brackets delivered by the descent through
//! obstruction varieties, the refined bracket driven by a local chart of the
//! group, the cascade over a product of factors, and the fully explicit
//! chain for products of tori where every group constant collapses to a
//! known value.
//!
//! Nothing here inspects a variety. The inputs are the scalar invariants
//! (dimensions, degrees, heights, growth rates) that the caller certifies
//! elsewhere; the outputs are the brackets those invariants must fit under.
//! Degree sides stay exact integers or rationals. Height sides are log
//! values assembled from exact pieces, so two evaluations of the same input
//! agree bit for bit. Out-of-range hypotheses (an epsilon above one, a
//! weight chain with too small a gap) are never clamped: the evaluators
//! compute the formula as given and [`cascade_hypotheses`] reports which
//! preconditions actually hold.

use num_traits::{One, Zero};

use crate::chart::{self, chart_height_bound};
use crate::group::{delta_closed, MultiForm, TorusModel};
use crate::implicit::rational_pow;
use crate::logval::{ln2, LogValue, Precision};
use crate::places;
use crate::poly::MultiIndex;
use crate::verdict::Verdict;
use crate::{CoreError, Int, Rational, Result};

/// Bidegree (c, c') of the biform family representing the group addition;
/// both entries are at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdditionBidegree {
    pub c: u32,
    pub c_prime: u32,
}

impl AdditionBidegree {
    pub fn new(c: u32, c_prime: u32) -> Result<Self> {
        if c == 0 || c_prime == 0 {
            return Err(CoreError::Malformed(
                "addition bidegree needs c >= 1 and c' >= 1".into(),
            ));
        }
        Ok(AdditionBidegree { c, c_prime })
    }

    /// Total degree c + c' of a single addition form.
    pub fn total(&self) -> u32 {
        self.c + self.c_prime
    }
}

/// Per-factor data entering the operator family budget: the growth rate
/// log E of the factor's chart coefficients, the cap on the factor's share
/// of the operator index, the factor's embedding weight, the height of its
/// neutral coordinates and its dimension.
#[derive(Clone, Debug)]
pub struct FamilyBlock {
    pub log_growth: LogValue,
    pub index_budget: u32,
    pub weight: u32,
    pub neutral_height: LogValue,
    pub dim: u32,
}

/// Inputs of the operator family budget: one block per factor, the scale
/// log s absorbed by a single chart coefficient at an archimedean place,
/// the degree and height of the form, the height and bidegree of the
/// addition forms, and the dimension N of the joint ambient projective
/// space. The group dimension is the sum of the block dimensions.
#[derive(Clone, Debug)]
pub struct OperatorFamilyInputs {
    pub blocks: Vec<FamilyBlock>,
    pub log_scale: LogValue,
    pub form_degree: u32,
    pub form_height: LogValue,
    pub addition_height: LogValue,
    pub bidegree: AdditionBidegree,
    pub ambient: u64,
}

impl OperatorFamilyInputs {
    fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(CoreError::Malformed(
                "operator family budget needs at least one block".into(),
            ));
        }
        for (l, b) in self.blocks.iter().enumerate() {
            if b.index_budget == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: index budget must be >= 1"
                )));
            }
            if b.weight == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: weight must be >= 1"
                )));
            }
            if b.dim == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: dimension must be >= 1"
                )));
            }
        }
        if self.ambient == 0 {
            return Err(CoreError::Malformed(
                "ambient dimension must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn group_dim(&self) -> i64 {
        self.blocks.iter().map(|b| i64::from(b.dim)).sum()
    }
}

/// Height budget of the family of all operator images of one form whose
/// per-block index shares stay within the block budgets:
///
///   sum_l (log E_l + log 2) m_l
///     + c delta (g log 2 + sum_l delta_l (h(e_l) + g_l log s))
///     + h(P) + delta h(A) + delta (2c + c' + 1) log(N + 1).
pub fn operator_family_height_bound(
    inp: &OperatorFamilyInputs,
    prec: Precision,
) -> Result<LogValue> {
    inp.validate()?;
    let c = i64::from(inp.bidegree.c);
    let cp = i64::from(inp.bidegree.c_prime);
    let delta = i64::from(inp.form_degree);
    let g = inp.group_dim();

    let mut total = LogValue::zero(prec);
    let mut weighted = ln2(prec).scale_i64(g);
    for b in &inp.blocks {
        total += &(&b.log_growth + &ln2(prec)).scale_i64(i64::from(b.index_budget));
        weighted += &(&b.neutral_height + &inp.log_scale.scale_i64(i64::from(b.dim)))
            .scale_i64(i64::from(b.weight));
    }
    total += &weighted.scale_i64(c * delta);
    total += &inp.form_height;
    total += &inp.addition_height.scale_i64(delta);
    total += &LogValue::ln_u64(inp.ambient + 1, prec).scale_i64(delta * (2 * c + cp + 1));
    Ok(total)
}

/// Exact degree side of the descent bracket: deg G * (c' delta)^(g - d),
/// the cap on multiplicity times degree of a d-dimensional obstruction
/// inside a g-dimensional group cut by translates of degree c' delta.
pub fn multiplicity_degree_bound(
    group_degree: u64,
    bidegree: &AdditionBidegree,
    form_degree: u32,
    dim: u32,
    obstruction_dim: u32,
) -> Result<Int> {
    if group_degree == 0 {
        return Err(CoreError::Malformed("group degree must be >= 1".into()));
    }
    if form_degree == 0 {
        return Err(CoreError::Malformed("form degree must be >= 1".into()));
    }
    if dim == 0 {
        return Err(CoreError::Malformed("group dimension must be >= 1".into()));
    }
    if obstruction_dim > dim {
        return Err(CoreError::Malformed(format!(
            "obstruction dimension {obstruction_dim} exceeds the group dimension {dim}"
        )));
    }
    let base = Int::from(bidegree.c_prime) * Int::from(form_degree);
    Ok(Int::from(group_degree) * base.pow(dim - obstruction_dim))
}

/// Per-factor data entering the descent height bracket: the growth rate of
/// the factor's chart coefficients, the factor's largest share of the
/// summed staircase, its embedding weight, the height of its neutral
/// coordinates and its dimension.
#[derive(Clone, Debug)]
pub struct MultiplicityBlock {
    pub log_growth: LogValue,
    pub staircase_share: u32,
    pub weight: u32,
    pub neutral_height: LogValue,
    pub dim: u32,
}

/// Inputs of the descent height bracket. The group dimension g is the sum
/// of the block dimensions; the obstruction dimension d must satisfy
/// d <= g - 1 so that the bracket's multiplier deg G * (c' delta)^(g-d-1)
/// is defined.
#[derive(Clone, Debug)]
pub struct MultiplicityBoundInputs {
    pub group_degree: u64,
    pub group_height: LogValue,
    pub obstruction_dim: u32,
    pub form_degree: u32,
    pub form_height: LogValue,
    pub addition_height: LogValue,
    pub bidegree: AdditionBidegree,
    pub ambient: u64,
    pub blocks: Vec<MultiplicityBlock>,
    pub log_scale: LogValue,
}

impl MultiplicityBoundInputs {
    fn validate(&self) -> Result<u32> {
        if self.blocks.is_empty() {
            return Err(CoreError::Malformed(
                "descent bracket needs at least one block".into(),
            ));
        }
        for (l, b) in self.blocks.iter().enumerate() {
            if b.weight == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: weight must be >= 1"
                )));
            }
            if b.dim == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: dimension must be >= 1"
                )));
            }
        }
        if self.group_degree == 0 {
            return Err(CoreError::Malformed("group degree must be >= 1".into()));
        }
        if self.form_degree == 0 {
            return Err(CoreError::Malformed("form degree must be >= 1".into()));
        }
        if self.ambient == 0 {
            return Err(CoreError::Malformed(
                "ambient dimension must be >= 1".into(),
            ));
        }
        let g: u32 = self.blocks.iter().map(|b| b.dim).sum();
        if self.obstruction_dim + 1 > g {
            return Err(CoreError::Malformed(format!(
                "obstruction dimension {} needs group dimension at least {} (got {g})",
                self.obstruction_dim,
                self.obstruction_dim + 1
            )));
        }
        Ok(g)
    }
}

/// Height side of the descent bracket:
///
///   h(G) (c' delta)^(g-d)
///     + g [ sum_l (log E_l + log 2) t_l
///           + c delta (sum_l delta_l (h(e_l) + g_l log s) + g log 2)
///           + h(P) + delta h(A) + delta (2c + 2c' + 1)(log N + 1)
///           + 3 log(deg G (c' delta)^g + 1) ] deg G (c' delta)^(g-d-1).
pub fn multiplicity_height_bound(
    inp: &MultiplicityBoundInputs,
    prec: Precision,
) -> Result<LogValue> {
    let g = inp.validate()?;
    let c = i64::from(inp.bidegree.c);
    let cp = i64::from(inp.bidegree.c_prime);
    let delta = i64::from(inp.form_degree);

    let mut inner = LogValue::zero(prec);
    let mut weighted = ln2(prec).scale_i64(i64::from(g));
    for b in &inp.blocks {
        inner += &(&b.log_growth + &ln2(prec)).scale_i64(i64::from(b.staircase_share));
        weighted += &(&b.neutral_height + &inp.log_scale.scale_i64(i64::from(b.dim)))
            .scale_i64(i64::from(b.weight));
    }
    inner += &weighted.scale_i64(c * delta);
    inner += &inp.form_height;
    inner += &inp.addition_height.scale_i64(delta);
    inner += &(LogValue::ln_u64(inp.ambient, prec) + LogValue::from_f64(1.0))
        .scale_i64(delta * (2 * c + 2 * cp + 1));

    let cut = Int::from(inp.bidegree.c_prime) * Int::from(inp.form_degree);
    let saturated = Int::from(inp.group_degree) * cut.pow(g) + Int::one();
    inner += &LogValue::ln_rational(&Rational::from_integer(saturated), prec).scale_i64(3);

    let multiplier = Rational::from_integer(
        Int::from(inp.group_degree) * cut.pow(g - inp.obstruction_dim - 1),
    );
    let leading = inp.group_height.scale_rational(
        &Rational::from_integer(Int::from(inp.group_degree) * cut.pow(g - inp.obstruction_dim)),
        prec,
    );
    Ok(leading
        + inner
            .scale_i64(i64::from(g))
            .scale_rational(&multiplier, prec))
}

/// Inputs of the refined descent bracket, where the per-block growth data
/// is replaced by the closed-form chart budget of the group itself and the
/// staircase enters only through its radius max |I|.
#[derive(Clone, Debug)]
pub struct RefinedMultiplicityInputs {
    pub ambient: u64,
    pub dim: u32,
    pub group_degree: u64,
    pub group_height: LogValue,
    pub neutral_height: LogValue,
    pub obstruction_dim: u32,
    pub form_degree: u32,
    pub form_height: LogValue,
    pub addition_height: LogValue,
    pub bidegree: AdditionBidegree,
    pub staircase_radius: u64,
}

/// Height side of the refined descent bracket:
///
///   h(G) (c' delta)^(g-d)
///     + g [ f(N, G, e) max|I| + c delta (h(e) + g log 2) + h(P)
///           + delta h(A) + delta (2(c + c') + 1)(log N + 1)
///           + 3 log(deg G (c' delta)^g + 1) ] deg G (c' delta)^(g-d-1),
///
/// with f(N, G, e) the chart budget of [`chart_height_bound`].
pub fn refined_multiplicity_height_bound(
    inp: &RefinedMultiplicityInputs,
    prec: Precision,
) -> Result<LogValue> {
    if inp.form_degree == 0 {
        return Err(CoreError::Malformed("form degree must be >= 1".into()));
    }
    if inp.obstruction_dim + 1 > inp.dim {
        return Err(CoreError::Malformed(format!(
            "obstruction dimension {} needs group dimension at least {} (got {})",
            inp.obstruction_dim,
            inp.obstruction_dim + 1,
            inp.dim
        )));
    }
    let chart_budget = chart_height_bound(
        inp.ambient,
        u64::from(inp.dim),
        inp.group_degree,
        &inp.group_height,
        &inp.neutral_height,
        prec,
    )?;
    let c = i64::from(inp.bidegree.c);
    let delta = i64::from(inp.form_degree);
    let g = i64::from(inp.dim);

    let mut inner = chart_budget.scale_rational(
        &Rational::from_integer(Int::from(inp.staircase_radius)),
        prec,
    );
    inner += &(&inp.neutral_height + &ln2(prec).scale_i64(g)).scale_i64(c * delta);
    inner += &inp.form_height;
    inner += &inp.addition_height.scale_i64(delta);
    inner += &(LogValue::ln_u64(inp.ambient, prec) + LogValue::from_f64(1.0))
        .scale_i64(delta * (2 * i64::from(inp.bidegree.total()) + 1));

    let cut = Int::from(inp.bidegree.c_prime) * Int::from(inp.form_degree);
    let saturated = Int::from(inp.group_degree) * cut.pow(inp.dim) + Int::one();
    inner += &LogValue::ln_rational(&Rational::from_integer(saturated), prec).scale_i64(3);

    let multiplier = Rational::from_integer(
        Int::from(inp.group_degree) * cut.pow(inp.dim - inp.obstruction_dim - 1),
    );
    let leading = inp.group_height.scale_rational(
        &Rational::from_integer(
            Int::from(inp.group_degree) * cut.pow(inp.dim - inp.obstruction_dim),
        ),
        prec,
    );
    Ok(leading + inner.scale_i64(g).scale_rational(&multiplier, prec))
}

/// One factor of a product group: its ambient projective dimension, its
/// dimension, degree and height, the heights of its neutral coordinates and
/// addition forms, and its weight in the staircase.
#[derive(Clone, Debug)]
pub struct CascadeBlock {
    pub ambient: u64,
    pub dim: u32,
    pub group_degree: u64,
    pub group_height: LogValue,
    pub neutral_height: LogValue,
    pub addition_height: LogValue,
    pub weight: u64,
}

/// Inputs of the cascade over a product of factors. All factors share the
/// addition bidegree; epsilon is the staircase opening and the obstruction
/// dimension is the dimension of the product variety the cascade ends on.
#[derive(Clone, Debug)]
pub struct CascadeInputs {
    pub blocks: Vec<CascadeBlock>,
    pub epsilon: Rational,
    pub bidegree: AdditionBidegree,
    pub form_height: LogValue,
    pub obstruction_dim: u32,
}

impl CascadeInputs {
    fn validate(&self) -> Result<u32> {
        if self.blocks.is_empty() {
            return Err(CoreError::Malformed(
                "cascade needs at least one block".into(),
            ));
        }
        for (l, b) in self.blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: dimension must be >= 1"
                )));
            }
            if b.group_degree == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: group degree must be >= 1"
                )));
            }
            if b.weight == 0 {
                return Err(CoreError::Malformed(format!(
                    "block {l}: weight must be >= 1"
                )));
            }
            if b.ambient < u64::from(b.dim) {
                return Err(CoreError::Malformed(format!(
                    "block {l}: ambient dimension {} below the block dimension {}",
                    b.ambient, b.dim
                )));
            }
        }
        if self.epsilon <= Rational::zero() {
            return Err(CoreError::Malformed("epsilon must be positive".into()));
        }
        let g: u32 = self.blocks.iter().map(|b| b.dim).sum();
        if self.obstruction_dim > g {
            return Err(CoreError::Malformed(format!(
                "obstruction dimension {} exceeds the group dimension {g}",
                self.obstruction_dim
            )));
        }
        Ok(g)
    }
}

/// Which preconditions of the cascade the inputs actually satisfy. The
/// bound evaluators never test these: a caller probing out-of-range data
/// gets the formula value together with this report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct CascadeHypotheses {
    /// epsilon <= 1.
    pub epsilon_ok: bool,
    /// Every weight is at least the block dimension plus one.
    pub weights_ok: bool,
    /// Every adjacent weight ratio clears the gap condition.
    pub gaps_ok: bool,
}

impl CascadeHypotheses {
    pub fn all(&self) -> bool {
        self.epsilon_ok && self.weights_ok && self.gaps_ok
    }
}

pub fn cascade_hypotheses(inp: &CascadeInputs) -> Result<CascadeHypotheses> {
    let g = inp.validate()?;
    let weights: Vec<u64> = inp.blocks.iter().map(|b| b.weight).collect();
    let degrees: Vec<u64> = inp.blocks.iter().map(|b| b.group_degree).collect();
    let gaps = weight_gap_condition(&weights, &degrees, g, inp.bidegree.c_prime, &inp.epsilon)?;
    Ok(CascadeHypotheses {
        epsilon_ok: inp.epsilon <= Rational::one(),
        weights_ok: inp
            .blocks
            .iter()
            .all(|b| b.weight >= u64::from(b.dim) + 1),
        gaps_ok: gaps.iter().all(|&ok| ok),
    })
}

/// Exact adjacent-gap condition on a weight chain:
///
///   delta_l / delta_{l+1} > (p c' / epsilon)^g d(G_1) ... d(G_p),
///
/// evaluated without division as
/// delta_l epsilon^g > delta_{l+1} (p c')^g prod_l d(G_l). Returns one
/// boolean per adjacent pair, so a single-factor chain yields no entries.
pub fn weight_gap_condition(
    weights: &[u64],
    group_degrees: &[u64],
    dim: u32,
    c_prime: u32,
    epsilon: &Rational,
) -> Result<Vec<bool>> {
    if weights.is_empty() {
        return Err(CoreError::Malformed("weight chain is empty".into()));
    }
    if weights.len() != group_degrees.len() {
        return Err(CoreError::Malformed(format!(
            "{} weights against {} group degrees",
            weights.len(),
            group_degrees.len()
        )));
    }
    if weights.iter().any(|&w| w == 0) {
        return Err(CoreError::Malformed("weights must be >= 1".into()));
    }
    if group_degrees.iter().any(|&d| d == 0) {
        return Err(CoreError::Malformed("group degrees must be >= 1".into()));
    }
    if dim == 0 || c_prime == 0 {
        return Err(CoreError::Malformed(
            "gap condition needs g >= 1 and c' >= 1".into(),
        ));
    }
    if *epsilon <= Rational::zero() {
        return Err(CoreError::Malformed("epsilon must be positive".into()));
    }
    let p = weights.len() as u64;
    let eps_pow = rational_pow(epsilon, dim);
    let scale = Int::from(p * u64::from(c_prime)).pow(dim)
        * group_degrees
            .iter()
            .fold(Int::one(), |acc, &d| acc * Int::from(d));
    Ok(weights
        .windows(2)
        .map(|w| {
            let lhs = Rational::from_integer(Int::from(w[0])) * &eps_pow;
            let rhs = Rational::from_integer(Int::from(w[1]) * &scale);
            lhs > rhs
        })
        .collect())
}

/// Exact degree side of the cascade:
/// (g c' / epsilon)^(g - dim V) * d(G_1) ... d(G_p).
pub fn cascade_degree_bound(inp: &CascadeInputs) -> Result<Rational> {
    let g = inp.validate()?;
    let base = Rational::new(
        Int::from(u64::from(g) * u64::from(inp.bidegree.c_prime)),
        Int::one(),
    ) / &inp.epsilon;
    let prod = inp
        .blocks
        .iter()
        .fold(Int::one(), |acc, b| acc * Int::from(b.group_degree));
    Ok(rational_pow(&base, g - inp.obstruction_dim) * Rational::from_integer(prod))
}

/// Height side of the cascade:
///
///   ((g+1) c' / epsilon)^(g - dim V) [ h(P) + sum_l R_l delta_l + S ],
///
/// where each R_l folds the factor's normalized height, its chart budget
/// scaled by (g-1) epsilon, its neutral and addition heights and a
/// (3c + 3c' + 4) log(n_l + 1) tail, and S collects the degree logs with
/// g (3 log p + 3 log c' + c log 2) + 2c + 2c' + 4.
pub fn cascade_height_bound(inp: &CascadeInputs, prec: Precision) -> Result<LogValue> {
    let g = inp.validate()?;
    let c = i64::from(inp.bidegree.c);
    let cp = i64::from(inp.bidegree.c_prime);
    let chart_scale = &Rational::from_integer(Int::from(g - 1)) * &inp.epsilon;

    let mut bracket = inp.form_height.clone();
    for b in &inp.blocks {
        let mut r = b.group_height.scale_rational(
            &Rational::new(
                Int::one(),
                Int::from(u64::from(b.dim) + 1) * Int::from(b.group_degree),
            ),
            prec,
        );
        if g > 1 {
            let f = chart_height_bound(
                b.ambient,
                u64::from(b.dim),
                b.group_degree,
                &b.group_height,
                &b.neutral_height,
                prec,
            )?;
            r += &f.scale_rational(&chart_scale, prec);
        }
        r += &(&b.neutral_height + &ln2(prec).scale_i64(i64::from(b.dim))).scale_i64(c);
        r += &b.addition_height;
        r += &LogValue::ln_u64(b.ambient + 1, prec).scale_i64(3 * c + 3 * cp + 4);
        bracket += &r.scale_rational(&Rational::from_integer(Int::from(b.weight)), prec);
    }

    let mut tail = LogValue::zero(prec);
    for b in &inp.blocks {
        tail += &LogValue::ln_u64(b.group_degree, prec).scale_i64(3);
    }
    tail += &(LogValue::ln_u64(inp.blocks.len() as u64, prec).scale_i64(3)
        + LogValue::ln_u64(u64::from(inp.bidegree.c_prime), prec).scale_i64(3)
        + ln2(prec).scale_i64(c))
    .scale_i64(i64::from(g));
    tail += &LogValue::from_i64(2 * c + 2 * cp + 4, prec);
    bracket += &tail;

    let base = Rational::new(
        Int::from((u64::from(g) + 1) * u64::from(inp.bidegree.c_prime)),
        Int::one(),
    ) / &inp.epsilon;
    Ok(bracket.scale_rational(&rational_pow(&base, g - inp.obstruction_dim), prec))
}

/// Cascade inputs for a product of tori under the coordinate embeddings
/// x |-> (1 : x): every factor has degree 1 and the exact projective-space
/// height, the neutral point is the all-ones vector (height 0) and the
/// addition forms are the coordinatewise products, bidegree (1, 1) and
/// height 0.
pub fn torus_cascade_inputs(
    model: &TorusModel,
    epsilon: &Rational,
    weights: &[u64],
    form_height: &LogValue,
    obstruction_dim: u32,
    prec: Precision,
) -> Result<CascadeInputs> {
    if weights.len() != model.block_count() {
        return Err(CoreError::Malformed(format!(
            "{} weights for {} torus blocks",
            weights.len(),
            model.block_count()
        )));
    }
    let blocks = model
        .block_dims()
        .iter()
        .zip(weights)
        .map(|(&n, &w)| CascadeBlock {
            ambient: n as u64,
            dim: n as u32,
            group_degree: 1,
            group_height: LogValue::from_rational(
                &chart::projective_space_height(n as u64),
                prec,
            ),
            neutral_height: LogValue::zero(prec),
            addition_height: LogValue::zero(prec),
            weight: w,
        })
        .collect();
    Ok(CascadeInputs {
        blocks,
        epsilon: epsilon.clone(),
        bidegree: AdditionBidegree { c: 1, c_prime: 1 },
        form_height: form_height.clone(),
        obstruction_dim,
    })
}

fn torus_chain_validate(
    model: &TorusModel,
    epsilon: &Rational,
    obstruction_dim: u32,
) -> Result<u32> {
    if *epsilon <= Rational::zero() {
        return Err(CoreError::Malformed("epsilon must be positive".into()));
    }
    let n = model.dim() as u32;
    if obstruction_dim > n {
        return Err(CoreError::Malformed(format!(
            "obstruction dimension {obstruction_dim} exceeds the torus dimension {n}"
        )));
    }
    Ok(n)
}

/// Exact degree side of the torus chain bound: (n / epsilon)^(n - dim V).
pub fn torus_chain_degree_bound(
    model: &TorusModel,
    epsilon: &Rational,
    obstruction_dim: u32,
) -> Result<Rational> {
    let n = torus_chain_validate(model, epsilon, obstruction_dim)?;
    let base = Rational::from_integer(Int::from(n)) / epsilon;
    Ok(rational_pow(&base, n - obstruction_dim))
}

/// Height side of the torus chain bound:
///
///   ((n+1)/epsilon)^(n - dim V)
///     { h(P) + (n epsilon + 2) sum_i (2 n_i + 5) delta_i
///       + 3 (n+1)(log p + 2) }.
pub fn torus_chain_height_bound(
    model: &TorusModel,
    epsilon: &Rational,
    weights: &[u64],
    form_height: &LogValue,
    obstruction_dim: u32,
    prec: Precision,
) -> Result<LogValue> {
    let n = torus_chain_validate(model, epsilon, obstruction_dim)?;
    if weights.len() != model.block_count() {
        return Err(CoreError::Malformed(format!(
            "{} weights for {} torus blocks",
            weights.len(),
            model.block_count()
        )));
    }
    if weights.iter().any(|&w| w == 0) {
        return Err(CoreError::Malformed("weights must be >= 1".into()));
    }
    let weighted = model
        .block_dims()
        .iter()
        .zip(weights)
        .fold(Int::zero(), |acc, (&ni, &w)| {
            acc + Int::from(2 * ni as u64 + 5) * Int::from(w)
        });
    let linear = (&Rational::from_integer(Int::from(n)) * epsilon
        + Rational::from_integer(Int::from(2)))
        * Rational::from_integer(weighted);

    let mut brace = form_height + &LogValue::from_rational(&linear, prec);
    brace += &(LogValue::ln_u64(model.block_count() as u64, prec) + LogValue::from_i64(2, prec))
        .scale_i64(3 * (i64::from(n) + 1));

    let base = Rational::from_integer(Int::from(n) + Int::one()) / epsilon;
    Ok(brace.scale_rational(&rational_pow(&base, n - obstruction_dim), prec))
}

/// Adjacent-gap condition specialized to a torus chain, where every factor
/// has degree 1 and the addition forms have c' = 1:
/// delta_i / delta_{i+1} > (p / epsilon)^n.
pub fn torus_weight_gaps(
    model: &TorusModel,
    epsilon: &Rational,
    weights: &[u64],
) -> Result<Vec<bool>> {
    if weights.len() != model.block_count() {
        return Err(CoreError::Malformed(format!(
            "{} weights for {} torus blocks",
            weights.len(),
            model.block_count()
        )));
    }
    let unit_degrees = vec![1u64; weights.len()];
    weight_gap_condition(weights, &unit_degrees, model.dim() as u32, 1, epsilon)
}

/// Outcome of measuring a concrete operator family against its budget.
#[derive(Clone, Debug, serde::Serialize)]
pub struct OperatorFamilyCheck {
    pub family_size: usize,
    pub family_height: f64,
    pub bound: f64,
    pub verdict: Verdict,
}

/// Certifies the operator family budget on a concrete form over a single
/// torus block: applies every difference operator of total index up to the
/// budget, pools the coefficients of the whole family, measures the pooled
/// height exactly and compares it against the closed-form budget. The torus
/// chart at the all-ones point has 0/1 coefficient tables, so the budget is
/// instantiated with unit growth, unit scale, zero neutral height and the
/// coordinatewise-product addition forms of bidegree (1, 1).
pub fn verify_operator_family_height(
    form: &MultiForm,
    budget: u32,
    prec: Precision,
) -> Result<OperatorFamilyCheck> {
    let model = form.model();
    if model.block_count() != 1 {
        return Err(CoreError::Malformed(
            "the measured family check covers a single torus block".into(),
        ));
    }
    if budget == 0 {
        return Err(CoreError::Malformed("index budget must be >= 1".into()));
    }
    let g = model.dim();
    let indices = MultiIndex::all_upto(g, budget);
    let mut pooled: Vec<Rational> = Vec::new();
    for index in &indices {
        pooled.extend(delta_closed(form, index)?.coefficients().cloned());
    }
    let family_height = places::gauss_weil_vector_height(&pooled, prec)?;
    let own: Vec<Rational> = form.poly().coefficients().cloned().collect();
    let form_height = places::gauss_weil_vector_height(&own, prec)?;

    let inputs = OperatorFamilyInputs {
        blocks: vec![FamilyBlock {
            log_growth: LogValue::zero(prec),
            index_budget: budget,
            weight: 1,
            neutral_height: LogValue::zero(prec),
            dim: g as u32,
        }],
        log_scale: LogValue::zero(prec),
        form_degree: form.multidegree()[0],
        form_height,
        addition_height: LogValue::zero(prec),
        bidegree: AdditionBidegree { c: 1, c_prime: 1 },
        ambient: g as u64,
    };
    let bound = operator_family_height_bound(&inputs, prec)?;
    let verdict = Verdict::classify((&bound - &family_height).to_f64(), 1e-9);
    Ok(OperatorFamilyCheck {
        family_size: indices.len(),
        family_height: family_height.to_f64(),
        bound: bound.to_f64(),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{tests_support::parse_poly, SparsePolynomial};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    const LN2: f64 = std::f64::consts::LN_2;

    fn prec() -> Precision {
        Precision::new(96)
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(Int::from(n), Int::from(d))
    }

    fn bd(c: u32, cp: u32) -> AdditionBidegree {
        AdditionBidegree::new(c, cp).unwrap()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn bidegree_rejects_zero_entries() {
        assert!(AdditionBidegree::new(0, 1).is_err());
        assert!(AdditionBidegree::new(1, 0).is_err());
        assert_eq!(bd(2, 3).total(), 5);
    }

    #[test]
    fn family_budget_matches_the_hand_expansion() {
        // Two blocks, all scalars powers of two so the expansion is exact:
        // E = 2 everywhere, s = 2, budgets (2, 1), weights (1, 2),
        // neutral heights log 2, dims (1, 2), delta = 2, h(P) = 1,
        // h(A) = 1/2, bidegree (1, 2), N = 5.
        let p = prec();
        let block = |m, w, dim| FamilyBlock {
            log_growth: ln2(p),
            index_budget: m,
            weight: w,
            neutral_height: ln2(p),
            dim,
        };
        let inp = OperatorFamilyInputs {
            blocks: vec![block(2, 1, 1), block(1, 2, 2)],
            log_scale: ln2(p),
            form_degree: 2,
            form_height: LogValue::from_f64(1.0),
            addition_height: LogValue::from_f64(0.5),
            bidegree: bd(1, 2),
            ambient: 5,
        };
        let got = operator_family_height_bound(&inp, p).unwrap().to_f64();
        // (2 ln2) 2 + (2 ln2) 1 = 6 ln2; 1*2*(3 ln2 + 1*2 ln2 + 2*3 ln2) = 22 ln2;
        // + 1 + 2*(1/2) = 2; + 2*(2+2+1) ln 6 = 10 ln 6.
        close(got, 28.0 * LN2 + 2.0 + 10.0 * 6f64.ln());
    }

    #[test]
    fn family_budget_names_the_offending_scalar() {
        let p = prec();
        let mut inp = OperatorFamilyInputs {
            blocks: vec![FamilyBlock {
                log_growth: LogValue::zero(p),
                index_budget: 1,
                weight: 1,
                neutral_height: LogValue::zero(p),
                dim: 1,
            }],
            log_scale: LogValue::zero(p),
            form_degree: 1,
            form_height: LogValue::zero(p),
            addition_height: LogValue::zero(p),
            bidegree: bd(1, 1),
            ambient: 1,
        };
        inp.blocks[0].index_budget = 0;
        let err = operator_family_height_bound(&inp, p).unwrap_err().to_string();
        assert!(err.contains("index budget"), "{err}");
        inp.blocks[0].index_budget = 1;
        inp.ambient = 0;
        let err = operator_family_height_bound(&inp, p).unwrap_err().to_string();
        assert!(err.contains("ambient"), "{err}");
        inp.ambient = 1;
        inp.blocks.clear();
        assert!(operator_family_height_bound(&inp, p).is_err());
    }

    #[test]
    fn degree_side_of_the_descent_is_exact() {
        // deg G = 1, c' = 1, delta = 3, g = 1, d = 0: 1 * 3^1.
        assert_eq!(
            multiplicity_degree_bound(1, &bd(1, 1), 3, 1, 0).unwrap(),
            Int::from(3)
        );
        // deg G = 2, c' = 3, delta = 2, g = 4, d = 1: 2 * 6^3.
        assert_eq!(
            multiplicity_degree_bound(2, &bd(1, 3), 2, 4, 1).unwrap(),
            Int::from(432)
        );
        // d = g collapses the cut factor entirely.
        assert_eq!(
            multiplicity_degree_bound(7, &bd(2, 5), 9, 3, 3).unwrap(),
            Int::from(7)
        );
        assert!(multiplicity_degree_bound(1, &bd(1, 1), 3, 1, 2).is_err());
        assert!(multiplicity_degree_bound(0, &bd(1, 1), 3, 1, 0).is_err());
    }

    #[test]
    fn height_side_of_the_descent_matches_the_hand_expansion() {
        // One block of dimension 2, E = 1, s = 1, share 1, weight 1,
        // h(e) = 0, deg G = 1, h(G) = 0, delta = 1, h(P) = 1, h(A) = 0,
        // bidegree (1, 1), N = 2, d = 1. Inner bracket:
        //   ln2 + 1*1*(0 + 2 ln2) + 1 + 0 + 1*5*(ln 2 + 1) + 3 ln 2
        // and the multiplier is g = 2 times deg G (c' delta)^0 = 1.
        let p = prec();
        let inp = MultiplicityBoundInputs {
            group_degree: 1,
            group_height: LogValue::zero(p),
            obstruction_dim: 1,
            form_degree: 1,
            form_height: LogValue::from_f64(1.0),
            addition_height: LogValue::zero(p),
            bidegree: bd(1, 1),
            ambient: 2,
            blocks: vec![MultiplicityBlock {
                log_growth: LogValue::zero(p),
                staircase_share: 1,
                weight: 1,
                neutral_height: LogValue::zero(p),
                dim: 2,
            }],
            log_scale: LogValue::zero(p),
        };
        let got = multiplicity_height_bound(&inp, p).unwrap().to_f64();
        let inner = LN2 + 2.0 * LN2 + 1.0 + 5.0 * (2f64.ln() + 1.0) + 3.0 * LN2;
        close(got, 2.0 * inner);

        let mut bad = inp.clone();
        bad.obstruction_dim = 2;
        assert!(multiplicity_height_bound(&bad, p).is_err());
    }

    #[test]
    fn refined_bracket_reuses_the_chart_budget() {
        // Bare one-dimensional torus: N = 1, g = 1, deg G = 1, h(G) = 0,
        // h(e) = 0, so the chart budget is exactly 7. With delta = 1,
        // h(P) = 0, h(A) = 0, bidegree (1, 1), radius 2, d = 0:
        //   1 * [7*2 + (0 + ln 2) + 0 + 0 + 5*(0 + 1) + 3 ln 2] * 1.
        let p = prec();
        let inp = RefinedMultiplicityInputs {
            ambient: 1,
            dim: 1,
            group_degree: 1,
            group_height: LogValue::zero(p),
            neutral_height: LogValue::zero(p),
            obstruction_dim: 0,
            form_degree: 1,
            form_height: LogValue::zero(p),
            addition_height: LogValue::zero(p),
            bidegree: bd(1, 1),
            staircase_radius: 2,
        };
        let got = refined_multiplicity_height_bound(&inp, p).unwrap().to_f64();
        close(got, 19.0 + 4.0 * LN2);

        let mut flat = inp.clone();
        flat.obstruction_dim = 1;
        assert!(refined_multiplicity_height_bound(&flat, p).is_err());
    }

    #[test]
    fn gap_condition_is_strict_and_exact() {
        let eps = q(1, 2);
        // Threshold (2 * 1 / (1/2))^2 = 16.
        assert_eq!(
            weight_gap_condition(&[100, 1], &[1, 1], 2, 1, &eps).unwrap(),
            vec![true]
        );
        assert_eq!(
            weight_gap_condition(&[10, 1], &[1, 1], 2, 1, &eps).unwrap(),
            vec![false]
        );
        // Exactly on the threshold: strict comparison fails.
        assert_eq!(
            weight_gap_condition(&[16, 1], &[1, 1], 2, 1, &eps).unwrap(),
            vec![false]
        );
        assert_eq!(
            weight_gap_condition(&[17, 1], &[1, 1], 2, 1, &eps).unwrap(),
            vec![true]
        );
        // Degrees scale the threshold; a single factor has no pairs.
        assert_eq!(
            weight_gap_condition(&[33, 1], &[2, 1], 2, 1, &eps).unwrap(),
            vec![true]
        );
        assert_eq!(
            weight_gap_condition(&[32, 1], &[2, 1], 2, 1, &eps).unwrap(),
            vec![false]
        );
        assert!(weight_gap_condition(&[5], &[1], 1, 1, &eps)
            .unwrap()
            .is_empty());
        assert!(weight_gap_condition(&[], &[], 1, 1, &eps).is_err());
        assert!(weight_gap_condition(&[1, 1], &[1], 1, 1, &eps).is_err());
    }

    #[test]
    fn torus_chain_matches_the_worked_instance() {
        // One torus line, epsilon 1, weight 2, h(P) = 0, point obstruction:
        // degree side (1/1)^1 = 1 and height side
        // 2 * {0 + 3*7*2 + 3*2*(log 1 + 2)} = 108, every step dyadic.
        let p = prec();
        let model = TorusModel::new(vec![1]).unwrap();
        let eps = q(1, 1);
        let h0 = LogValue::zero(p);
        assert_eq!(
            torus_chain_degree_bound(&model, &eps, 0).unwrap(),
            Rational::one()
        );
        let h = torus_chain_height_bound(&model, &eps, &[2], &h0, 0, p).unwrap();
        assert_eq!(h.to_f64(), 108.0);

        // The explicit chain dominates the cascade it specializes on the
        // same data.
        let inputs = torus_cascade_inputs(&model, &eps, &[2], &h0, 0, p).unwrap();
        assert_eq!(
            cascade_degree_bound(&inputs).unwrap(),
            Rational::one()
        );
        let fine = cascade_height_bound(&inputs, p).unwrap();
        // R = 1/4 + 11 ln2, S = ln2 + 8, bracket doubled and scaled by 2.
        close(fine.to_f64(), 2.0 * (0.5 + 22.0 * LN2 + LN2 + 8.0));
        assert!(fine.to_f64() <= h.to_f64());
    }

    #[test]
    fn explicit_chain_dominates_the_cascade_on_a_product() {
        let p = prec();
        let model = TorusModel::new(vec![1, 2]).unwrap();
        let eps = q(3, 4);
        let weights = [600u64, 3];
        let hp = LogValue::from_f64(5.0);
        for d in 0..=2 {
            let inputs = torus_cascade_inputs(&model, &eps, &weights, &hp, d, p).unwrap();
            let fine_deg = cascade_degree_bound(&inputs).unwrap();
            let coarse_deg = torus_chain_degree_bound(&model, &eps, d).unwrap();
            assert!(fine_deg <= coarse_deg, "degree at d = {d}");
            let fine_h = cascade_height_bound(&inputs, p).unwrap().to_f64();
            let coarse_h =
                torus_chain_height_bound(&model, &eps, &weights, &hp, d, p)
                    .unwrap()
                    .to_f64();
            assert!(fine_h <= coarse_h, "height at d = {d}: {fine_h} vs {coarse_h}");
        }
    }

    #[test]
    fn hypotheses_report_never_blocks_evaluation() {
        let p = prec();
        let model = TorusModel::new(vec![1, 1]).unwrap();
        // Weights large enough per block but too close together.
        let eps = q(1, 1);
        let inputs = torus_cascade_inputs(&model, &eps, &[3, 2], &LogValue::zero(p), 0, p).unwrap();
        let hyp = cascade_hypotheses(&inputs).unwrap();
        assert!(hyp.epsilon_ok);
        assert!(hyp.weights_ok);
        assert!(!hyp.gaps_ok); // 3/2 < (2/1)^2
        assert!(!hyp.all());
        // The bounds still evaluate on the same data.
        assert!(cascade_degree_bound(&inputs).unwrap() > Rational::zero());
        assert!(cascade_height_bound(&inputs, p).unwrap().to_f64() > 0.0);

        let wide = torus_cascade_inputs(&model, &eps, &[100, 2], &LogValue::zero(p), 0, p).unwrap();
        assert!(cascade_hypotheses(&wide).unwrap().all());
        assert_eq!(
            torus_weight_gaps(&model, &eps, &[100, 2]).unwrap(),
            vec![true]
        );

        let over = CascadeInputs {
            epsilon: q(3, 2),
            ..wide
        };
        assert!(!cascade_hypotheses(&over).unwrap().epsilon_ok);
        assert!(cascade_degree_bound(&over).is_ok());
    }

    #[test]
    fn torus_inputs_fill_the_known_constants() {
        let p = prec();
        let model = TorusModel::new(vec![1, 2]).unwrap();
        let inputs =
            torus_cascade_inputs(&model, &q(1, 2), &[30, 3], &LogValue::zero(p), 1, p).unwrap();
        assert_eq!(inputs.blocks.len(), 2);
        assert_eq!(inputs.bidegree, bd(1, 1));
        assert_eq!(inputs.blocks[0].group_degree, 1);
        close(inputs.blocks[0].group_height.to_f64(), 0.5);
        close(inputs.blocks[1].group_height.to_f64(), 1.25);
        assert!(inputs.blocks[1].neutral_height.is_zero());
        assert!(inputs.blocks[1].addition_height.is_zero());
        assert!(torus_cascade_inputs(&model, &q(1, 2), &[30], &LogValue::zero(p), 1, p).is_err());
    }

    fn form(model: &TorusModel, src: &str) -> MultiForm {
        let vars = model.x_vars();
        let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        MultiForm::new(model, parse_poly(&refs, src)).unwrap()
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
                p.insert_add(MultiIndex(exp), q(rng.gen_range(-5..=5), 1));
            }
            if !p.is_zero() {
                return MultiForm::new(model, p).unwrap();
            }
        }
    }

    #[test]
    fn measured_family_heights_fit_the_budget() {
        let p = prec();
        let model = TorusModel::new(vec![1]).unwrap();
        // Family of X1^2 - X0 X1 up to budget 2: coefficients pool to
        // {1, -1, 2}, height log 2; budget (2 + 2 + 8) log 2.
        let check = verify_operator_family_height(&form(&model, "X1^2 - X0*X1"), 2, p).unwrap();
        assert_eq!(check.family_size, 3);
        close(check.family_height, LN2);
        close(check.bound, 12.0 * LN2);
        assert_eq!(check.verdict, Verdict::Holds);

        assert!(verify_operator_family_height(&form(&model, "X1"), 0, p).is_err());
        let product = TorusModel::new(vec![1, 1]).unwrap();
        let two_blocks = random_form(&product, 2, &mut Xoshiro256PlusPlus::seed_from_u64(7));
        assert!(verify_operator_family_height(&two_blocks, 1, p).is_err());

        let mut rng = Xoshiro256PlusPlus::seed_from_u64(61);
        for round in 0..100usize {
            let model = TorusModel::new(vec![1 + (round % 2)]).unwrap();
            let f = random_form(&model, 3, &mut rng);
            let budget = rng.gen_range(1..=3);
            let check = verify_operator_family_height(&f, budget, p).unwrap();
            assert_eq!(check.verdict, Verdict::Holds, "round {round}");
        }
    }
}
