//! Deterministic instance generators.
//!
//! Every generator is a pure function of a 64-bit seed and the size caps:
//! the same inputs reproduce the same instance byte for byte. Implicit
//! problems are built with a forced root (draw Q, subtract Q(x)) and
//! rejection-sampled until the T-derivative at the base point is nonzero,
//! within a fixed draw budget.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;
use serde_json::{json, Value};

use polycert_core::chart::GroupChart;
use polycert_core::group::{MultiForm, TorusModel};
use polycert_core::poly::MultiIndex;
use polycert_core::{CoreError, Int, Rational, Result, SparsePolynomial};

use crate::{ChartSpec, ImplicitSpec, MultiFormSpec};

/// Draws spent before an implicit-instance search gives up.
pub const REJECTION_BUDGET: u32 = 10_000;

/// Size caps for generated instances: number of dependent variables n,
/// total degree, and the symmetric integer coefficient box.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SizeCaps {
    pub max_arity: usize,
    pub max_degree: u32,
    pub coeff_box: i64,
}

impl Default for SizeCaps {
    fn default() -> Self {
        SizeCaps { max_arity: 3, max_degree: 4, coeff_box: 5 }
    }
}

impl SizeCaps {
    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.max_arity) {
            return Err(CoreError::Malformed(format!(
                "arity cap {} outside 1..=6",
                self.max_arity
            )));
        }
        if !(1..=8).contains(&self.max_degree) {
            return Err(CoreError::Malformed(format!(
                "degree cap {} outside 1..=8",
                self.max_degree
            )));
        }
        if !(1..=1000).contains(&self.coeff_box) {
            return Err(CoreError::Malformed(format!(
                "coefficient box {} outside 1..=1000",
                self.coeff_box
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    Implicit,
    Staircase,
    Multiform,
}

#[derive(Clone, Debug)]
pub enum GeneratedInstance {
    Implicit(ImplicitSpec),
    Staircase {
        blocks: Vec<usize>,
        delta: Vec<Rational>,
        epsilon: Rational,
    },
    Multiform {
        spec: MultiFormSpec,
        point: Vec<Rational>,
    },
}

impl GeneratedInstance {
    pub fn to_value(&self) -> Value {
        match self {
            GeneratedInstance::Implicit(spec) => {
                json!({"kind": "implicit", "instance": spec})
            }
            GeneratedInstance::Staircase { blocks, delta, epsilon } => json!({
                "kind": "staircase",
                "blocks": blocks,
                "delta": delta.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                "epsilon": epsilon.to_string(),
            }),
            GeneratedInstance::Multiform { spec, point } => json!({
                "kind": "multiform",
                "instance": spec,
                "point": point.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Deterministic instance of the requested kind from a seed and caps.
pub fn generate_instance(
    kind: InstanceKind,
    seed: u64,
    caps: &SizeCaps,
) -> Result<GeneratedInstance> {
    caps.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    match kind {
        InstanceKind::Implicit => {
            implicit_instance(&mut rng, caps).map(GeneratedInstance::Implicit)
        }
        InstanceKind::Staircase => {
            let (blocks, delta, epsilon) = staircase_instance(&mut rng, caps);
            Ok(GeneratedInstance::Staircase { blocks, delta, epsilon })
        }
        InstanceKind::Multiform => multiform_instance(&mut rng, caps),
    }
}

pub(crate) fn int_rat(n: i64) -> Rational {
    Rational::from_integer(Int::from(n))
}

fn nonzero_int(rng: &mut impl Rng, cap: i64) -> i64 {
    loop {
        let c = rng.gen_range(-cap..=cap);
        if c != 0 {
            return c;
        }
    }
}

/// A nonzero rational with numerator in the box and denominator 1 or 2.
pub(crate) fn nonzero_rat(rng: &mut impl Rng, cap: i64) -> Rational {
    Rational::new(Int::from(nonzero_int(rng, cap)), Int::from(rng.gen_range(1..=2)))
}

pub(crate) fn random_index(rng: &mut impl Rng, arity: usize, total_cap: u32) -> MultiIndex {
    let mut exp = vec![0u16; arity];
    let mut rem = rng.gen_range(0..=total_cap);
    while rem > 0 {
        let take = rng.gen_range(1..=rem);
        exp[rng.gen_range(0..arity)] += take as u16;
        rem -= take;
    }
    MultiIndex(exp)
}

/// Random nonzero polynomial with integer coefficients in the box and total
/// degree at most the cap.
pub(crate) fn random_poly(
    rng: &mut impl Rng,
    vars: Vec<String>,
    deg_cap: u32,
    coeff_box: i64,
) -> SparsePolynomial {
    let arity = vars.len();
    loop {
        let mut p = SparsePolynomial::zero_owned(vars.clone());
        for _ in 0..rng.gen_range(2..=6) {
            p.insert_add(
                random_index(rng, arity, deg_cap),
                int_rat(rng.gen_range(-coeff_box..=coeff_box)),
            );
        }
        if !p.is_zero() {
            return p;
        }
    }
}

/// Random nonzero homogeneous polynomial of exact degree d in the given
/// variables.
pub(crate) fn random_homogeneous(
    rng: &mut impl Rng,
    vars: Vec<String>,
    d: u32,
    coeff_box: i64,
) -> SparsePolynomial {
    let arity = vars.len();
    loop {
        let mut p = SparsePolynomial::zero_owned(vars.clone());
        for _ in 0..rng.gen_range(2..=5) {
            let mut exp = vec![0u16; arity];
            for _ in 0..d {
                exp[rng.gen_range(0..arity)] += 1;
            }
            p.insert_add(MultiIndex(exp), int_rat(nonzero_int(rng, coeff_box)));
        }
        if !p.is_zero() {
            return p;
        }
    }
}

/// Random form over the model with exactly the given per-block degrees.
pub(crate) fn random_multiform(
    rng: &mut impl Rng,
    model: &TorusModel,
    degrees: &[u32],
    coeff_box: i64,
) -> MultiForm {
    let sizes: Vec<usize> = model.block_dims().iter().map(|&n| n + 1).collect();
    loop {
        let mut p = SparsePolynomial::zero_owned(model.x_vars());
        for _ in 0..rng.gen_range(3..=6) {
            let mut exp: Vec<u16> = Vec::new();
            for (&s, &d) in sizes.iter().zip(degrees) {
                let mut part = vec![0u16; s];
                for _ in 0..d {
                    part[rng.gen_range(0..s)] += 1;
                }
                exp.extend(part);
            }
            p.insert_add(MultiIndex(exp), int_rat(nonzero_int(rng, coeff_box)));
        }
        if !p.is_zero() {
            return MultiForm::new(model, p).expect("degrees are pinned per block");
        }
    }
}

fn implicit_instance(rng: &mut Xoshiro256PlusPlus, caps: &SizeCaps) -> Result<ImplicitSpec> {
    let n = rng.gen_range(1..=caps.max_arity);
    let d = rng.gen_range(1..=caps.max_degree);
    let mut vars: Vec<String> = (1..=n).map(|i| format!("Y{i}")).collect();
    vars.push("T".into());
    let base: Vec<Rational> = (0..=n)
        .map(|_| int_rat(rng.gen_range(-caps.coeff_box..=caps.coeff_box)))
        .collect();

    for _ in 0..REJECTION_BUDGET {
        let q = random_poly(rng, vars.clone(), d, caps.coeff_box);
        if !q.total_degree().leq(0) {
            // Subtracting the base value keeps the degree and forces a root.
            let shift = q.eval(&base);
            let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
            let p = q.sub(&SparsePolynomial::constant(&refs, shift));
            if polycert_core::implicit::ImplicitProblem::new(p.clone(), base.clone(), d).is_ok() {
                return Ok(ImplicitSpec::from_parts(p, &base, d));
            }
        }
    }
    Err(CoreError::Budget(format!(
        "no implicit instance with a regular root in {REJECTION_BUDGET} draws"
    )))
}

fn staircase_instance(
    rng: &mut Xoshiro256PlusPlus,
    caps: &SizeCaps,
) -> (Vec<usize>, Vec<Rational>, Rational) {
    let k = rng.gen_range(1..=caps.max_arity.min(3));
    let mut blocks = Vec::new();
    let mut rem = k;
    while rem > 0 {
        let b = rng.gen_range(1..=rem);
        blocks.push(b);
        rem -= b;
    }
    let delta: Vec<Rational> = blocks
        .iter()
        .map(|_| {
            Rational::new(
                Int::from(rng.gen_range(1..=i64::from(2 * caps.max_degree))),
                Int::from(rng.gen_range(1..=2)),
            )
        })
        .collect();
    let den = rng.gen_range(1..=6);
    let epsilon = Rational::new(Int::from(rng.gen_range(1..=den)), Int::from(den));
    (blocks, delta, epsilon)
}

fn multiform_instance(
    rng: &mut Xoshiro256PlusPlus,
    caps: &SizeCaps,
) -> Result<GeneratedInstance> {
    let block_count = rng.gen_range(1..=caps.max_arity.min(2));
    let mut dims = Vec::new();
    let mut budget = caps.max_arity.max(block_count);
    for l in 0..block_count {
        let left = block_count - l - 1;
        let n = rng.gen_range(1..=(budget - left).min(2));
        dims.push(n);
        budget -= n;
    }
    let model = TorusModel::new(dims.clone())?;
    let degrees: Vec<u32> = (0..block_count)
        .map(|_| rng.gen_range(1..=caps.max_degree.min(3)))
        .collect();
    let point: Vec<Rational> = (0..model.coord_count())
        .map(|_| nonzero_rat(rng, caps.coeff_box))
        .collect();

    for _ in 0..REJECTION_BUDGET {
        let q = random_multiform(rng, &model, &degrees, caps.coeff_box);
        // One linear constraint: shift the leading coefficient so the form
        // vanishes at the point. Monomials never vanish on the torus, so
        // the solve cannot degenerate.
        let (lead, _) = q.poly().leading().expect("forms are nonzero");
        let lead = lead.clone();
        let monomial_value: Rational = point
            .iter()
            .zip(&lead.0)
            .map(|(x, &e)| x.clone().pow(i32::from(e)))
            .product();
        let adjust = q.poly().eval(&point) / monomial_value;
        let xvars = model.x_vars();
        let refs: Vec<&str> = xvars.iter().map(|s| s.as_str()).collect();
        let p = q
            .poly()
            .sub(&SparsePolynomial::monomial(&refs, lead, adjust));
        if p.is_zero() {
            continue;
        }
        let form = MultiForm::new(&model, p)?;
        debug_assert!(form.poly().eval(&point).is_zero());
        return Ok(GeneratedInstance::Multiform {
            spec: MultiFormSpec { blocks: dims, poly: form.poly().clone() },
            point,
        });
    }
    Err(CoreError::Budget(format!(
        "no nonzero vanishing form in {REJECTION_BUDGET} draws"
    )))
}

/// Random group chart: one dependent coordinate defined by
/// X_dep X_0^(d-1) = Q(X_0..X_g) with Q homogeneous of degree d, so the
/// regularity conditions hold by construction.
pub(crate) fn random_chart(
    rng: &mut impl Rng,
    caps: &SizeCaps,
) -> Result<(ChartSpec, GroupChart)> {
    let g = rng.gen_range(1..=2usize);
    let d = rng.gen_range(2..=caps.max_degree.clamp(2, 3));
    let ambient = g + 1;
    let vars: Vec<String> = (0..=ambient).map(|i| format!("X{i}")).collect();
    let dep = ambient;

    let base_vars: Vec<String> = vars[..=g].to_vec();
    let q_small = random_homogeneous(rng, base_vars, d, caps.coeff_box);
    let positions: Vec<usize> = (0..=g).collect();
    let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    let q = q_small.embed(&refs, &positions);

    let mut dep_exp = vec![0u16; ambient + 1];
    dep_exp[0] = (d - 1) as u16;
    dep_exp[dep] = 1;
    let form = SparsePolynomial::monomial(&refs, MultiIndex(dep_exp), Rational::one()).sub(&q);

    let mut neutral = vec![Rational::one()];
    for _ in 0..g {
        neutral.push(int_rat(rng.gen_range(-2..=2)));
    }
    neutral.push(Rational::zero());
    neutral[dep] = q.eval(&neutral);

    let chart = GroupChart::new(g, neutral.clone(), vec![form.clone()])?;
    Ok((ChartSpec::from_parts(g, &neutral, vec![form]), chart))
}
