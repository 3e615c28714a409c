//! Seeded verification campaigns over every implemented check family.
//!
//! A campaign walks its lemma tokens in the configured order; within one
//! token the instances run concurrently but their records are collected in
//! instance-index order, so the report bytes never depend on scheduling.
//! Per-instance seeds derive from the campaign seed by token ordinal and
//! instance index, which keeps each token's instance stream stable when
//! other tokens are added or removed from the set.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;
use serde_json::{json, Value};

use polycert_core::group::TorusModel;
use polycert_core::logval::LogValue;
use polycert_core::measures::{check_comparison, ComparisonKind, MeasureOptions};
use polycert_core::poly::MultiIndex;
use polycert_core::{bounds, chart, exec, group, implicit, places, segre, staircase};
use polycert_core::{Int, Place, Precision, Rational, Result, SparsePolynomial, Verdict};

use crate::gen::{self, SizeCaps};
use crate::report::{CertificationReport, CheckLine, InstanceRecord};
use crate::{ImplicitSpec, MultiFormSpec};

/// One verification family a campaign can run, addressed by its CLI token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaToken {
    MeasureComparisons,
    CofactorOracle,
    DenominatorClearing,
    CoefficientGrowth,
    ChartGrowth,
    PowerFamilyUnit,
    PowerFamilyDoubled,
    OperatorFamily,
    DeltaIdentities,
    StaircaseSum,
    PsiSweep,
    SegreRoundtrip,
    CorollaryBounds,
}

pub const ALL_LEMMAS: [LemmaToken; 13] = [
    LemmaToken::MeasureComparisons,
    LemmaToken::CofactorOracle,
    LemmaToken::DenominatorClearing,
    LemmaToken::CoefficientGrowth,
    LemmaToken::ChartGrowth,
    LemmaToken::PowerFamilyUnit,
    LemmaToken::PowerFamilyDoubled,
    LemmaToken::OperatorFamily,
    LemmaToken::DeltaIdentities,
    LemmaToken::StaircaseSum,
    LemmaToken::PsiSweep,
    LemmaToken::SegreRoundtrip,
    LemmaToken::CorollaryBounds,
];

impl LemmaToken {
    pub fn token(self) -> &'static str {
        match self {
            LemmaToken::MeasureComparisons => "1.1",
            LemmaToken::CofactorOracle => "2.1",
            LemmaToken::DenominatorClearing => "2.3",
            LemmaToken::CoefficientGrowth => "2.5",
            LemmaToken::ChartGrowth => "3.1",
            LemmaToken::PowerFamilyUnit => "4.8",
            LemmaToken::PowerFamilyDoubled => "4.15",
            LemmaToken::OperatorFamily => "4.16",
            LemmaToken::DeltaIdentities => "delta-identities",
            LemmaToken::StaircaseSum => "staircase-sum",
            LemmaToken::PsiSweep => "5.9-psi",
            LemmaToken::SegreRoundtrip => "segre-roundtrip",
            LemmaToken::CorollaryBounds => "corollary-bounds",
        }
    }

    fn ordinal(self) -> u64 {
        ALL_LEMMAS.iter().position(|t| *t == self).expect("listed") as u64
    }
}

impl fmt::Display for LemmaToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for LemmaToken {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ALL_LEMMAS
            .iter()
            .copied()
            .find(|t| t.token() == s)
            .ok_or_else(|| format!("unknown lemma token {s:?}"))
    }
}

impl Serialize for LemmaToken {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Full campaign configuration; serialized verbatim into the report summary
/// so a report always carries enough to reproduce itself.
#[derive(Clone, Debug, Serialize)]
pub struct CampaignConfig {
    pub seed: u64,
    pub lemmas: Vec<LemmaToken>,
    pub instances: u32,
    pub caps: SizeCaps,
    pub places: Vec<String>,
    pub precision_bits: usize,
    pub order: u32,
    pub quad_points: u32,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 1,
            lemmas: ALL_LEMMAS.to_vec(),
            instances: 50,
            caps: SizeCaps::default(),
            places: Vec::new(),
            precision_bits: 128,
            order: 3,
            quad_points: 256,
        }
    }
}

impl CampaignConfig {
    fn precision(&self) -> Precision {
        Precision::new(self.precision_bits)
    }

    fn place_set(&self) -> Result<Vec<Place>> {
        let mut out = Vec::new();
        for s in &self.places {
            let v: Place = s
                .parse()
                .map_err(|_| polycert_core::CoreError::Malformed(format!("place {s:?}")))?;
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Runs the configured campaign; instance failures and errors land in the
/// records, never as a crash.
pub fn run_campaign(cfg: &CampaignConfig, stamp: Option<u64>) -> CertificationReport {
    let mut records = Vec::new();
    for token in &cfg.lemmas {
        let lemma_seed = exec::split_seed(cfg.seed, token.ordinal());
        let mut batch = exec::map_blocks(cfg.instances as u64, |i| {
            run_one(*token, cfg, i as u32, exec::split_seed(lemma_seed, i))
        });
        records.append(&mut batch);
    }
    let config = serde_json::to_value(cfg).expect("config serializes");
    CertificationReport::assemble(records, config, stamp)
}

fn run_one(token: LemmaToken, cfg: &CampaignConfig, index: u32, seed: u64) -> InstanceRecord {
    let outcome = catch_unwind(AssertUnwindSafe(|| dispatch(token, cfg, seed)));
    match outcome {
        Ok(Ok((instance, checks))) => {
            InstanceRecord::from_checks(token.token(), index, seed, instance, checks)
        }
        Ok(Err(e)) => InstanceRecord::from_error(token.token(), index, seed, e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "opaque panic".into());
            InstanceRecord::from_error(token.token(), index, seed, format!("panic: {msg}"))
        }
    }
}

type Checked = Result<(Value, Vec<CheckLine>)>;

fn dispatch(token: LemmaToken, cfg: &CampaignConfig, seed: u64) -> Checked {
    match token {
        LemmaToken::MeasureComparisons => measure_battery(cfg, seed),
        LemmaToken::CofactorOracle => cofactor_battery(cfg, seed),
        LemmaToken::DenominatorClearing => denominator_battery(cfg, seed),
        LemmaToken::CoefficientGrowth => coefficient_battery(cfg, seed),
        LemmaToken::ChartGrowth => chart_battery(cfg, seed),
        LemmaToken::PowerFamilyUnit => power_family_battery(cfg, seed, false),
        LemmaToken::PowerFamilyDoubled => power_family_battery(cfg, seed, true),
        LemmaToken::OperatorFamily => operator_family_battery(cfg, seed),
        LemmaToken::DeltaIdentities => delta_identity_battery(cfg, seed),
        LemmaToken::StaircaseSum => staircase_sum_battery(cfg, seed),
        LemmaToken::PsiSweep => psi_battery(cfg, seed),
        LemmaToken::SegreRoundtrip => segre_battery(cfg, seed),
        LemmaToken::CorollaryBounds => corollary_battery(cfg, seed),
    }
}

fn rat_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::INFINITY)
}

/// Places for growth checks: the configured set, or the archimedean place
/// plus the primes up to 13 dividing some coefficient or coordinate.
fn growth_places(cfg: &CampaignConfig, support: &[Rational]) -> Result<Vec<Place>> {
    let configured = cfg.place_set()?;
    if !configured.is_empty() {
        return Ok(configured);
    }
    let mut out: Vec<Place> = places::relevant_places(support)
        .into_iter()
        .filter(|v| match v {
            Place::Infinite => true,
            Place::Finite(p) => *p <= 13,
        })
        .collect();
    if !out.contains(&Place::Infinite) {
        out.push(Place::Infinite);
    }
    out.sort();
    Ok(out)
}

fn measure_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let arity = rng.gen_range(1..=cfg.caps.max_arity.min(2));
    let d = rng.gen_range(1..=cfg.caps.max_degree);
    let vars: Vec<String> = (1..=arity).map(|i| format!("X{i}")).collect();
    let p = gen::random_poly(&mut rng, vars, d, cfg.caps.coeff_box);
    let form = gen::random_homogeneous(
        &mut rng,
        vec!["X0".into(), "X1".into()],
        d,
        cfg.caps.coeff_box,
    );
    let opts = MeasureOptions {
        precision: cfg.precision(),
        quad_points: cfg.quad_points,
        torus_samples: 20_000,
        sphere_samples: 10_000,
        seed,
    };
    let mut checks = Vec::new();
    for kind in [ComparisonKind::MeasureMaxVsTorus, ComparisonKind::HeightMaxVsTorus] {
        let rec = check_comparison(&p, kind, &opts)?;
        checks.extend(rec.checks.iter().map(|c| CheckLine::from_inequality(rec.kind, c)));
    }
    for kind in [ComparisonKind::HeightTorusVsUnitary, ComparisonKind::HeightMaxVsUnitary] {
        let rec = check_comparison(&form, kind, &opts)?;
        checks.extend(rec.checks.iter().map(|c| CheckLine::from_inequality(rec.kind, c)));
    }
    Ok((json!({"poly": p, "form": form}), checks))
}

fn implicit_parts(cfg: &CampaignConfig, seed: u64) -> Result<(ImplicitSpec, implicit::ImplicitProblem)> {
    let inst = gen::generate_instance(gen::InstanceKind::Implicit, seed, &cfg.caps)?;
    let gen::GeneratedInstance::Implicit(spec) = inst else { unreachable!("kind is pinned") };
    let problem = spec
        .build()
        .map_err(|e| polycert_core::CoreError::Malformed(e.to_string()))?;
    Ok((spec, problem))
}

fn cofactor_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let (spec, problem) = implicit_parts(cfg, seed)?;
    let order = cfg.order.clamp(1, 5);

    let series = implicit::solve_series_taylor(&problem, order)?;
    let mut family = implicit::CofactorFamily::new(&problem);
    let table = family.taylor_table(order)?;
    let mismatches = series
        .iter()
        .filter(|(k, v)| table.get(*k) != Some(*v))
        .count()
        + table.keys().filter(|k| !series.contains_key(*k)).count();

    let bound_checks = implicit::verify_cofactor_bounds(&problem, order)?;
    let degree_violations = bound_checks.iter().filter(|c| !c.degree_ok).count();
    let length_violations = bound_checks.iter().filter(|c| !c.length_ok).count();
    let worst = bound_checks
        .iter()
        .map(|c| (&c.length, &c.length_bound))
        .min_by(|a, b| {
            let ma = a.1 - a.0;
            let mb = b.1 - b.0;
            ma.cmp(&mb)
        });

    let mut checks = vec![
        CheckLine::exact_count("cofactor_vs_series", mismatches),
        CheckLine::exact_count("degree_bounds", degree_violations),
        CheckLine::exact_count("length_bounds", length_violations),
    ];
    if let Some((length, bound)) = worst {
        checks.push(CheckLine::bound("tightest_length", rat_f64(length), rat_f64(bound), 0.0));
    }
    Ok((json!({"instance": spec, "order": order}), checks))
}

fn denominator_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let (spec, problem) = implicit_parts(cfg, seed)?;
    let order = cfg.order.clamp(1, 4);
    let solution = implicit::solve_series(&problem, order)?;
    let phi_cap = match problem.p().total_degree().finite() {
        Some(d) => Some(d.min(3)),
        None => None,
    };
    let report = implicit::verify_denominator_bounds(&problem, &solution, phi_cap, 3)?;
    let checks = vec![
        CheckLine::exact_count(
            "slice_denominators",
            report.slice_checks.iter().filter(|c| !c.ok).count(),
        ),
        CheckLine::exact_count(
            "identity_probes",
            report.identity_probes.iter().filter(|c| !c.ok).count(),
        ),
        CheckLine::exact_count(
            "degree_slices",
            report.phi_checks.iter().filter(|c| !c.ok).count(),
        ),
    ];
    Ok((json!({"instance": spec, "order": order}), checks))
}

fn coefficient_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let (spec, problem) = implicit_parts(cfg, seed)?;
    let order = cfg.order.clamp(1, 4);
    let mut support: Vec<Rational> = problem.p().coefficients().cloned().collect();
    support.extend(problem.base_point().iter().cloned());
    let place_set = growth_places(cfg, &support)?;
    let report = implicit::verify_coefficient_bounds(&problem, order, &place_set, cfg.precision())?;

    let mut checks: Vec<CheckLine> = report
        .place_checks
        .iter()
        .map(|c| {
            CheckLine::with_verdict(
                &format!("place_{}", c.place),
                rat_f64(&c.lhs),
                rat_f64(&c.rhs),
                0.0,
                if c.ok { Verdict::Holds } else { Verdict::Failed },
            )
        })
        .collect();
    checks.push(CheckLine::with_verdict(
        "height_growth",
        report.height_lhs,
        report.height_rhs,
        1e-9,
        report.height_verdict,
    ));
    Ok((json!({"instance": spec, "order": order}), checks))
}

fn chart_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let (spec, chart) = gen::random_chart(&mut rng, &cfg.caps)?;
    let order = cfg.order.clamp(1, 3);
    let mut support: Vec<Rational> = chart.neutral().to_vec();
    for f in chart.forms() {
        support.extend(f.coefficients().cloned());
    }
    let place_set = growth_places(cfg, &support)?;
    let report = chart::verify_chart_bounds(&chart, order, &place_set, None, cfg.precision())?;
    let checks: Vec<CheckLine> = report
        .checks
        .iter()
        .map(|c| {
            CheckLine::with_verdict(
                &format!("place_{}", c.place),
                0.0,
                c.min_margin,
                0.0,
                if c.ok { Verdict::Holds } else { Verdict::Failed },
            )
        })
        .collect();
    Ok((json!({"chart": spec, "order": order}), checks))
}

fn power_family_battery(cfg: &CampaignConfig, seed: u64, doubled: bool) -> Checked {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let (spec, chart) = gen::random_chart(&mut rng, &cfg.caps)?;
    let k = rng.gen_range(1..=2u32);
    let order = cfg.order.clamp(1, 2);
    let report =
        group::verify_power_family_bounds(&chart, k, order, &[], cfg.precision(), doubled)?;
    let checks = vec![
        CheckLine::exact_count(
            "translate_places",
            report.product_checks.iter().filter(|c| !c.ok).count(),
        ),
        CheckLine::exact_count(
            "table_places",
            report.table_checks.iter().filter(|c| !c.ok).count(),
        ),
        CheckLine::with_verdict(
            "translate_height",
            report.product_height,
            report.product_height_bound,
            1e-9,
            report.product_verdict,
        ),
        CheckLine::with_verdict(
            "table_height",
            report.table_height,
            report.table_height_bound,
            1e-9,
            report.table_verdict,
        ),
    ];
    Ok((
        json!({"chart": spec, "k": k, "order": order, "doubled": doubled}),
        checks,
    ))
}

fn operator_family_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let g = rng.gen_range(1..=2usize);
    let model = TorusModel::new(vec![g])?;
    let degrees = [rng.gen_range(1..=cfg.caps.max_degree.min(2))];
    let form = gen::random_multiform(&mut rng, &model, &degrees, cfg.caps.coeff_box);
    let budget = rng.gen_range(1..=2u32);
    let check = bounds::verify_operator_family_height(&form, budget, cfg.precision())?;
    let line = CheckLine::with_verdict(
        "family_height",
        check.family_height,
        check.bound,
        1e-9,
        check.verdict,
    );
    Ok((
        json!({
            "blocks": model.block_dims(),
            "poly": form.poly(),
            "budget": budget,
            "family_size": check.family_size,
        }),
        vec![line],
    ))
}

fn delta_identity_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let g = rng.gen_range(1..=2usize);
    let model = TorusModel::new(vec![g])?;
    let degrees = [rng.gen_range(1..=cfg.caps.max_degree.min(2))];
    let p = gen::random_multiform(&mut rng, &model, &degrees, cfg.caps.coeff_box);
    let q = gen::random_multiform(&mut rng, &model, &degrees, cfg.caps.coeff_box);
    let i = gen::random_index(&mut rng, g, 2);
    let j = gen::random_index(&mut rng, g, 2);

    let identities = group::verify_delta_identities(&p, &q, &i)?;
    let closed = group::delta_closed(&p, &i)?;
    let substituted = group::delta_subst(&p, &i)?;
    let composition = group::delta_composition(&p, &i, &j)?;

    let checks = vec![
        CheckLine::exact_count("additive_rule", usize::from(!identities.additive_ok)),
        CheckLine::exact_count("product_rule", usize::from(!identities.product_ok)),
        CheckLine::exact_count("route_agreement", usize::from(closed != substituted)),
        CheckLine::exact_count("composition_constants", usize::from(!composition.verified)),
    ];
    Ok((
        json!({
            "blocks": model.block_dims(),
            "p": p.poly(),
            "q": q.poly(),
            "i": i,
            "j": j,
        }),
        checks,
    ))
}

fn staircase_sum_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let inst = gen::generate_instance(gen::InstanceKind::Staircase, seed, &cfg.caps)?;
    let gen::GeneratedInstance::Staircase { blocks, delta, epsilon } = inst else {
        unreachable!("kind is pinned")
    };
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(exec::split_seed(seed, 1));
    let copies = rng.gen_range(2..=3u32);
    let w = staircase::SimplexStaircase::new(blocks.clone(), delta.clone(), epsilon.clone())?;

    let comparison = staircase::compare_iterated_sum(&w, copies)?;
    let arity: usize = blocks.iter().sum();
    let axes: Vec<usize> = (0..arity).collect();
    let refinement = match arity {
        1 => 2048,
        2 => 256,
        _ => 64,
    };
    let volume = staircase::multiplicity_volume(&w, &axes)?;
    let estimate = staircase::lattice_volume_estimate(&w, &axes, refinement)?;
    let v = rat_f64(&volume.volume);
    let e = rat_f64(&estimate);
    let err_budget = v * 16.0 / f64::from(refinement).powi(2);

    let checks = vec![
        CheckLine::exact_count("iterated_sum_inside_scaled", comparison.extra_in_sum.len()),
        CheckLine::bound("volume_vs_lattice", (v - e).abs(), 0.01 * v, err_budget),
    ];
    Ok((
        json!({
            "blocks": blocks,
            "delta": delta.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "epsilon": epsilon.to_string(),
            "copies": copies,
            "scaled_inside_sum": comparison.scaled_inside_sum,
            "missing_from_sum": comparison.missing_from_sum.len(),
        }),
        checks,
    ))
}

fn psi_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n = rng.gen_range(1..=10_000u64);
    let prec = cfg.precision();
    let value = chart::psi(n, prec).to_f64();

    let mut checks = vec![CheckLine::bound("psi_at_most_one", value, 1.0, 1e-9)];
    if n >= 5 {
        checks.push(CheckLine::bound("psi_negative_beyond_four", value, 0.0, 1e-9));
    } else {
        checks.push(CheckLine::bound("psi_positive_through_four", 0.0, value, 1e-9));
    }
    let zero = LogValue::from_i64(0, prec);
    let unit = chart::chart_height_bound(1, 1, 1, &zero, &zero, prec)?.to_f64();
    checks.push(CheckLine::exact_count(
        "unit_chart_budget_is_seven",
        usize::from(unit != 7.0),
    ));
    Ok((json!({"n": n}), checks))
}

fn segre_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let block_count = rng.gen_range(1..=2usize);
    let dims: Vec<usize> = (0..block_count).map(|_| rng.gen_range(1..=2usize)).collect();
    let model = TorusModel::new(dims.clone())?;
    let degrees: Vec<u32> = (0..block_count)
        .map(|_| rng.gen_range(1..=cfg.caps.max_degree.min(2)))
        .collect();
    let form = gen::random_multiform(&mut rng, &model, &degrees, cfg.caps.coeff_box);
    let map = segre::SegreVeroneseMap::new(&model, &degrees)?;

    let expected = segre::SegreVeroneseMap::expected_cardinality(&model, &degrees);
    let cardinality_off = usize::from(Int::from(map.cardinality()) != expected);

    let points: Vec<Vec<Rational>> = (0..5)
        .map(|_| {
            (0..model.coord_count())
                .map(|_| gen::nonzero_rat(&mut rng, cfg.caps.coeff_box))
                .collect()
        })
        .collect();
    let roundtrip_off = usize::from(!map.roundtrip_check(&form, &points)?);
    let height_off = usize::from(!map.height_transfer_exact(&form)?);

    let checks = vec![
        CheckLine::exact_count("cardinality_product", cardinality_off),
        CheckLine::exact_count("roundtrip", roundtrip_off),
        CheckLine::exact_count("height_transfer", height_off),
    ];
    Ok((
        json!({"blocks": dims, "degrees": degrees, "poly": form.poly()}),
        checks,
    ))
}

fn corollary_battery(cfg: &CampaignConfig, seed: u64) -> Checked {
    let prec = cfg.precision();
    let zero = LogValue::from_i64(0, prec);

    // Frozen worked instance: one G_m factor, epsilon 1, weight 2.
    let line = TorusModel::new(vec![1])?;
    let one = Rational::one();
    let frozen_degree = bounds::torus_chain_degree_bound(&line, &one, 0)?;
    let frozen_height = bounds::torus_chain_height_bound(&line, &one, &[2], &zero, 0, prec)?;
    let mut checks = vec![
        CheckLine::exact_count("frozen_degree_is_one", usize::from(frozen_degree != one)),
        CheckLine::exact_count(
            "frozen_height_is_108",
            usize::from(frozen_height.to_f64() != 108.0),
        ),
    ];

    // Seeded two-block model with weights built to clear, then to straddle,
    // the gap condition.
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let dims = vec![rng.gen_range(1..=2usize), rng.gen_range(1..=2usize)];
    let model = TorusModel::new(dims.clone())?;
    let g = model.dim() as i32;
    let epsilon = Rational::new(Int::from(1), Int::from(rng.gen_range(1..=3)));
    let tail = (dims[1] + 1 + rng.gen_range(0..=2usize)) as u64;

    // Gap threshold for the pair: head > tail * (p / epsilon)^g with p = 2.
    let bound = Rational::from_integer(Int::from(tail))
        * (Rational::from_integer(Int::from(2)) / epsilon.clone()).pow(g);
    let floor = bound.floor().to_integer().to_u64().expect("desk scale");
    let head_pass = floor + 1;
    let head_fail = floor.max(tail * 2);

    let gaps_pass = bounds::torus_weight_gaps(&model, &epsilon, &[head_pass, tail])?;
    let gaps_fail = bounds::torus_weight_gaps(&model, &epsilon, &[head_fail, tail])?;
    let straddle_misses =
        usize::from(gaps_pass != vec![true]) + usize::from(gaps_fail != vec![false]);
    checks.push(CheckLine::exact_count("gap_straddle", straddle_misses));

    let weights = [head_pass, tail];
    let inputs = bounds::torus_cascade_inputs(&model, &epsilon, &weights, &zero, 0, prec)?;
    let hyps = bounds::cascade_hypotheses(&inputs)?;
    checks.push(CheckLine::exact_count(
        "hypotheses_all_pass",
        usize::from(!hyps.epsilon_ok) + usize::from(!hyps.weights_ok) + usize::from(!hyps.gaps_ok),
    ));

    let cascade_degree = bounds::cascade_degree_bound(&inputs)?;
    let chain_degree = bounds::torus_chain_degree_bound(&model, &epsilon, 0)?;
    checks.push(CheckLine::exact_count(
        "degree_routes_agree",
        usize::from(cascade_degree != chain_degree),
    ));

    let height = bounds::torus_chain_height_bound(&model, &epsilon, &weights, &zero, 0, prec)?;
    checks.push(CheckLine::exact_count(
        "height_bound_finite",
        usize::from(!height.to_f64().is_finite() || height.to_f64() <= 0.0),
    ));

    Ok((
        json!({
            "dims": dims,
            "epsilon": epsilon.to_string(),
            "weights": weights,
            "straddle_weight": head_fail,
        }),
        checks,
    ))
}
