//! One-shot commands: each inspects a single instance and returns a JSON
//! value plus a flag saying whether any certified inequality failed.

use anyhow::{anyhow, bail, Result};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde_json::{json, Value};

use polycert_core::group::TorusModel;
use polycert_core::logval::LogValue;
use polycert_core::measures::{
    check_comparison, height_gauss_weil, height_mahler, height_unitary, measure_report,
    ComparisonKind, ComparisonRecord, MeasureOptions,
};
use polycert_core::poly::MultiIndex;
use polycert_core::{bounds, chart, group, implicit, places, segre, staircase};
use polycert_core::{Int, Place, Precision, Rational, SparsePolynomial, Verdict};

use crate::{ChartSpec, ImplicitSpec, MultiFormSpec};

/// Result of a one-shot command: the document to print, and whether any
/// certified check came back failed (drives the exit code).
pub struct CommandOutcome {
    pub value: Value,
    pub failed: bool,
}

impl CommandOutcome {
    fn clean(value: Value) -> Self {
        CommandOutcome { value, failed: false }
    }
}

/// Archimedean place plus the small primes (at most 13) appearing in the
/// support rationals; the default place set when none is configured.
pub(crate) fn default_places(support: &[Rational]) -> Vec<Place> {
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
    out
}

fn chosen_places(configured: &[Place], support: &[Rational]) -> Vec<Place> {
    if configured.is_empty() {
        default_places(support)
    } else {
        configured.to_vec()
    }
}

/// All four coefficient measures of one polynomial.
pub fn cmd_measure(
    p: &SparsePolynomial,
    blocks: Option<&[usize]>,
    opts: &MeasureOptions,
) -> Result<CommandOutcome> {
    let report = measure_report(p, blocks, opts)?;
    Ok(CommandOutcome::clean(json!({
        "poly": p,
        "measures": report,
    })))
}

/// Heights of one polynomial under every measure, plus the comparison
/// inequalities that apply to its shape.
pub fn cmd_height(p: &SparsePolynomial, opts: &MeasureOptions) -> Result<CommandOutcome> {
    let mut heights = serde_json::Map::new();
    heights.insert(
        "gauss_weil".into(),
        json!(height_gauss_weil(p, opts.precision)?.to_f64()),
    );
    heights.insert("mahler".into(), json!(height_mahler(p, opts)?));
    let homogeneous = p.homogeneous_degree().is_some();
    if homogeneous {
        heights.insert(
            "unitary".into(),
            json!(height_unitary(p, &[p.arity()], opts)?),
        );
    }

    let mut kinds = vec![ComparisonKind::MeasureMaxVsTorus, ComparisonKind::HeightMaxVsTorus];
    if homogeneous {
        kinds.push(ComparisonKind::HeightTorusVsUnitary);
        kinds.push(ComparisonKind::HeightMaxVsUnitary);
    }
    let mut comparisons: Vec<ComparisonRecord> = Vec::new();
    for kind in kinds {
        comparisons.push(check_comparison(p, kind, opts)?);
    }
    let failed = comparisons.iter().any(|r| r.verdict == Verdict::Failed);
    Ok(CommandOutcome {
        value: json!({
            "poly": p,
            "heights": Value::Object(heights),
            "comparisons": comparisons,
        }),
        failed,
    })
}

/// Exact Taylor coefficients of the implicit solution up to the order.
pub fn cmd_implicit_series(spec: &ImplicitSpec, order: u32) -> Result<CommandOutcome> {
    let problem = spec.build()?;
    let table = implicit::solve_series_taylor(&problem, order)?;
    let coefficients: Vec<Value> = table
        .iter()
        .map(|(k, v)| json!({"index": k, "value": v.to_string()}))
        .collect();
    Ok(CommandOutcome::clean(json!({
        "instance": spec,
        "order": order,
        "coefficients": coefficients,
    })))
}

/// Dispatch for `verify-bounds --lemma <token>`: the implicit-series
/// growth certificates (cofactor, denominator, per-place coefficient) and
/// the chart-coefficient bracket.
pub fn cmd_verify_bounds(
    lemma: &str,
    input: &Value,
    order: u32,
    configured: &[Place],
    prec: Precision,
) -> Result<CommandOutcome> {
    match lemma {
        "2.1" => {
            let spec: ImplicitSpec = serde_json::from_value(input.clone())?;
            let problem = spec.build()?;
            let checks = implicit::verify_cofactor_bounds(&problem, order)?;
            let failed = checks.iter().any(|c| !c.ok);
            Ok(CommandOutcome {
                value: json!({"instance": spec, "order": order, "checks": checks}),
                failed,
            })
        }
        "2.3" => {
            let spec: ImplicitSpec = serde_json::from_value(input.clone())?;
            let problem = spec.build()?;
            let solution = implicit::solve_series(&problem, order)?;
            let cap = problem.p().total_degree().finite().map(|d| d.min(3));
            let report = implicit::verify_denominator_bounds(&problem, &solution, cap, 3)?;
            let failed = !report.ok;
            Ok(CommandOutcome {
                value: json!({"instance": spec, "order": order, "report": report}),
                failed,
            })
        }
        "2.5" => {
            let spec: ImplicitSpec = serde_json::from_value(input.clone())?;
            let problem = spec.build()?;
            let mut support: Vec<Rational> = problem.p().coefficients().cloned().collect();
            support.extend(problem.base_point().iter().cloned());
            let place_set = chosen_places(configured, &support);
            let report =
                implicit::verify_coefficient_bounds(&problem, order, &place_set, prec)?;
            let failed = report.verdict == Verdict::Failed;
            Ok(CommandOutcome {
                value: json!({"instance": spec, "order": order, "report": report}),
                failed,
            })
        }
        "3.1" => {
            let spec: ChartSpec = serde_json::from_value(input.clone())?;
            let chart = spec.build()?;
            let mut support: Vec<Rational> = chart.neutral().to_vec();
            for f in chart.forms() {
                support.extend(f.coefficients().cloned());
            }
            let place_set = chosen_places(configured, &support);
            let report = chart::verify_chart_bounds(&chart, order, &place_set, None, prec)?;
            let failed = !report.ok;
            Ok(CommandOutcome {
                value: json!({"chart": spec, "order": order, "report": report}),
                failed,
            })
        }
        other => bail!("unknown lemma token {other:?}; expected 2.1, 2.3, 2.5 or 3.1"),
    }
}

/// Enumerates a weighted simplex staircase, reports its functionals, the
/// exact simplex volume against a lattice count, and optionally the
/// iterated-sum comparison.
pub fn cmd_staircase(
    blocks: Vec<usize>,
    delta: Vec<Rational>,
    epsilon: Rational,
    copies: Option<u32>,
) -> Result<CommandOutcome> {
    let w = staircase::SimplexStaircase::new(blocks, delta, epsilon)?;
    let enumerated = w.enumerate()?;
    let functionals = enumerated.functionals()?;

    let arity = w.arity();
    let axes: Vec<usize> = (0..arity).collect();
    let refinement = match arity {
        1 => 2048,
        2 => 256,
        _ => 64,
    };
    let volume = staircase::multiplicity_volume(&w, &axes)?;
    let estimate = staircase::lattice_volume_estimate(&w, &axes, refinement)?;

    let mut failed = false;
    let mut doc = json!({
        "blocks": w.blocks(),
        "delta": w.delta().iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "epsilon": w.epsilon().to_string(),
        "cardinality": enumerated.cardinality(),
        "functionals": functionals,
        "volume": volume,
        "lattice_estimate": estimate.to_string(),
    });
    let map = doc.as_object_mut().expect("object literal");
    if enumerated.cardinality() <= 10_000 {
        map.insert("members".into(), serde_json::to_value(enumerated.members())?);
    }
    if let Some(copies) = copies {
        let comparison = staircase::compare_iterated_sum(&w, copies)?;
        failed = !comparison.sum_inside_scaled;
        map.insert("iterated_sum".into(), serde_json::to_value(&comparison)?);
    }
    Ok(CommandOutcome { value: doc, failed })
}

/// Applies a difference operator to a multihomogeneous form through both
/// routes and certifies they agree; optionally composes with a second
/// operator and verifies the composition constants.
pub fn cmd_delta_op(
    spec: &MultiFormSpec,
    index: &MultiIndex,
    then: Option<&MultiIndex>,
) -> Result<CommandOutcome> {
    let form = spec.build()?;
    let closed = group::delta_closed(&form, index)?;
    let substituted = group::delta_subst(&form, index)?;
    let routes_agree = closed == substituted;

    let mut failed = !routes_agree;
    let mut doc = json!({
        "input": spec,
        "index": index,
        "delta": closed,
        "routes_agree": routes_agree,
    });
    let map = doc.as_object_mut().expect("object literal");
    if let Some(j) = then {
        let composition = group::delta_composition(&form, index, j)?;
        failed = failed || !composition.verified;
        map.insert("composition".into(), serde_json::to_value(&composition)?);
    }
    Ok(CommandOutcome { value: doc, failed })
}

/// Certifies the linearizing embedding on one form: monomial-basis
/// cardinality, evaluation round-trip at sampled torus points, and exact
/// height transfer.
pub fn cmd_segre(spec: &MultiFormSpec, seed: u64) -> Result<CommandOutcome> {
    let model = spec.model()?;
    let form = spec.build()?;
    let sizes: Vec<usize> = model.block_dims().iter().map(|&n| n + 1).collect();
    let degrees = spec
        .poly
        .multihomogeneous_degree(&sizes)
        .ok_or_else(|| anyhow!("form is not multihomogeneous over its blocks"))?;
    let map = segre::SegreVeroneseMap::new(&model, &degrees)?;

    let expected = segre::SegreVeroneseMap::expected_cardinality(&model, &degrees);
    let cardinality_ok = Int::from(map.cardinality()) == expected;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let points: Vec<Vec<Rational>> = (0..5)
        .map(|_| {
            (0..model.coord_count())
                .map(|_| crate::gen::nonzero_rat(&mut rng, 5))
                .collect()
        })
        .collect();
    let roundtrip_ok = map.roundtrip_check(&form, &points)?;
    let height_ok = map.height_transfer_exact(&form)?;

    let failed = !(cardinality_ok && roundtrip_ok && height_ok);
    Ok(CommandOutcome {
        value: json!({
            "input": spec,
            "degrees": degrees,
            "cardinality": map.cardinality(),
            "expected_cardinality": expected.to_string(),
            "cardinality_ok": cardinality_ok,
            "roundtrip_ok": roundtrip_ok,
            "height_transfer_ok": height_ok,
        }),
        failed,
    })
}

/// Scalar inputs of the `bounds` command. Heights are natural-log values;
/// unset block data defaults to the torus instantiation (degree-one factors
/// with bidegree (1, 1) addition).
pub struct BoundsParams {
    pub block_dims: Vec<usize>,
    pub epsilon: Rational,
    pub weights: Vec<u64>,
    pub form_degree: u32,
    pub form_height: f64,
    pub dim_v: u32,
    pub group_degree: u64,
    pub group_height: f64,
    pub neutral_height: f64,
    pub addition_height: f64,
    pub growth: f64,
    pub scale: f64,
    pub c: u32,
    pub c_prime: u32,
}

impl BoundsParams {
    fn dim(&self) -> u32 {
        self.block_dims.iter().sum::<usize>() as u32
    }

    /// Joint projective ambient of the product of the block spaces.
    fn ambient(&self) -> u64 {
        self.block_dims
            .iter()
            .map(|&n| n as u64 + 1)
            .product::<u64>()
            .saturating_sub(1)
            .max(1)
    }

    fn bidegree(&self) -> Result<bounds::AdditionBidegree> {
        Ok(bounds::AdditionBidegree::new(self.c, self.c_prime)?)
    }

    fn block_weights(&self) -> Result<Vec<u64>> {
        if self.weights.len() != self.block_dims.len() {
            bail!(
                "{} weights for {} blocks",
                self.weights.len(),
                self.block_dims.len()
            );
        }
        Ok(self.weights.clone())
    }
}

/// Evaluates one of the closed-form degree/height brackets from scalar
/// data. The two descent brackets take the group data directly; the torus
/// routes build it from the block dimensions.
pub fn cmd_bounds(theorem: &str, params: &BoundsParams, prec: Precision) -> Result<CommandOutcome> {
    if params.block_dims.is_empty() {
        bail!("at least one block dimension is required");
    }
    let form_height = LogValue::from_f64(params.form_height);
    match theorem {
        "4.13" => {
            let weights = params.block_weights()?;
            let degree = bounds::multiplicity_degree_bound(
                params.group_degree,
                &params.bidegree()?,
                params.form_degree,
                params.dim(),
                params.dim_v,
            )?;
            let inputs = bounds::MultiplicityBoundInputs {
                group_degree: params.group_degree,
                group_height: LogValue::from_f64(params.group_height),
                obstruction_dim: params.dim_v,
                form_degree: params.form_degree,
                form_height,
                addition_height: LogValue::from_f64(params.addition_height),
                bidegree: params.bidegree()?,
                ambient: params.ambient(),
                blocks: params
                    .block_dims
                    .iter()
                    .zip(&weights)
                    .map(|(&n, &w)| bounds::MultiplicityBlock {
                        log_growth: LogValue::from_f64(params.growth),
                        staircase_share: params.form_degree,
                        weight: w as u32,
                        neutral_height: LogValue::from_f64(params.neutral_height),
                        dim: n as u32,
                    })
                    .collect(),
                log_scale: LogValue::from_f64(params.scale),
            };
            let height = bounds::multiplicity_height_bound(&inputs, prec)?;
            Ok(CommandOutcome::clean(json!({
                "theorem": theorem,
                "degree": degree.to_string(),
                "height": height.to_f64(),
            })))
        }
        "5.17" => {
            let degree = bounds::multiplicity_degree_bound(
                params.group_degree,
                &params.bidegree()?,
                params.form_degree,
                params.dim(),
                params.dim_v,
            )?;
            let radius = params.weights.iter().copied().max().unwrap_or(1).max(1);
            let inputs = bounds::RefinedMultiplicityInputs {
                ambient: params.ambient(),
                dim: params.dim(),
                group_degree: params.group_degree,
                group_height: LogValue::from_f64(params.group_height),
                neutral_height: LogValue::from_f64(params.neutral_height),
                obstruction_dim: params.dim_v,
                form_degree: params.form_degree,
                form_height,
                addition_height: LogValue::from_f64(params.addition_height),
                bidegree: params.bidegree()?,
                staircase_radius: radius,
            };
            let height = bounds::refined_multiplicity_height_bound(&inputs, prec)?;
            Ok(CommandOutcome::clean(json!({
                "theorem": theorem,
                "degree": degree.to_string(),
                "staircase_radius": radius,
                "height": height.to_f64(),
            })))
        }
        "5.19" => {
            let model = TorusModel::new(params.block_dims.clone())?;
            let weights = params.block_weights()?;
            let inputs = bounds::torus_cascade_inputs(
                &model,
                &params.epsilon,
                &weights,
                &form_height,
                params.dim_v,
                prec,
            )?;
            let hypotheses = bounds::cascade_hypotheses(&inputs)?;
            let degree = bounds::cascade_degree_bound(&inputs)?;
            let height = bounds::cascade_height_bound(&inputs, prec)?;
            let gaps = bounds::torus_weight_gaps(&model, &params.epsilon, &weights)?;
            Ok(CommandOutcome::clean(json!({
                "theorem": theorem,
                "hypotheses": hypotheses,
                "weight_gaps": gaps,
                "degree": rational_string(&degree),
                "height": height.to_f64(),
            })))
        }
        "corollary" => {
            let model = TorusModel::new(params.block_dims.clone())?;
            let weights = params.block_weights()?;
            let inputs = bounds::torus_cascade_inputs(
                &model,
                &params.epsilon,
                &weights,
                &form_height,
                params.dim_v,
                prec,
            )?;
            let hypotheses = bounds::cascade_hypotheses(&inputs)?;
            let gaps = bounds::torus_weight_gaps(&model, &params.epsilon, &weights)?;
            let degree =
                bounds::torus_chain_degree_bound(&model, &params.epsilon, params.dim_v)?;
            let height = bounds::torus_chain_height_bound(
                &model,
                &params.epsilon,
                &weights,
                &form_height,
                params.dim_v,
                prec,
            )?;
            Ok(CommandOutcome::clean(json!({
                "theorem": theorem,
                "hypotheses": hypotheses,
                "weight_gaps": gaps,
                "degree": rational_string(&degree),
                "height": height.to_f64(),
            })))
        }
        other => bail!("unknown theorem token {other:?}; expected 4.13, 5.17, 5.19 or corollary"),
    }
}

/// Canonical string for an exact rational: integer when the denominator is
/// one, `p/q` otherwise.
fn rational_string(q: &Rational) -> String {
    q.to_string()
}

/// Shared measure options for one-shot commands.
pub fn measure_options(prec: Precision, seed: u64, quad_points: u32) -> MeasureOptions {
    MeasureOptions {
        precision: prec,
        quad_points,
        torus_samples: 100_000,
        sphere_samples: 50_000,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use polycert_core::logval::parse_rational;

    fn poly(src: &str) -> SparsePolynomial {
        serde_json::from_str(src).unwrap()
    }

    #[test]
    fn corollary_unit_instance_freezes_degree_one_and_height_108() {
        let params = BoundsParams {
            block_dims: vec![1],
            epsilon: Rational::from_integer(Int::from(1)),
            weights: vec![2],
            form_degree: 1,
            form_height: 0.0,
            dim_v: 0,
            group_degree: 1,
            group_height: 0.0,
            neutral_height: 0.0,
            addition_height: 0.0,
            growth: 0.0,
            scale: 0.0,
            c: 1,
            c_prime: 1,
        };
        let out = cmd_bounds("corollary", &params, Precision::default()).unwrap();
        assert_eq!(out.value["degree"], "1");
        let h = out.value["height"].as_f64().unwrap();
        assert_eq!(h, 108.0);
        assert!(!out.failed);
    }

    #[test]
    fn staircase_unit_radius_two_blocks_enumerates_five_members() {
        let delta = vec![
            parse_rational("3").unwrap(),
            parse_rational("2").unwrap(),
        ];
        let eps = parse_rational("1").unwrap();
        let out = cmd_staircase(vec![1, 1], delta, eps, Some(2)).unwrap();
        assert_eq!(out.value["cardinality"], 5);
        assert!(!out.failed);
        assert_eq!(out.value["members"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn delta_routes_agree_on_a_worked_square() {
        let spec = MultiFormSpec {
            blocks: vec![1],
            poly: poly(
                r#"{"vars": ["X0", "X1"],
                    "terms": [{"exp": [0, 2], "coef": "1"},
                              {"exp": [1, 1], "coef": "-2"},
                              {"exp": [2, 0], "coef": "1"}]}"#,
            ),
        };
        let out = cmd_delta_op(&spec, &MultiIndex(vec![1]), Some(&MultiIndex(vec![1]))).unwrap();
        assert!(!out.failed);
        assert_eq!(out.value["routes_agree"], true);
    }

    #[test]
    fn verify_bounds_rejects_unknown_tokens() {
        let err = cmd_verify_bounds(
            "9.9",
            &Value::Null,
            2,
            &[],
            Precision::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown lemma token"));
    }
}
