//! Local parametrization of a projective group variety near its neutral
//! point, and the growth certificates for the parametrization coefficients.
//!
//! The variety sits in P_N with coordinates X_0, ..., X_N and is cut out
//! incompletely by homogeneous forms P~_i(X_0, ..., X_g, X_i), one per
//! dependent coordinate i = g+1, ..., N. Dehomogenizing at X_0 = 1 and
//! solving each form for X_i as an implicit function of X_1, ..., X_g around
//! the neutral point yields coefficient tables a_I^(i); the free coordinates
//! i <= g contribute fixed affine rows. The bound checker certifies
//! max(1, |a_I^(i)|_v) against a single bracket built from all forms at
//! once, raised to |I|.
//!
//! Also here: the closed-form height bound for such charts in terms of
//! (N, g, deg, heights), the exact height of projective n-space, and the
//! gauge psi(n) = (n+1) log 2 - h(P_n) that controls when the doubling
//! factor beats the projective-space height.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::implicit::{rational_pow, solve_series_taylor, ImplicitProblem};
use crate::logval::{ln2, LogValue, Precision};
use crate::places::{self, Place};
use crate::poly::{MultiIndex, SparsePolynomial};
use crate::{CoreError, Int, Rational, Result};

/// A normalized chart: neutral point with first coordinate 1, and one
/// defining form per dependent coordinate, each touching only X_0..X_g and
/// its own X_i, vanishing at the neutral point, with at least one
/// coefficient exactly 1 and a nonvanishing X_i-derivative there.
#[derive(Clone, Debug)]
pub struct GroupChart {
    g: usize,
    /// Ambient projective dimension N; the neutral point has N+1 coordinates.
    ambient: usize,
    /// forms[k] defines coordinate i = g + 1 + k; arity N + 1.
    forms: Vec<SparsePolynomial>,
    neutral: Vec<Rational>,
}

impl GroupChart {
    pub fn new(
        g: usize,
        neutral: Vec<Rational>,
        forms: Vec<SparsePolynomial>,
    ) -> Result<Self> {
        if g < 1 {
            return Err(CoreError::Malformed("chart needs group dimension >= 1".into()));
        }
        if neutral.len() < g + 1 {
            return Err(CoreError::Malformed(format!(
                "neutral point has {} coordinates for group dimension {}",
                neutral.len(),
                g
            )));
        }
        let ambient = neutral.len() - 1;
        if forms.len() != ambient - g {
            return Err(CoreError::Malformed(format!(
                "{} defining forms for {} dependent coordinates",
                forms.len(),
                ambient - g
            )));
        }
        if !neutral[0].is_one() {
            return Err(CoreError::Degenerate(
                "neutral point must have first coordinate 1".into(),
            ));
        }
        let chart = GroupChart {
            g,
            ambient,
            forms,
            neutral,
        };
        for (k, form) in chart.forms.iter().enumerate() {
            let i = g + 1 + k;
            if form.arity() != ambient + 1 {
                return Err(CoreError::VarMismatch(format!(
                    "form for coordinate {} has arity {}, ambient needs {}",
                    i,
                    form.arity(),
                    ambient + 1
                )));
            }
            if form.is_zero() {
                return Err(CoreError::Degenerate(format!(
                    "form for coordinate {i} is zero"
                )));
            }
            if form.homogeneous_degree().is_none() {
                return Err(CoreError::Malformed(format!(
                    "form for coordinate {i} is not homogeneous"
                )));
            }
            for (e, _) in form.terms() {
                let outside = (0..=ambient)
                    .any(|j| e.0[j] != 0 && j > g && j != i);
                if outside {
                    return Err(CoreError::Malformed(format!(
                        "form for coordinate {i} uses a coordinate other than X_0..X_{g} and X_{i}"
                    )));
                }
            }
            if !form.coefficients().any(|c| c.is_one()) {
                return Err(CoreError::Degenerate(format!(
                    "form for coordinate {i} has no coefficient equal to 1"
                )));
            }
            if !form.eval(&chart.neutral).is_zero() {
                return Err(CoreError::Degenerate(format!(
                    "form for coordinate {i} does not vanish at the neutral point"
                )));
            }
            // Delegates the remaining regularity condition (nonzero
            // X_i-derivative at the dehomogenized base) to the implicit
            // problem constructor.
            chart.implicit_problem_for(i)?;
        }
        Ok(chart)
    }

    pub fn g(&self) -> usize {
        self.g
    }

    /// Ambient projective dimension N.
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn neutral(&self) -> &[Rational] {
        &self.neutral
    }

    pub fn forms(&self) -> &[SparsePolynomial] {
        &self.forms
    }

    /// Largest total degree among the defining forms; 1 for a chart with no
    /// dependent coordinates (a bare torus factor in P_g).
    pub fn degree(&self) -> u32 {
        self.forms
            .iter()
            .filter_map(|f| f.homogeneous_degree())
            .max()
            .unwrap_or(1)
    }

    /// The implicit problem for dependent coordinate i: the form
    /// dehomogenized at X_0 = 1 and compacted to variables
    /// (X_1, ..., X_g, X_i), X_i last, based at the matching neutral
    /// coordinates. X_0-exponents collapse without collisions because the
    /// form is homogeneous.
    pub fn implicit_problem_for(&self, i: usize) -> Result<ImplicitProblem> {
        if i <= self.g || i > self.ambient {
            return Err(CoreError::Malformed(format!(
                "coordinate {} is not dependent (g = {}, N = {})",
                i, self.g, self.ambient
            )));
        }
        let form = &self.forms[i - self.g - 1];
        let mut names: Vec<String> = form.vars()[1..=self.g].to_vec();
        names.push(form.vars()[i].clone());
        let terms: Vec<(MultiIndex, Rational)> = form
            .terms()
            .map(|(e, c)| {
                let mut ne: Vec<u16> = e.0[1..=self.g].to_vec();
                ne.push(e.0[i]);
                (MultiIndex(ne), c.clone())
            })
            .collect();
        let p = SparsePolynomial::from_terms(names, terms)?;
        let mut base: Vec<Rational> = self.neutral[1..=self.g].to_vec();
        base.push(self.neutral[i].clone());
        ImplicitProblem::new(p, base, form.homogeneous_degree().expect("validated"))
    }

    /// Coefficient tables a_I^(i) for i = 0..=N through the given order,
    /// over indices I in N^g. Row 0 is the constant 1; rows 1..=g are the
    /// affine pattern e_i + T_i; dependent rows come from the implicit
    /// solver.
    pub fn table(&self, order: u32) -> Result<Vec<BTreeMap<MultiIndex, Rational>>> {
        let blank: BTreeMap<MultiIndex, Rational> = MultiIndex::all_upto(self.g, order)
            .into_iter()
            .map(|i| (i, Rational::zero()))
            .collect();
        let mut rows = Vec::with_capacity(self.ambient + 1);
        let mut row0 = blank.clone();
        row0.insert(MultiIndex::zero(self.g), Rational::one());
        rows.push(row0);
        for i in 1..=self.g {
            let mut row = blank.clone();
            row.insert(MultiIndex::zero(self.g), self.neutral[i].clone());
            if order >= 1 {
                row.insert(MultiIndex::unit(self.g, i - 1), Rational::one());
            }
            rows.push(row);
        }
        for i in (self.g + 1)..=self.ambient {
            let problem = self.implicit_problem_for(i)?;
            rows.push(solve_series_taylor(&problem, order)?);
        }
        Ok(rows)
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ChartPlaceCheck {
    pub place: Place,
    /// Number of (coordinate, index) pairs compared.
    pub pairs: usize,
    /// Smallest log(rhs/lhs) over the pairs; nonnegative when all hold.
    pub min_margin: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ChartBoundsReport {
    pub order: u32,
    /// Degree used in the bracket (the chart degree unless overridden).
    pub degree: u32,
    pub checks: Vec<ChartPlaceCheck>,
    pub ok: bool,
}

/// The per-place bracket F_v that caps one step of coefficient growth:
/// H_v(e)^(2(d-1)), times, for each dependent coordinate j, H_v(P~_j)^2 *
/// max(1, |1 / (dP_j/dX_j)(base_j)|_v)^2, times 8g d^3 (d+1)^(2(g+1)) at
/// the archimedean place only. The degree d must dominate the chart degree.
pub fn growth_bracket_v(chart: &GroupChart, v: &Place, degree: u32) -> Result<Rational> {
    let g = chart.g();
    if degree < chart.degree() {
        return Err(CoreError::Malformed(format!(
            "bracket degree {} is below the chart degree {}",
            degree,
            chart.degree()
        )));
    }
    let he = places::log_sup_norm_v(chart.neutral(), v);
    let mut bracket = rational_pow(&he, 2 * (degree - 1));
    for form in chart.forms() {
        let h = form.gauss_weil_v(v);
        bracket *= &h * &h;
    }
    for i in (g + 1)..=chart.ambient_dim() {
        let inv = Rational::one() / chart.implicit_problem_for(i)?.dp_dt_at_base();
        let a = places::abs_v(&inv, v);
        let m = if a > Rational::one() { a } else { Rational::one() };
        bracket *= &m * &m;
    }
    if !v.is_finite() {
        bracket *= Rational::from_integer(
            Int::from(8 * g as u64)
                * Int::from(degree).pow(3)
                * Int::from(degree + 1).pow(2 * (g as u32 + 1)),
        );
    }
    Ok(bracket)
}

/// Every rational whose prime support can make the growth bracket differ
/// from 1 at a finite place: neutral coordinates, form coefficients, and
/// the inverted derivatives at the base points.
pub fn bracket_support(chart: &GroupChart) -> Result<Vec<Rational>> {
    let mut support: Vec<Rational> = chart.neutral().to_vec();
    for form in chart.forms() {
        support.extend(form.coefficients().cloned());
    }
    for i in (chart.g() + 1)..=chart.ambient_dim() {
        support.push(Rational::one() / chart.implicit_problem_for(i)?.dp_dt_at_base());
    }
    Ok(support)
}

/// Certifies, at each requested place and for every coordinate i and index
/// |I| <= order, that
///
///   max(1, |a_I^(i)|_v) <= bracket_v^|I| * H_v(e)
///
/// with bracket_v from [`growth_bracket_v`]. All comparisons are exact;
/// margins are reported as logs.
pub fn verify_chart_bounds(
    chart: &GroupChart,
    order: u32,
    places_list: &[Place],
    degree_override: Option<u32>,
    prec: Precision,
) -> Result<ChartBoundsReport> {
    let d = degree_override.unwrap_or_else(|| chart.degree());
    let table = chart.table(order)?;

    let mut checks = Vec::new();
    for v in places_list {
        let he = places::log_sup_norm_v(chart.neutral(), v);
        let bracket = growth_bracket_v(chart, v, d)?;
        let mut pows = Vec::with_capacity(order as usize + 1);
        pows.push(Rational::one());
        for k in 1..=order as usize {
            pows.push(&pows[k - 1] * &bracket);
        }

        let mut ok = true;
        let mut pairs = 0usize;
        let mut min_margin = f64::INFINITY;
        for row in &table {
            for (index, a) in row {
                let mut lhs = places::abs_v(a, v);
                if lhs < Rational::one() {
                    lhs = Rational::one();
                }
                let rhs = &pows[index.total() as usize] * &he;
                if lhs > rhs {
                    ok = false;
                }
                let margin = LogValue::ln_rational(&(&rhs / &lhs), prec).to_f64();
                if margin < min_margin {
                    min_margin = margin;
                }
                pairs += 1;
            }
        }
        checks.push(ChartPlaceCheck {
            place: *v,
            pairs,
            min_margin,
            ok,
        });
    }
    let ok = checks.iter().all(|c| c.ok);
    Ok(ChartBoundsReport {
        order,
        degree: d,
        checks,
        ok,
    })
}

/// Closed-form height bound for a degree-d chart of a g-dimensional group
/// in P_N with form height hG and neutral-point height hE:
///
///   4(N-g) hG + [2(N-g+1) hE + 4(N-g)] d + (N-g+1)(2g+5)(log d + 1)
///     - 2(N-g+1) hE.
pub fn chart_height_bound(
    ambient: u64,
    g: u64,
    degree: u64,
    h_forms: &LogValue,
    h_neutral: &LogValue,
    prec: Precision,
) -> Result<LogValue> {
    if g < 1 || ambient < g {
        return Err(CoreError::Malformed(format!(
            "chart shape needs N >= g >= 1, got N = {ambient}, g = {g}"
        )));
    }
    if degree == 0 {
        return Err(CoreError::Malformed("chart degree must be positive".into()));
    }
    let nm = (ambient - g) as i64;
    let gi = g as i64;
    let linear = (h_neutral.scale_i64(2 * (nm + 1)) + LogValue::from_f64(4.0 * nm as f64))
        .scale_i64(degree as i64);
    let log_term =
        (LogValue::ln_u64(degree, prec) + LogValue::from_f64(1.0)).scale_i64((nm + 1) * (2 * gi + 5));
    Ok(h_forms.scale_i64(4 * nm) + linear + log_term - h_neutral.scale_i64(2 * (nm + 1)))
}

/// Exact height of projective n-space: ((n+1)/2) (1/2 + 1/3 + ... + 1/(n+1)).
pub fn projective_space_height(n: u64) -> Rational {
    let mut s = Rational::zero();
    for k in 2..=(n + 1) {
        s += Rational::new(Int::one(), Int::from(k));
    }
    s * Rational::new(Int::from(n + 1), Int::from(2u8))
}

/// psi(n) = (n+1) log 2 - h(P_n); positive exactly when doubling beats the
/// projective-space height, which stops at n = 5.
pub fn psi(n: u64, prec: Precision) -> LogValue {
    ln2(prec).scale_i64(n as i64 + 1) - LogValue::from_rational(&projective_space_height(n), prec)
}

/// psi(0), ..., psi(max_n) with the harmonic sum updated exactly once per
/// step and converted at the end of each step. The f64 conversion error is
/// orders of magnitude below the |psi| margins away from the sign change.
pub fn psi_sweep(max_n: u64) -> Vec<f64> {
    use num_traits::ToPrimitive;
    let ln2 = std::f64::consts::LN_2;
    let mut sum = Rational::zero();
    let mut out = Vec::with_capacity(max_n as usize + 1);
    for n in 0..=max_n {
        if n >= 1 {
            sum += Rational::new(Int::one(), Int::from(n + 1));
        }
        let h = (&sum * Rational::new(Int::from(n + 1), Int::from(2u8)))
            .to_f64()
            .expect("finite harmonic value");
        out.push((n + 1) as f64 * ln2 - h);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logval::parse_rational;
    use crate::poly::tests_support::parse_poly;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn qs(xs: &[&str]) -> Vec<Rational> {
        xs.iter().map(|s| q(s)).collect()
    }

    fn idx(e: &[u16]) -> MultiIndex {
        MultiIndex(e.to_vec())
    }

    /// The conic X_2 X_0 = X_1^2 in P_2 with neutral point (1 : 0 : 0).
    fn conic() -> GroupChart {
        let form = parse_poly(&["X0", "X1", "X2"], "X2*X0 - X1^2");
        GroupChart::new(1, qs(&["1", "0", "0"]), vec![form]).unwrap()
    }

    #[test]
    fn conic_chart_parametrizes_to_a_square() {
        let chart = conic();
        assert_eq!(chart.degree(), 2);
        let rows = chart.table(3).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0][&idx(&[0])], q("1"));
        assert!(rows[0].iter().filter(|(_, v)| !v.is_zero()).count() == 1);
        assert_eq!(rows[1][&idx(&[0])], q("0"));
        assert_eq!(rows[1][&idx(&[1])], q("1"));
        // f_2(T) = (0 + T)^2.
        assert_eq!(rows[2][&idx(&[2])], q("1"));
        assert!(rows[2]
            .iter()
            .filter(|(_, v)| !v.is_zero())
            .all(|(i, _)| *i == idx(&[2])));
    }

    #[test]
    fn shifted_conic_chart_expands_the_square() {
        // Neutral point (1 : 1/2 : 1/4) on the same conic: f_2 = (1/2 + T)^2.
        let form = parse_poly(&["X0", "X1", "X2"], "X2*X0 - X1^2");
        let chart = GroupChart::new(1, qs(&["1", "1/2", "1/4"]), vec![form]).unwrap();
        let rows = chart.table(2).unwrap();
        assert_eq!(rows[2][&idx(&[0])], q("1/4"));
        assert_eq!(rows[2][&idx(&[1])], q("1"));
        assert_eq!(rows[2][&idx(&[2])], q("1"));
        let report = verify_chart_bounds(
            &chart,
            2,
            &[Place::Infinite, Place::Finite(2)],
            None,
            Precision::default(),
        )
        .unwrap();
        assert!(report.ok);
        for c in &report.checks {
            assert!(c.min_margin >= 0.0, "margin at {:?}", c.place);
            assert_eq!(c.pairs, 3 * 3);
        }
    }

    #[test]
    fn bare_torus_chart_has_no_forms() {
        let chart = GroupChart::new(1, qs(&["1", "1"]), vec![]).unwrap();
        assert_eq!(chart.degree(), 1);
        let rows = chart.table(2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][&idx(&[0])], q("1"));
        assert_eq!(rows[1][&idx(&[1])], q("1"));
        let report = verify_chart_bounds(
            &chart,
            2,
            &[Place::Infinite, Place::Finite(3)],
            None,
            Precision::default(),
        )
        .unwrap();
        assert!(report.ok);
    }

    #[test]
    fn chart_constructor_rejects_degenerate_data() {
        let form = parse_poly(&["X0", "X1", "X2"], "X2*X0 - X1^2");
        // Neutral coordinate 0 must be exactly 1.
        assert!(GroupChart::new(1, qs(&["2", "0", "0"]), vec![form.clone()]).is_err());
        // The form must vanish at the neutral point.
        assert!(GroupChart::new(1, qs(&["1", "0", "1"]), vec![form.clone()]).is_err());
        // Wrong number of forms.
        assert!(GroupChart::new(1, qs(&["1", "0", "0"]), vec![]).is_err());
        // No coefficient equal to one.
        let scaled = parse_poly(&["X0", "X1", "X2"], "2*X2*X0 - 3*X1^2");
        assert!(GroupChart::new(1, qs(&["1", "0", "0"]), vec![scaled]).is_err());
        // X_2-derivative vanishing at the base: X_2^2 - X_1 X_0 at (1:0:0).
        let tangent = parse_poly(&["X0", "X1", "X2"], "X2^2 - X1*X0");
        assert!(GroupChart::new(1, qs(&["1", "0", "0"]), vec![tangent]).is_err());
        // A form touching a foreign dependent coordinate.
        let foreign = parse_poly(&["X0", "X1", "X2", "X3"], "X2*X0 - X3^2");
        let ok_form = parse_poly(&["X0", "X1", "X2", "X3"], "X3*X0 - X1^2");
        assert!(GroupChart::new(1, qs(&["1", "0", "0", "0"]), vec![foreign, ok_form]).is_err());
        // Inhomogeneous form.
        let affine = parse_poly(&["X0", "X1", "X2"], "X2 - X1^2");
        assert!(GroupChart::new(1, qs(&["1", "0", "0"]), vec![affine]).is_err());
    }

    #[test]
    fn conic_bounds_hold_with_margin() {
        let chart = conic();
        let report = verify_chart_bounds(
            &chart,
            3,
            &[Place::Infinite, Place::Finite(2), Place::Finite(5)],
            None,
            Precision::default(),
        )
        .unwrap();
        assert!(report.ok);
        assert_eq!(report.degree, 2);
        for c in &report.checks {
            assert!(c.min_margin >= 0.0);
        }
        // Degree overrides below the true degree are refused.
        assert!(verify_chart_bounds(
            &chart,
            2,
            &[Place::Infinite],
            Some(1),
            Precision::default()
        )
        .is_err());
    }

    #[test]
    fn height_bound_collapses_to_seven() {
        let zero = LogValue::from_f64(0.0);
        let b = chart_height_bound(1, 1, 1, &zero, &zero, Precision::default()).unwrap();
        assert!((b.to_f64() - 7.0).abs() < 1e-12);
        assert!(chart_height_bound(0, 1, 1, &zero, &zero, Precision::default()).is_err());
        assert!(chart_height_bound(2, 0, 1, &zero, &zero, Precision::default()).is_err());
    }

    #[test]
    fn projective_heights_match_hand_values() {
        assert_eq!(projective_space_height(0), q("0"));
        assert_eq!(projective_space_height(1), q("1/2"));
        // (3/2)(1/2 + 1/3) = 5/4.
        assert_eq!(projective_space_height(2), q("5/4"));
    }

    #[test]
    fn psi_changes_sign_at_five_and_stays_negative() {
        let prec = Precision::default();
        assert!((psi(0, prec).to_f64() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(psi(4, prec).to_f64() > 0.0);
        assert!(psi(5, prec).to_f64() < 0.0);
        let sweep = psi_sweep(300);
        assert_eq!(sweep.len(), 301);
        for (n, value) in sweep.iter().enumerate() {
            assert!(*value <= 1.0, "psi({n}) = {value}");
            if n >= 5 {
                assert!(*value < 0.0, "psi({n}) = {value}");
            }
            assert!((value - psi(n as u64, prec).to_f64()).abs() < 1e-9);
        }
    }
}
