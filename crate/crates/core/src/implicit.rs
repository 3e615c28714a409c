//! Implicit-function series for a polynomial constraint with a marked
//! rational solution.
//!
//! Given P in variables (Y_1, ..., Y_n, T) with P(x) = 0 and dP/dT(x) != 0
//! at a rational point x = (y, t), there is a unique formal series U(X) in
//! offset variables X_1, ..., X_n, without constant term, satisfying
//! P(Y + X, T + U) = P(Y, T) identically. Its coefficients live in the
//! coefficient ring localized at dP/dT, and specializing at x yields the
//! Taylor expansion of the implicit branch t(y + X).
//!
//! Three independent routes to the same numbers are provided: the slice
//! recursion run symbolically (with denominator powers kept observable), the
//! same recursion with coefficients specialized at the base point, and a
//! cofactor recursion that produces for each index I a polynomial P_I with
//! a_I = P_I(x) / (dP/dT)(x)^(2|I|-1). On top of these sit exact audits of
//! denominator powers, of degree and length growth of the cofactors, and of
//! per-place and height growth of the Taylor coefficients.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, ToPrimitive, Zero};

use crate::localized::LocalizedPolynomial;
use crate::logval::{LogValue, Precision};
use crate::measures;
use crate::places::{self, Place};
use crate::poly::{MultiIndex, SparsePolynomial};
use crate::verdict::Verdict;
use crate::{CoreError, Int, Rational, Result};

/// Slices grow combinatorially with the order; this cap keeps a malformed
/// request from exhausting memory before producing anything useful.
pub const MAX_ORDER: u32 = 32;

fn check_order(order: u32) -> Result<()> {
    if order > MAX_ORDER {
        return Err(CoreError::Budget(format!(
            "expansion order {order} exceeds the cap {MAX_ORDER}"
        )));
    }
    Ok(())
}

pub(crate) fn rational_pow(q: &Rational, k: u32) -> Rational {
    let mut r = Rational::one();
    for _ in 0..k {
        r *= q;
    }
    r
}

fn int_rational(n: Int) -> Rational {
    Rational::from_integer(n)
}

/// A polynomial constraint in variables (Y_1, ..., Y_n, T), T last, together
/// with a rational base point where the constraint vanishes and its
/// T-derivative does not, and a declared total-degree bound used by every
/// growth certificate. Construction validates all of that; the solvers can
/// then assume a regular point.
#[derive(Clone, Debug)]
pub struct ImplicitProblem {
    p: SparsePolynomial,
    base_point: Vec<Rational>,
    degree_bound: u32,
}

impl ImplicitProblem {
    pub fn new(
        p: SparsePolynomial,
        base_point: Vec<Rational>,
        degree_bound: u32,
    ) -> Result<Self> {
        if p.arity() < 2 {
            return Err(CoreError::Malformed(
                "implicit problem needs at least one Y variable besides T".into(),
            ));
        }
        if base_point.len() != p.arity() {
            return Err(CoreError::VarMismatch(format!(
                "base point has {} coordinates for {} variables",
                base_point.len(),
                p.arity()
            )));
        }
        if degree_bound == 0 {
            return Err(CoreError::Malformed("degree bound must be positive".into()));
        }
        if !p.total_degree().leq(degree_bound) {
            return Err(CoreError::TotalDegree(degree_bound));
        }
        if !p.eval(&base_point).is_zero() {
            return Err(CoreError::Degenerate(
                "constraint does not vanish at the base point".into(),
            ));
        }
        let dp = p.partial_derivative(p.arity() - 1);
        if dp.eval(&base_point).is_zero() {
            return Err(CoreError::Degenerate(
                "T-derivative vanishes at the base point".into(),
            ));
        }
        Ok(ImplicitProblem {
            p,
            base_point,
            degree_bound,
        })
    }

    pub fn p(&self) -> &SparsePolynomial {
        &self.p
    }

    pub fn base_point(&self) -> &[Rational] {
        &self.base_point
    }

    /// Number of free variables Y_1, ..., Y_n.
    pub fn n(&self) -> usize {
        self.p.arity() - 1
    }

    /// Index of T in the variable list (always the last position).
    pub fn t_index(&self) -> usize {
        self.p.arity() - 1
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    pub fn t_value(&self) -> &Rational {
        &self.base_point[self.t_index()]
    }

    pub fn dp_dt(&self) -> SparsePolynomial {
        self.p.partial_derivative(self.t_index())
    }

    pub fn dp_dt_at_base(&self) -> Rational {
        self.dp_dt().eval(&self.base_point)
    }
}

/// One divided derivative D^(theta, m) P from the support of P, split into
/// its Y-part theta and its T-order m. Enumerated from the monomial support,
/// so every listed derivative is nonzero.
struct Lambda {
    theta: MultiIndex,
    m: u32,
    deriv: SparsePolynomial,
}

fn lambda_table(p: &SparsePolynomial) -> Vec<Lambda> {
    let arity = p.arity();
    let mut support: BTreeSet<MultiIndex> = BTreeSet::new();
    let mut cur = vec![0u16; arity];
    for (exp, _) in p.terms() {
        collect_sub_indices(&exp.0, 0, &mut cur, &mut support);
    }
    support.remove(&MultiIndex::zero(arity));
    support
        .into_iter()
        .map(|j| {
            let deriv = p.divided_derivative(&j);
            debug_assert!(!deriv.is_zero());
            let m = u32::from(j.0[arity - 1]);
            let theta = MultiIndex(j.0[..arity - 1].to_vec());
            Lambda { theta, m, deriv }
        })
        .collect()
}

fn collect_sub_indices(
    exp: &[u16],
    k: usize,
    cur: &mut Vec<u16>,
    out: &mut BTreeSet<MultiIndex>,
) {
    if k == exp.len() {
        out.insert(MultiIndex(cur.clone()));
        return;
    }
    for v in 0..=exp[k] {
        cur[k] = v;
        collect_sub_indices(exp, k + 1, cur, out);
    }
}

/// Coefficient carrier for the slice recursion. The symbolic carrier keeps
/// numerators over (Y, T) with the power of dP/dT tracked and never reduced;
/// the rational carrier pushes everything through evaluation at the base
/// point, which commutes with all ring operations because dP/dT does not
/// vanish there.
trait SliceRing {
    type Elem: Clone;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn deriv_elem(&self, idx: usize) -> Self::Elem;
    fn mul_deriv(&self, a: &Self::Elem, idx: usize) -> Self::Elem;
    fn neg_div_base(&self, a: &Self::Elem) -> Self::Elem;
}

struct SymbolicRing {
    derivs: Vec<SparsePolynomial>,
    base: SparsePolynomial,
}

impl SliceRing for SymbolicRing {
    type Elem = LocalizedPolynomial;

    fn is_zero(&self, a: &LocalizedPolynomial) -> bool {
        a.is_zero()
    }

    fn add(&self, a: &LocalizedPolynomial, b: &LocalizedPolynomial) -> LocalizedPolynomial {
        a.add(b, &self.base)
    }

    fn mul(&self, a: &LocalizedPolynomial, b: &LocalizedPolynomial) -> LocalizedPolynomial {
        a.mul(b)
    }

    fn deriv_elem(&self, idx: usize) -> LocalizedPolynomial {
        LocalizedPolynomial::from_poly(self.derivs[idx].clone())
    }

    fn mul_deriv(&self, a: &LocalizedPolynomial, idx: usize) -> LocalizedPolynomial {
        a.mul_poly(&self.derivs[idx])
    }

    fn neg_div_base(&self, a: &LocalizedPolynomial) -> LocalizedPolynomial {
        a.neg().div_base()
    }
}

struct RationalRing {
    deriv_values: Vec<Rational>,
    base_value: Rational,
}

impl SliceRing for RationalRing {
    type Elem = Rational;

    fn is_zero(&self, a: &Rational) -> bool {
        a.is_zero()
    }

    fn add(&self, a: &Rational, b: &Rational) -> Rational {
        a + b
    }

    fn mul(&self, a: &Rational, b: &Rational) -> Rational {
        a * b
    }

    fn deriv_elem(&self, idx: usize) -> Rational {
        self.deriv_values[idx].clone()
    }

    fn mul_deriv(&self, a: &Rational, idx: usize) -> Rational {
        a * &self.deriv_values[idx]
    }

    fn neg_div_base(&self, a: &Rational) -> Rational {
        -(a / &self.base_value)
    }
}

/// A homogeneous slice: X-exponents of one total degree mapped to
/// coefficients in the carrier ring. Entries are kept nonzero.
type SliceMap<E> = BTreeMap<MultiIndex, E>;

fn accumulate<R: SliceRing>(
    ring: &R,
    map: &mut SliceMap<R::Elem>,
    key: MultiIndex,
    val: R::Elem,
) {
    if ring.is_zero(&val) {
        return;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let sum = ring.add(e.get(), &val);
            if ring.is_zero(&sum) {
                e.remove();
            } else {
                *e.get_mut() = sum;
            }
        }
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(val);
        }
    }
}

/// Slice-by-slice solver: built[m-1] is the degree-m homogeneous slice of U.
/// The power table memoizes slices of U^k. During the solve every request
/// with k >= 2 at degree j only involves V_i with i <= j - k + 1, which are
/// already final, so memo entries never go stale as U grows; after the solve
/// the table answers for arbitrary degrees.
struct SliceSolver<R: SliceRing> {
    ring: R,
    /// (theta, m) per divided derivative; the ring resolves the derivative by
    /// its position in this list.
    lambdas: Vec<(MultiIndex, u32)>,
    built: Vec<SliceMap<R::Elem>>,
    power_memo: HashMap<(u32, u32), SliceMap<R::Elem>>,
}

impl<R: SliceRing> SliceSolver<R> {
    fn v_slice(&self, j: u32) -> Option<&SliceMap<R::Elem>> {
        if j >= 1 && (j as usize) <= self.built.len() {
            Some(&self.built[j as usize - 1])
        } else {
            None
        }
    }

    /// Degree-j slice of U^k as ordered products of built slices.
    fn power_slice(&mut self, k: u32, j: u32) -> SliceMap<R::Elem> {
        debug_assert!(k >= 1);
        if k == 1 {
            return self.v_slice(j).cloned().unwrap_or_default();
        }
        if j < k {
            return SliceMap::new();
        }
        if let Some(s) = self.power_memo.get(&(k, j)) {
            return s.clone();
        }
        let mut out = SliceMap::new();
        for i in 1..=(j - k + 1) {
            let Some(vi) = self.v_slice(i).cloned() else {
                continue;
            };
            if vi.is_empty() {
                continue;
            }
            let rest = self.power_slice(k - 1, j - i);
            for (g1, c1) in &vi {
                for (g2, c2) in &rest {
                    let prod = self.ring.mul(c1, c2);
                    accumulate(&self.ring, &mut out, g1.add(g2), prod);
                }
            }
        }
        self.power_memo.insert((k, j), out.clone());
        out
    }

    /// Solve for the next slice: collect the degree-(len+1) part of
    /// P(Y + X, T + U) contributed by everything already known, then divide
    /// by -dP/dT. The unknown linear T-term is exactly the slice being
    /// solved for, and it is absent from the collection because U has no
    /// slice of that degree yet.
    fn advance(&mut self) {
        let step = self.built.len() as u32 + 1;
        let mut b: SliceMap<R::Elem> = SliceMap::new();
        for li in 0..self.lambdas.len() {
            let (theta, m) = self.lambdas[li].clone();
            let t = theta.total();
            if t > step {
                continue;
            }
            let rem = step - t;
            if m == 0 {
                if rem == 0 {
                    let e = self.ring.deriv_elem(li);
                    accumulate(&self.ring, &mut b, theta, e);
                }
                continue;
            }
            if rem < m {
                continue;
            }
            let ps = self.power_slice(m, rem);
            for (gamma, c) in &ps {
                let scaled = self.ring.mul_deriv(c, li);
                accumulate(&self.ring, &mut b, theta.add(gamma), scaled);
            }
        }
        let mut v = SliceMap::new();
        for (g, c) in b {
            let w = self.ring.neg_div_base(&c);
            if !self.ring.is_zero(&w) {
                v.insert(g, w);
            }
        }
        self.built.push(v);
    }

    fn run(&mut self, order: u32) {
        while (self.built.len() as u32) < order {
            self.advance();
        }
    }

    /// Degree-j slice of P(Y + X, T + U) - P(Y, T) over the final table,
    /// including the linear T-term. Zero for 1 <= j <= the solved order by
    /// construction; above it, the slice carries the residual whose
    /// denominator powers are audited.
    fn phi_slice(&mut self, j: u32) -> SliceMap<R::Elem> {
        let mut out = SliceMap::new();
        for li in 0..self.lambdas.len() {
            let (theta, m) = self.lambdas[li].clone();
            let t = theta.total();
            if t > j {
                continue;
            }
            let rem = j - t;
            if m == 0 {
                if rem == 0 {
                    let e = self.ring.deriv_elem(li);
                    accumulate(&self.ring, &mut out, theta, e);
                }
                continue;
            }
            if rem < m {
                continue;
            }
            let ps = self.power_slice(m, rem);
            for (gamma, c) in &ps {
                let scaled = self.ring.mul_deriv(c, li);
                accumulate(&self.ring, &mut out, theta.add(gamma), scaled);
            }
        }
        out
    }

    /// Largest X-degree P(Y + X, T + U) can reach over the current table.
    fn max_phi_degree(&self) -> u32 {
        let order = self.built.len() as u32;
        self.lambdas
            .iter()
            .map(|(theta, m)| theta.total() + m * order)
            .max()
            .unwrap_or(0)
    }
}

fn symbolic_solver(problem: &ImplicitProblem) -> SliceSolver<SymbolicRing> {
    let table = lambda_table(problem.p());
    let lambdas = table.iter().map(|l| (l.theta.clone(), l.m)).collect();
    let derivs = table.into_iter().map(|l| l.deriv).collect();
    SliceSolver {
        ring: SymbolicRing {
            derivs,
            base: problem.dp_dt(),
        },
        lambdas,
        built: Vec::new(),
        power_memo: HashMap::new(),
    }
}

fn symbolic_solver_seeded(
    problem: &ImplicitProblem,
    slices: Vec<SliceMap<LocalizedPolynomial>>,
) -> SliceSolver<SymbolicRing> {
    let mut solver = symbolic_solver(problem);
    solver.built = slices;
    solver
}

fn rational_solver(problem: &ImplicitProblem) -> SliceSolver<RationalRing> {
    let table = lambda_table(problem.p());
    let lambdas = table.iter().map(|l| (l.theta.clone(), l.m)).collect();
    let deriv_values = table
        .iter()
        .map(|l| l.deriv.eval(problem.base_point()))
        .collect();
    SliceSolver {
        ring: RationalRing {
            deriv_values,
            base_value: problem.dp_dt_at_base(),
        },
        lambdas,
        built: Vec::new(),
        power_memo: HashMap::new(),
    }
}

/// Truncated solution of the implicit equation: symbolic slices (slice m-1
/// maps X-exponents of total degree m to coefficients num / (dP/dT)^pow) and
/// the exact Taylor table of the branch at the base point. The table carries
/// every index of total degree <= order; the constant entry is the
/// T-coordinate of the base point.
#[derive(Clone, Debug)]
pub struct SeriesSolution {
    pub order: u32,
    pub slices: Vec<BTreeMap<MultiIndex, LocalizedPolynomial>>,
    pub taylor: BTreeMap<MultiIndex, Rational>,
}

fn full_table(problem: &ImplicitProblem, order: u32) -> BTreeMap<MultiIndex, Rational> {
    let mut t: BTreeMap<MultiIndex, Rational> = MultiIndex::all_upto(problem.n(), order)
        .into_iter()
        .map(|i| (i, Rational::zero()))
        .collect();
    t.insert(MultiIndex::zero(problem.n()), problem.t_value().clone());
    t
}

/// Symbolic solve through the given order, plus specialization of every
/// slice coefficient at the base point.
pub fn solve_series(problem: &ImplicitProblem, order: u32) -> Result<SeriesSolution> {
    check_order(order)?;
    let mut solver = symbolic_solver(problem);
    solver.run(order);
    let base_at = problem.dp_dt_at_base();
    let mut taylor = full_table(problem, order);
    for slice in &solver.built {
        for (gamma, c) in slice {
            taylor.insert(gamma.clone(), c.eval(problem.base_point(), &base_at));
        }
    }
    Ok(SeriesSolution {
        order,
        slices: solver.built,
        taylor,
    })
}

/// The same recursion with coefficients specialized at the base point from
/// the start: cheap exact route to the Taylor table alone.
pub fn solve_series_taylor(
    problem: &ImplicitProblem,
    order: u32,
) -> Result<BTreeMap<MultiIndex, Rational>> {
    check_order(order)?;
    let mut solver = rational_solver(problem);
    solver.run(order);
    let mut taylor = full_table(problem, order);
    for slice in &solver.built {
        for (gamma, c) in slice {
            taylor.insert(gamma.clone(), c.clone());
        }
    }
    Ok(taylor)
}

/// One exact probe of the defining identity. With (Y, T) frozen at a
/// rational point where dP/dT does not vanish, the polynomial
/// P(y + X, t + u(X)) - P(y, t), u the specialized series, must have no
/// X-terms in degrees 1..=order. The composition is carried out in exact
/// polynomial arithmetic over the X variables and does not reuse the
/// solver's power table, so a wrong slice cannot cancel itself. The probe
/// point need not lie on the constraint. Returns (degree, vanished) pairs.
pub fn defining_identity_check(
    problem: &ImplicitProblem,
    solution: &SeriesSolution,
    point: &[Rational],
) -> Result<Vec<(u32, bool)>> {
    if point.len() != problem.p().arity() {
        return Err(CoreError::VarMismatch(format!(
            "probe point has {} coordinates for {} variables",
            point.len(),
            problem.p().arity()
        )));
    }
    let dp_at = problem.dp_dt().eval(point);
    if dp_at.is_zero() {
        return Err(CoreError::Degenerate(
            "T-derivative vanishes at the probe point".into(),
        ));
    }
    let n = problem.n();
    let xvars: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    let xrefs: Vec<&str> = xvars.iter().map(|s| s.as_str()).collect();

    let mut u = SparsePolynomial::zero(&xrefs);
    for slice in &solution.slices {
        for (gamma, c) in slice {
            u.insert_add(gamma.clone(), c.eval(point, &dp_at));
        }
    }
    let t_plus_u = u.add(&SparsePolynomial::constant(&xrefs, point[n].clone()));

    // Powers of (t + u) dominate the cost; cache them up to the largest
    // T-exponent in P.
    let max_t = problem
        .p()
        .terms()
        .map(|(e, _)| e.0[n])
        .max()
        .unwrap_or(0) as usize;
    let mut tu_pows = Vec::with_capacity(max_t + 1);
    tu_pows.push(SparsePolynomial::constant(&xrefs, Rational::one()));
    for k in 1..=max_t {
        tu_pows.push(tu_pows[k - 1].mul(&t_plus_u));
    }
    let shifted: Vec<SparsePolynomial> = (0..n)
        .map(|i| {
            SparsePolynomial::variable(&xrefs, i)
                .add(&SparsePolynomial::constant(&xrefs, point[i].clone()))
        })
        .collect();

    let mut f = SparsePolynomial::zero(&xrefs);
    for (e, c) in problem.p().terms() {
        let mut term = SparsePolynomial::constant(&xrefs, c.clone());
        for (i, s) in shifted.iter().enumerate() {
            if e.0[i] > 0 {
                term = term.mul(&s.pow(u32::from(e.0[i])));
            }
        }
        term = term.mul(&tu_pows[e.0[n] as usize]);
        f = f.add(&term);
    }
    f = f.sub(&SparsePolynomial::constant(
        &xrefs,
        problem.p().eval(point),
    ));

    Ok((1..=solution.order)
        .map(|d| (d, f.homogeneous_component(d).is_zero()))
        .collect())
}

/// The base point plus deterministic nearby rational points with
/// nonvanishing T-derivative, for identity probes away from the base
/// specialization.
pub fn identity_probe_points(problem: &ImplicitProblem, count: usize) -> Vec<Vec<Rational>> {
    let mut pts = vec![problem.base_point().to_vec()];
    let dp = problem.dp_dt();
    let mut k: i64 = 1;
    while pts.len() < count && k <= 24 {
        let cand: Vec<Rational> = problem
            .base_point()
            .iter()
            .enumerate()
            .map(|(i, x)| x + Rational::new(Int::from(k), Int::from(3 + i as i64)))
            .collect();
        if !dp.eval(&cand).is_zero() {
            pts.push(cand);
        }
        k += 1;
    }
    pts
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SliceDenominatorCheck {
    pub order: u32,
    /// Largest denominator power actually stored in the slice.
    pub stored_power: u32,
    /// Power the slice must clear: 2 * order - 1.
    pub power_bound: u32,
    pub ok: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PhiSliceCheck {
    pub degree: u32,
    /// Power the residual slice must clear: 2 * degree - 2.
    pub power_bound: u32,
    pub ok: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct IdentityProbe {
    #[serde(serialize_with = "crate::ser::rats")]
    pub point: Vec<Rational>,
    pub vanishing: Vec<(u32, bool)>,
    pub ok: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DenominatorReport {
    pub order: u32,
    pub slice_checks: Vec<SliceDenominatorCheck>,
    pub identity_probes: Vec<IdentityProbe>,
    pub phi_checks: Vec<PhiSliceCheck>,
    pub ok: bool,
}

/// Denominator audit of a solved series. Every degree-m slice of U must lie
/// in (1/(dP/dT)^(2m-1)) B, checked by stored power or exact division; the
/// defining identity is probed exactly at the base point and nearby
/// specializations; and every residual slice of P(Y + X, T + U) - P(Y, T) in
/// degrees order+1 ..= cap must clear the power 2*degree - 2. Failures are
/// reported as data, never panics.
pub fn verify_denominator_bounds(
    problem: &ImplicitProblem,
    solution: &SeriesSolution,
    phi_degree_cap: Option<u32>,
    probe_points: usize,
) -> Result<DenominatorReport> {
    let base = problem.dp_dt();

    let mut slice_checks = Vec::new();
    for (i, slice) in solution.slices.iter().enumerate() {
        let m = i as u32 + 1;
        let power_bound = 2 * m - 1;
        let stored_power = slice.values().map(|c| c.pow).max().unwrap_or(0);
        let ok = slice.values().all(|c| c.clears_at(power_bound, &base));
        slice_checks.push(SliceDenominatorCheck {
            order: m,
            stored_power,
            power_bound,
            ok,
        });
    }

    let mut identity_probes = Vec::new();
    for point in identity_probe_points(problem, probe_points) {
        let vanishing = defining_identity_check(problem, solution, &point)?;
        let ok = vanishing.iter().all(|(_, z)| *z);
        identity_probes.push(IdentityProbe {
            point,
            vanishing,
            ok,
        });
    }

    let mut solver = symbolic_solver_seeded(problem, solution.slices.clone());
    let full = solver.max_phi_degree();
    let hi = phi_degree_cap.map(|c| c.min(full)).unwrap_or(full);
    let mut phi_checks = Vec::new();
    for degree in (solution.order + 1)..=hi {
        let slice = solver.phi_slice(degree);
        let power_bound = 2 * degree - 2;
        let ok = slice.values().all(|c| c.clears_at(power_bound, &base));
        phi_checks.push(PhiSliceCheck {
            degree,
            power_bound,
            ok,
        });
    }

    let ok = slice_checks.iter().all(|c| c.ok)
        && identity_probes.iter().all(|c| c.ok)
        && phi_checks.iter().all(|c| c.ok);
    Ok(DenominatorReport {
        order: solution.order,
        slice_checks,
        identity_probes,
        phi_checks,
        ok,
    })
}

/// The cleared coefficient polynomial P_I for one index: a_I multiplied by
/// (dP/dT)(x)^(2|I|-1) equals P_I evaluated at the base point.
#[derive(Clone, Debug)]
pub struct CofactorPolynomial {
    pub index: MultiIndex,
    pub order: u32,
    pub poly: SparsePolynomial,
}

/// Memoized cofactor recursion. The base case is P_{e_k} = -dP/dY_k; the
/// step from I to I' = I + e_k (k the smallest position attaining the
/// maximal entry of I') divides by the incremented entry and uses only first
/// derivatives of P and the two second derivatives involving T:
///
///   P_I' = (1/i'_k) [ dP_I/dY_k (P_T)^2 - dP_I/dT P_T dP/dY_k
///                     - (2m-1) P_I (P_T d2P/dY_k dT - dP/dY_k d2P/dT2) ]
///
/// with m = |I| and P_T = dP/dT.
pub struct CofactorFamily<'p> {
    problem: &'p ImplicitProblem,
    dp: SparsePolynomial,
    dp_sq: SparsePolynomial,
    dy: Vec<SparsePolynomial>,
    dyt: Vec<SparsePolynomial>,
    dtt: SparsePolynomial,
    memo: HashMap<MultiIndex, SparsePolynomial>,
}

impl<'p> CofactorFamily<'p> {
    pub fn new(problem: &'p ImplicitProblem) -> Self {
        let p = problem.p();
        let tk = problem.t_index();
        let dp = p.partial_derivative(tk);
        let dy: Vec<SparsePolynomial> =
            (0..problem.n()).map(|k| p.partial_derivative(k)).collect();
        let dyt = dy.iter().map(|q| q.partial_derivative(tk)).collect();
        let dtt = dp.partial_derivative(tk);
        CofactorFamily {
            problem,
            dp_sq: dp.mul(&dp),
            dp,
            dy,
            dyt,
            dtt,
            memo: HashMap::new(),
        }
    }

    pub fn cofactor(&mut self, index: &MultiIndex) -> Result<CofactorPolynomial> {
        if index.arity() != self.problem.n() {
            return Err(CoreError::VarMismatch(format!(
                "index over {} variables for {} Y variables",
                index.arity(),
                self.problem.n()
            )));
        }
        let order = index.total();
        if order == 0 {
            return Err(CoreError::Malformed(
                "cofactor index must have positive total degree".into(),
            ));
        }
        let poly = self.cleared(index);
        Ok(CofactorPolynomial {
            index: index.clone(),
            order,
            poly,
        })
    }

    fn cleared(&mut self, index: &MultiIndex) -> SparsePolynomial {
        if let Some(p) = self.memo.get(index) {
            return p.clone();
        }
        let total = index.total();
        let result = if total == 1 {
            let k = index.0.iter().position(|&e| e == 1).unwrap();
            self.dy[k].neg()
        } else {
            let max = index.0.iter().max().copied().unwrap();
            let k = index.0.iter().position(|&e| e == max).unwrap();
            let prev = index
                .checked_sub(&MultiIndex::unit(index.arity(), k))
                .unwrap();
            let m = i64::from(total) - 1;
            let pi = self.cleared(&prev);
            let tk = self.problem.t_index();
            let term1 = pi.partial_derivative(k).mul(&self.dp_sq);
            let term2 = pi.partial_derivative(tk).mul(&self.dp).mul(&self.dy[k]);
            let mixed = self.dp.mul(&self.dyt[k]).sub(&self.dy[k].mul(&self.dtt));
            let term3 = pi
                .mul(&mixed)
                .scale(&int_rational(Int::from(2 * m - 1)));
            let entry = int_rational(Int::from(index.0[k]));
            term1
                .sub(&term2)
                .sub(&term3)
                .scale(&(Rational::one() / entry))
        };
        self.memo.insert(index.clone(), result.clone());
        result
    }

    /// Taylor coefficient through the cleared polynomial:
    /// P_I(x) / (dP/dT)(x)^(2|I|-1). The constant index returns the base
    /// T-coordinate.
    pub fn taylor_coefficient(&mut self, index: &MultiIndex) -> Result<Rational> {
        if index.total() == 0 {
            if index.arity() != self.problem.n() {
                return Err(CoreError::VarMismatch("index arity mismatch".into()));
            }
            return Ok(self.problem.t_value().clone());
        }
        let c = self.cofactor(index)?;
        let num = c.poly.eval(self.problem.base_point());
        let denom = rational_pow(&self.problem.dp_dt_at_base(), 2 * c.order - 1);
        Ok(num / denom)
    }

    /// Full Taylor table through the given total order, as an independent
    /// route for comparison with the series solvers.
    pub fn taylor_table(&mut self, order: u32) -> Result<BTreeMap<MultiIndex, Rational>> {
        check_order(order)?;
        let mut out = BTreeMap::new();
        for i in MultiIndex::all_upto(self.problem.n(), order) {
            let v = self.taylor_coefficient(&i)?;
            out.insert(i, v);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CofactorBoundCheck {
    pub index: MultiIndex,
    /// Total degree of P_I; the zero polynomial reports no degree and
    /// trivially satisfies the bound.
    pub degree: Option<u32>,
    pub degree_bound: u32,
    pub degree_ok: bool,
    /// Sum of |coefficient| at the archimedean place.
    #[serde(serialize_with = "crate::ser::rat")]
    pub length: Rational,
    #[serde(serialize_with = "crate::ser::rat")]
    pub length_bound: Rational,
    pub length_ok: bool,
    pub ok: bool,
}

/// Exact degree and length control for every cofactor of total order
/// 1..=order: deg P_I <= (2m-1)(d-1) and, at the archimedean place,
/// L(P_I) <= (8n)^(m-1) d^(3m-2) L(P)^(2m-1) with m = |I| and d the declared
/// degree bound. Both sides are compared in exact rational arithmetic.
pub fn verify_cofactor_bounds(
    problem: &ImplicitProblem,
    order: u32,
) -> Result<Vec<CofactorBoundCheck>> {
    check_order(order)?;
    let mut family = CofactorFamily::new(problem);
    let d = problem.degree_bound();
    let n8 = Int::from(8 * problem.n() as u64);
    let lp = problem.p().length_v(&Place::Infinite);
    let mut out = Vec::new();
    for index in MultiIndex::all_upto(problem.n(), order) {
        let m = index.total();
        if m == 0 {
            continue;
        }
        let c = family.cofactor(&index)?;
        let degree_bound = (2 * m - 1) * (d - 1);
        let degree_ok = c.poly.total_degree().leq(degree_bound);
        let degree = c.poly.total_degree().finite();
        let length = c.poly.length_v(&Place::Infinite);
        let length_bound = int_rational(n8.pow(m - 1))
            * int_rational(Int::from(d).pow(3 * m - 2))
            * rational_pow(&lp, 2 * m - 1);
        let length_ok = length <= length_bound;
        out.push(CofactorBoundCheck {
            index,
            degree,
            degree_bound,
            degree_ok,
            length,
            length_bound,
            length_ok,
            ok: degree_ok && length_ok,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PlaceBoundCheck {
    pub place: Place,
    /// max(1, |a_I|_v) over all indices of total degree <= order.
    #[serde(serialize_with = "crate::ser::rat")]
    pub lhs: Rational,
    #[serde(serialize_with = "crate::ser::rat")]
    pub rhs: Rational,
    /// log(rhs/lhs); nonnegative when the check holds.
    pub margin: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CoefficientBoundsReport {
    pub order: u32,
    /// Whether P was divided by its graded-lex leading coefficient so that
    /// one coefficient equals 1, the shape the growth brackets assume. The
    /// series itself is invariant under scaling of P.
    pub rescaled: bool,
    pub place_checks: Vec<PlaceBoundCheck>,
    pub height_lhs: f64,
    pub height_rhs: f64,
    pub height_margin: f64,
    pub height_verdict: Verdict,
    pub verdict: Verdict,
}

/// Per-place and height growth certificates for the Taylor coefficients
/// through total order m. At each requested place,
///
///   max(1, |a_I|_v : |I| <= m) <= bracket_v^m * max(1, |x_i|_v)
///
/// where bracket_v = H_v(P)^2 max(1,|x_i|_v)^(2(d-1)) max(1, |1/P_T(x)|_v)^2
/// times, at the archimedean place only, 8n d^3 (d+1)^(2(n+1)). The place
/// comparisons are exact rational arithmetic. The height certificate
///
///   h(1, a_I : |I| <= m) <= m [4 h~(P) + 4(d-1) h(1:x) + (4n+9)(log d + 1)]
///                           + h(1:x)
///
/// is numeric with a 1e-9 budget. P is first divided by its graded-lex
/// leading coefficient, matching the normalization the brackets assume.
pub fn verify_coefficient_bounds(
    problem: &ImplicitProblem,
    order: u32,
    places_list: &[Place],
    prec: Precision,
) -> Result<CoefficientBoundsReport> {
    check_order(order)?;
    let (_, lead) = problem.p().leading().expect("constraint is nonzero");
    let rescaled = !lead.is_one();
    let p_hat = if rescaled {
        problem.p().scale(&(Rational::one() / lead))
    } else {
        problem.p().clone()
    };
    let x = problem.base_point();
    let dp_hat_at = p_hat.partial_derivative(problem.t_index()).eval(x);
    let dp_inv = Rational::one() / &dp_hat_at;

    let taylor = solve_series_taylor(problem, order)?;
    let values: Vec<Rational> = taylor.values().cloned().collect();

    let d = problem.degree_bound();
    let n = problem.n();
    let arch_factor = int_rational(
        Int::from(8 * n as u64) * Int::from(d).pow(3) * Int::from(d + 1).pow(2 * (n as u32 + 1)),
    );

    let mut place_checks = Vec::new();
    for v in places_list {
        let hv = p_hat.gauss_weil_v(v);
        let sx = places::log_sup_norm_v(x, v);
        let dinv = {
            let a = places::abs_v(&dp_inv, v);
            if a > Rational::one() {
                a
            } else {
                Rational::one()
            }
        };
        let mut bracket = &hv * &hv * rational_pow(&sx, 2 * (d - 1)) * (&dinv * &dinv);
        if !v.is_finite() {
            bracket *= &arch_factor;
        }
        let rhs = rational_pow(&bracket, order) * &sx;
        let mut lhs = Rational::one();
        for a in &values {
            let av = places::abs_v(a, v);
            if av > lhs {
                lhs = av;
            }
        }
        let margin = LogValue::ln_rational(&(&rhs / &lhs), prec).to_f64();
        place_checks.push(PlaceBoundCheck {
            place: *v,
            ok: lhs <= rhs,
            lhs,
            rhs,
            margin,
        });
    }

    let h_lhs = places::height_point_with_one(&values, prec);
    let h_p = measures::height_gauss_weil(&p_hat, prec)?;
    let h_x = places::height_point_with_one(x, prec);
    let logd_plus_one = LogValue::ln_u64(u64::from(d), prec) + LogValue::from_f64(1.0);
    let per_order = h_p.scale_i64(4)
        + h_x.scale_i64(4 * (i64::from(d) - 1))
        + logd_plus_one.scale_i64(4 * n as i64 + 9);
    let h_rhs = per_order.scale_i64(i64::from(order)) + h_x.clone();
    let height_margin = (&h_rhs - &h_lhs).to_f64();
    let height_verdict = Verdict::classify(height_margin, 1e-9);

    let verdict = place_checks.iter().fold(height_verdict, |acc, c| {
        acc.and(if c.ok { Verdict::Holds } else { Verdict::Failed })
    });
    Ok(CoefficientBoundsReport {
        order,
        rescaled,
        place_checks,
        height_lhs: h_lhs.to_f64(),
        height_rhs: h_rhs.to_f64(),
        height_margin,
        height_verdict,
        verdict,
    })
}

/// Numeric smoke check through a fourth route: Newton iteration in f64 on
/// the univariate restriction of P at a displaced Y-point, compared against
/// the exact truncated Taylor value. For a displacement of size eps the gap
/// behaves like eps^(order+1) (plus f64 roundoff), which callers assert.
pub fn newton_probe(
    problem: &ImplicitProblem,
    taylor: &BTreeMap<MultiIndex, Rational>,
    displacement: &[Rational],
) -> Result<f64> {
    let n = problem.n();
    if displacement.len() != n {
        return Err(CoreError::VarMismatch(format!(
            "displacement has {} coordinates for {} Y variables",
            displacement.len(),
            n
        )));
    }
    let displaced: Vec<Rational> = (0..n)
        .map(|i| &problem.base_point()[i] + &displacement[i])
        .collect();
    let deg_t = problem
        .p()
        .degree_in(problem.t_index())
        .finite()
        .expect("dP/dT is nonzero, so P depends on T");
    let mut coeffs = vec![Rational::zero(); deg_t as usize + 1];
    for (e, c) in problem.p().terms() {
        let mut v = c.clone();
        for i in 0..n {
            v *= rational_pow(&displaced[i], u32::from(e.0[i]));
        }
        coeffs[e.0[n] as usize] += v;
    }
    let f: Vec<f64> = coeffs.iter().map(|q| q.to_f64().unwrap()).collect();
    let fp: Vec<f64> = (1..f.len()).map(|k| f[k] * k as f64).collect();
    let horner = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, &a| acc * x + a);

    let mut tau = problem.t_value().to_f64().unwrap();
    for _ in 0..64 {
        let fv = horner(&f, tau);
        let gv = horner(&fp, tau);
        if gv == 0.0 {
            break;
        }
        let next = tau - fv / gv;
        if (next - tau).abs() <= 1e-15 * next.abs().max(1.0) {
            tau = next;
            break;
        }
        tau = next;
    }

    let mut series = Rational::zero();
    for (i, a) in taylor {
        let mut term = a.clone();
        for k in 0..n {
            term *= rational_pow(&displacement[k], u32::from(i.0[k]));
        }
        series += term;
    }
    Ok((tau - series.to_f64().unwrap()).abs())
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

    /// T = Y^2 branch through (1, 1): P = T - Y^2.
    fn parabola() -> ImplicitProblem {
        let p = parse_poly(&["Y", "T"], "T - Y^2");
        ImplicitProblem::new(p, qs(&["1", "1"]), 2).unwrap()
    }

    /// T = sqrt(Y) branch through (1, 1): P = T^2 - Y.
    fn sqrt_problem() -> ImplicitProblem {
        let p = parse_poly(&["Y", "T"], "T^2 - Y");
        ImplicitProblem::new(p, qs(&["1", "1"]), 2).unwrap()
    }

    fn idx(e: &[u16]) -> MultiIndex {
        MultiIndex(e.to_vec())
    }

    #[test]
    fn constructor_rejects_degenerate_data() {
        let p = parse_poly(&["Y", "T"], "T^2 - Y");
        assert!(matches!(
            ImplicitProblem::new(p.clone(), qs(&["1", "2"]), 2),
            Err(CoreError::Degenerate(_))
        ));
        assert!(matches!(
            ImplicitProblem::new(p.clone(), qs(&["1"]), 2),
            Err(CoreError::VarMismatch(_))
        ));
        assert!(matches!(
            ImplicitProblem::new(p.clone(), qs(&["1", "1"]), 1),
            Err(CoreError::TotalDegree(_))
        ));
        // dP/dT = 2T vanishes at the origin even though P does.
        let origin = parse_poly(&["Y", "T"], "T^2 - Y^2");
        assert!(matches!(
            ImplicitProblem::new(origin, qs(&["0", "0"]), 2),
            Err(CoreError::Degenerate(_))
        ));
        let univariate = parse_poly(&["T"], "T");
        assert!(matches!(
            ImplicitProblem::new(univariate, qs(&["0"]), 1),
            Err(CoreError::Malformed(_))
        ));
    }

    #[test]
    fn parabola_series_terminates() {
        // P(Y+X, T+U) - P = U - 2YX - X^2, so U = 2YX + X^2 exactly and all
        // higher slices vanish.
        let problem = parabola();
        let sol = solve_series(&problem, 5).unwrap();
        let v1 = &sol.slices[0];
        assert_eq!(v1.len(), 1);
        let c1 = &v1[&idx(&[1])];
        assert_eq!(c1.num, parse_poly(&["Y", "T"], "2*Y"));
        let v2 = &sol.slices[1];
        assert_eq!(v2[&idx(&[2])].num, parse_poly(&["Y", "T"], "1"));
        for m in 2..5 {
            assert!(sol.slices[m].is_empty(), "slice {} must vanish", m + 1);
        }
        assert_eq!(sol.taylor[&idx(&[1])], q("2"));
        assert_eq!(sol.taylor[&idx(&[2])], q("1"));
    }

    #[test]
    fn square_root_taylor_matches_binomial_series() {
        // t(1 + x) = sqrt(1 + x): coefficients 1, 1/2, -1/8, 1/16, -5/128,
        // 7/256.
        let problem = sqrt_problem();
        let sol = solve_series(&problem, 5).unwrap();
        let expect = [
            ("0", "1"),
            ("1", "1/2"),
            ("2", "-1/8"),
            ("3", "1/16"),
            ("4", "-5/128"),
            ("5", "7/256"),
        ];
        for (e, val) in expect {
            assert_eq!(sol.taylor[&idx(&[e.parse().unwrap()])], q(val), "a_{e}");
        }
        // First slice is 1/(2T) symbolically: numerator 1 with one base
        // power.
        let c1 = &sol.slices[0][&idx(&[1])];
        assert_eq!(c1.num, parse_poly(&["Y", "T"], "1"));
        assert_eq!(c1.pow, 1);
    }

    #[test]
    fn three_routes_agree_on_fixed_instances() {
        for problem in [parabola(), sqrt_problem()] {
            let sol = solve_series(&problem, 5).unwrap();
            let fast = solve_series_taylor(&problem, 5).unwrap();
            let mut family = CofactorFamily::new(&problem);
            let cof = family.taylor_table(5).unwrap();
            assert_eq!(sol.taylor, fast);
            assert_eq!(sol.taylor, cof);
        }
    }

    #[test]
    fn sqrt_cofactors_match_hand_computation() {
        let problem = sqrt_problem();
        let mut family = CofactorFamily::new(&problem);
        let p1 = family.cofactor(&idx(&[1])).unwrap();
        assert_eq!(p1.poly, parse_poly(&["Y", "T"], "1"));
        let p2 = family.cofactor(&idx(&[2])).unwrap();
        assert_eq!(p2.poly, parse_poly(&["Y", "T"], "-1"));
        let p3 = family.cofactor(&idx(&[3])).unwrap();
        assert_eq!(p3.poly, parse_poly(&["Y", "T"], "2"));
    }

    #[test]
    fn two_variable_routes_agree() {
        // A genuinely mixed surface: T depends on both Y variables, dP/dT is
        // nonconstant, and nothing terminates early.
        let p = parse_poly(
            &["Y1", "Y2", "T"],
            "T^2 + Y1*T - Y2^2 - Y1*Y2 - 2*Y2 - 1",
        );
        let problem = ImplicitProblem::new(p, qs(&["0", "0", "1"]), 2).unwrap();
        let sol = solve_series(&problem, 4).unwrap();
        let fast = solve_series_taylor(&problem, 4).unwrap();
        let mut family = CofactorFamily::new(&problem);
        let cof = family.taylor_table(4).unwrap();
        assert_eq!(sol.taylor, fast);
        assert_eq!(sol.taylor, cof);
        // The linear coefficients follow from implicit differentiation:
        // dT/dY1 = -(T)/(2T + Y1) = -1/2, dT/dY2 = (2Y2 + Y1 + 2)/(2T + Y1) = 1.
        assert_eq!(sol.taylor[&idx(&[1, 0])], q("-1/2"));
        assert_eq!(sol.taylor[&idx(&[0, 1])], q("1"));
    }

    #[test]
    fn defining_identity_holds_at_probe_points() {
        let problem = sqrt_problem();
        let sol = solve_series(&problem, 5).unwrap();
        let points = identity_probe_points(&problem, 3);
        assert_eq!(points.len(), 3);
        for point in &points {
            let checks = defining_identity_check(&problem, &sol, point).unwrap();
            assert_eq!(checks.len(), 5);
            assert!(checks.iter().all(|(_, z)| *z), "residual at {point:?}");
        }
    }

    #[test]
    fn tampered_solution_fails_the_identity_probe() {
        let problem = sqrt_problem();
        let mut sol = solve_series(&problem, 3).unwrap();
        let slot = sol.slices[2].get_mut(&idx(&[3])).unwrap();
        slot.num = slot.num.add(&parse_poly(&["Y", "T"], "1"));
        let checks =
            defining_identity_check(&problem, &sol, problem.base_point()).unwrap();
        assert!(checks.iter().any(|(_, z)| !*z));
    }

    #[test]
    fn denominator_bounds_certify_fixed_instances() {
        let problem = sqrt_problem();
        let sol = solve_series(&problem, 4).unwrap();
        let report = verify_denominator_bounds(&problem, &sol, None, 2).unwrap();
        assert!(report.ok);
        assert_eq!(report.slice_checks.len(), 4);
        for check in &report.slice_checks {
            assert!(check.stored_power <= check.power_bound);
        }
        // Residual slices run out at degree 2 * order with the quadratic
        // T-term.
        assert_eq!(
            report.phi_checks.last().map(|c| c.degree),
            Some(2 * sol.order)
        );
        assert!(report.phi_checks.iter().all(|c| c.ok));

        // The terminating parabola clears everything with power zero.
        let problem = parabola();
        let sol = solve_series(&problem, 3).unwrap();
        let report = verify_denominator_bounds(&problem, &sol, Some(5), 2).unwrap();
        assert!(report.ok);
        assert_eq!(report.slice_checks[0].stored_power, 1);
    }

    #[test]
    fn cofactor_bounds_hold_exactly() {
        let mixed = parse_poly(
            &["Y1", "Y2", "T"],
            "T^2 + Y1*T - Y2^2 - Y1*Y2 - 2*Y2 - 1",
        );
        let problems = [
            sqrt_problem(),
            ImplicitProblem::new(mixed, qs(&["0", "0", "1"]), 2).unwrap(),
        ];
        for problem in &problems {
            let checks = verify_cofactor_bounds(problem, 4).unwrap();
            assert!(!checks.is_empty());
            for c in &checks {
                assert!(c.ok, "bounds at index {:?}", c.index);
            }
        }
    }

    #[test]
    fn cofactor_rejects_the_zero_index() {
        let problem = sqrt_problem();
        let mut family = CofactorFamily::new(&problem);
        assert!(family.cofactor(&idx(&[0])).is_err());
        // The Taylor route still answers with the base coordinate.
        assert_eq!(family.taylor_coefficient(&idx(&[0])).unwrap(), q("1"));
    }

    #[test]
    fn coefficient_bounds_certify_and_scale_invariantly() {
        let places_list = [
            Place::Infinite,
            Place::Finite(2),
            Place::Finite(3),
            Place::Finite(5),
        ];
        let problem = sqrt_problem();
        let report =
            verify_coefficient_bounds(&problem, 3, &places_list, Precision::default())
                .unwrap();
        assert!(!report.rescaled);
        assert_eq!(report.verdict, Verdict::Holds);
        for c in &report.place_checks {
            assert!(c.ok, "place {:?}", c.place);
            assert!(c.margin >= 0.0);
        }

        // Scaling P by 3 flips the normalization flag but not the series,
        // and the certificates still hold.
        let scaled = parse_poly(&["Y", "T"], "3*T^2 - 3*Y");
        let scaled_problem = ImplicitProblem::new(scaled, qs(&["1", "1"]), 2).unwrap();
        let scaled_report =
            verify_coefficient_bounds(&scaled_problem, 3, &places_list, Precision::default())
                .unwrap();
        assert!(scaled_report.rescaled);
        assert_eq!(scaled_report.verdict, Verdict::Holds);
        assert_eq!(
            solve_series_taylor(&problem, 3).unwrap(),
            solve_series_taylor(&scaled_problem, 3).unwrap()
        );
    }

    #[test]
    fn height_certificate_matches_hand_value_at_order_one() {
        // For T^2 - Y at (1, 1) and order 1 the point is (1 : 1 : 1/2):
        // height log 2. The right side collapses to 13 (log 2 + 1) because
        // h~(P) and h(1:x) both vanish.
        let problem = sqrt_problem();
        let report = verify_coefficient_bounds(
            &problem,
            1,
            &[Place::Infinite],
            Precision::default(),
        )
        .unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((report.height_lhs - ln2).abs() < 1e-9);
        assert!((report.height_rhs - 13.0 * (ln2 + 1.0)).abs() < 1e-9);
        assert_eq!(report.height_verdict, Verdict::Holds);
    }

    #[test]
    fn newton_probe_shrinks_at_the_expected_order() {
        let problem = sqrt_problem();
        let t3 = solve_series_taylor(&problem, 3).unwrap();
        let gap3 = newton_probe(&problem, &t3, &qs(&["1/100"])).unwrap();
        // |a_4| eps^4 = (5/128) 1e-8, comfortably below 1e-8.
        assert!(gap3 < 1e-8, "gap {gap3}");
        let t1 = solve_series_taylor(&problem, 1).unwrap();
        let gap1 = newton_probe(&problem, &t1, &qs(&["1/100"])).unwrap();
        assert!(gap1 > gap3);
        assert!((q("-1/8").to_f64().unwrap() * 1e-4).abs() * 0.5 < gap1);
    }
}
