//! Coefficient measures of a polynomial at the places of the rationals, the
//! heights obtained as their place sums, and checkers for the inequalities
//! comparing those heights.
//!
//! Three quantities live at the infinite place: the largest absolute
//! coefficient (exact), the exponential of the mean of log|P| over the unit
//! polytorus (certified roots in one variable, midpoint quadrature or
//! Monte-Carlo beyond), and the sphere mean of log|P| shifted by an exact
//! harmonic constant so that monomials come out at log|coefficient|
//! (Monte-Carlo plus the exact shift). At every finite place all three
//! collapse to the largest v-adic coefficient norm, so after clearing the
//! content of the coefficient vector a height is just the corresponding
//! infinite-place term of the primitive integer polynomial.

use std::fmt;

use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::exec;
use crate::logval::{ln2, LogValue, Precision};
use crate::places::Place;
use crate::poly::SparsePolynomial;
use crate::verdict::Verdict;
use crate::{roots, CoreError, Int, Rational, Result};

const TAU: f64 = std::f64::consts::TAU;
/// Squared norms below this are treated as a sample landing on the zero set.
const VANISH_FLOOR: f64 = 1e-280;

/// Threshold under which a torus evaluation counts as "on the zero set".
///
/// A node exactly on the zero set evaluates to cancellation noise, about
/// 1e-16 times the sum of |coefficients| (every |z_i| = 1), far above any
/// absolute underflow floor; a node merely near the zero set evaluates to
/// roughly its distance times that sum, and distances below 1e-13 of a cell
/// are vanishingly rare. Squared norms are compared against this gap.
fn torus_vanish_threshold(p: &SparsePolynomial) -> f64 {
    let l1 = rational_f64(&p.length_v(&Place::Infinite));
    (1e-13 * l1).powi(2).max(VANISH_FLOOR)
}

/// Knobs shared by the numeric measure evaluators.
#[derive(Clone, Debug)]
pub struct MeasureOptions {
    pub precision: Precision,
    /// Midpoint nodes per dimension for torus quadrature (two variables).
    pub quad_points: u32,
    /// Sample count for torus Monte-Carlo (three variables and up).
    pub torus_samples: u64,
    /// Sample count for the sphere mean behind the unitary measure.
    pub sphere_samples: u64,
    pub seed: u64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            precision: Precision::default(),
            quad_points: 4096,
            torus_samples: 1_000_000,
            sphere_samples: 100_000,
            seed: 1,
        }
    }
}

/// Provenance of a numeric value, serialized as a compact tag.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Exact,
    ExactUnivariate,
    Quadrature { points_per_dim: u32 },
    MonteCarlo { samples: u64, std_err: f64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::ExactUnivariate => write!(f, "exact_univariate"),
            Method::Quadrature { points_per_dim } => write!(f, "quadrature({points_per_dim})"),
            Method::MonteCarlo { samples, std_err } => {
                write!(f, "monte_carlo({samples}, {std_err:.3e})")
            }
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A log-scale quantity with a symmetric error bound and its provenance.
/// `retried_nodes` counts integration nodes that had to be nudged off the
/// zero set of the integrand.
#[derive(Clone, Debug)]
pub struct MeasuredLog {
    pub value: LogValue,
    pub err: f64,
    pub method: Method,
    pub retried_nodes: u32,
}

impl MeasuredLog {
    pub fn exact(value: LogValue) -> Self {
        MeasuredLog { value, err: 0.0, method: Method::Exact, retried_nodes: 0 }
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

impl Serialize for MeasuredLog {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let fields = if self.retried_nodes > 0 { 4 } else { 3 };
        let mut st = s.serialize_struct("MeasuredLog", fields)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("err", &self.err)?;
        st.serialize_field("method", &self.method)?;
        if self.retried_nodes > 0 {
            st.serialize_field("retried_nodes", &self.retried_nodes)?;
        }
        st.end()
    }
}

fn require_nonzero(p: &SparsePolynomial) -> Result<()> {
    if p.is_zero() {
        Err(CoreError::Degenerate("the zero polynomial has no measure".into()))
    } else {
        Ok(())
    }
}

fn rational_f64(q: &Rational) -> f64 {
    q.to_f64().expect("coefficient out of f64 range")
}

/// Largest v-adic absolute value among the coefficients; exact rational.
pub fn gauss_weil_measure_v(p: &SparsePolynomial, v: &Place) -> Result<Rational> {
    require_nonzero(p)?;
    Ok(p.gauss_weil_v(v))
}

/// log of the largest |coefficient| at the infinite place, exact.
pub fn log_gauss_weil_inf(p: &SparsePolynomial, prec: Precision) -> Result<LogValue> {
    require_nonzero(p)?;
    Ok(LogValue::ln_rational(&p.gauss_weil_v(&Place::Infinite), prec))
}

/// log of the euclidean norm of the coefficient vector; the squared norm is
/// an exact rational, so only the final half-log rounds.
pub fn log_l2_norm(p: &SparsePolynomial, prec: Precision) -> Result<LogValue> {
    require_nonzero(p)?;
    let half = Rational::new(Int::from(1), Int::from(2));
    Ok(LogValue::ln_rational(&p.l2_norm_squared(), prec).scale_rational(&half, prec))
}

/// Evaluation strategies for the torus-mean (Mahler) measure.
#[derive(Clone, Copy, Debug)]
pub enum MahlerMethod {
    /// Certified complex roots; one variable only.
    ExactUnivariate,
    /// Composite midpoint rule with the given nodes per dimension.
    Quadrature { points_per_dim: u32 },
    /// Uniform sampling of the polytorus.
    MonteCarlo { samples: u64, seed: u64 },
}

/// log of the torus-mean measure by the requested strategy.
pub fn mahler_measure(
    p: &SparsePolynomial,
    method: MahlerMethod,
    prec: Precision,
) -> Result<MeasuredLog> {
    require_nonzero(p)?;
    match method {
        MahlerMethod::ExactUnivariate => mahler_exact_univariate(p, prec),
        MahlerMethod::Quadrature { points_per_dim } => mahler_quadrature(p, points_per_dim),
        MahlerMethod::MonteCarlo { samples, seed } => mahler_monte_carlo(p, samples, seed),
    }
}

/// Default strategy by arity: roots in one variable, midpoint quadrature in
/// two, Monte-Carlo beyond.
pub fn mahler_auto(p: &SparsePolynomial, opts: &MeasureOptions) -> Result<MeasuredLog> {
    require_nonzero(p)?;
    let method = match p.arity() {
        1 => MahlerMethod::ExactUnivariate,
        2 => MahlerMethod::Quadrature { points_per_dim: opts.quad_points },
        _ => MahlerMethod::MonteCarlo { samples: opts.torus_samples, seed: opts.seed },
    };
    mahler_measure(p, method, opts.precision)
}

fn mahler_exact_univariate(p: &SparsePolynomial, prec: Precision) -> Result<MeasuredLog> {
    if p.arity() != 1 {
        return Err(CoreError::Malformed(format!(
            "root-based measure needs one variable, got {}",
            p.arity()
        )));
    }
    let dense = p.to_univariate();
    let lead = dense.last().expect("nonzero polynomial").clone();
    let sum = roots::log_max_roots(&dense, 1e-11);
    let value = LogValue::ln_rational(&lead.abs(), prec) + LogValue::from_f64(sum.value);
    Ok(MeasuredLog { value, err: sum.err, method: Method::ExactUnivariate, retried_nodes: 0 })
}

/// Midpoint-rule estimate with a doubled-grid error estimate: the rule is
/// run at n and n/2 nodes per dimension and the difference is reported.
fn mahler_quadrature(p: &SparsePolynomial, points_per_dim: u32) -> Result<MeasuredLog> {
    let n = (points_per_dim.max(8) / 2) * 2;
    let cells = (n as f64).powi(p.arity() as i32);
    if cells > 7e7 {
        return Err(CoreError::Budget(format!(
            "quadrature grid {}^{} exceeds the evaluation budget",
            n,
            p.arity()
        )));
    }
    let (coarse, retries_c) = torus_midpoint_mean(p, n / 2);
    let (fine, retries_f) = torus_midpoint_mean(p, n);
    let err = (fine - coarse).abs().max(1e-12);
    Ok(MeasuredLog {
        value: LogValue::from_f64(fine),
        err,
        method: Method::Quadrature { points_per_dim: n },
        retried_nodes: retries_c + retries_f,
    })
}

/// Mean of log|P| over the midpoint grid with `n` nodes per dimension.
///
/// The nodes exp(2 pi i (k+1/2)/n) are roots of X^n + 1, so an integer
/// polynomial of desk-scale degree cannot vanish at a grid point unless it
/// has a factor supported on a rational subtorus; when a squared norm
/// underflows anyway, the node is nudged along the innermost angle by 1/e of
/// a half cell, which reproduces the cell average of a simple log zero, and
/// the retry is counted.
fn torus_midpoint_mean(p: &SparsePolynomial, n: u32) -> (f64, u32) {
    let arity = p.arity();
    let vanish = torus_vanish_threshold(p);
    let nodes: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, TAU * (k as f64 + 0.5) / n as f64))
        .collect();

    // Group terms by the exponent of the last variable; each row of the grid
    // fixes the other angles, reducing the inner loop to a Horner pass.
    let last = arity - 1;
    let inner_deg = p.terms().map(|(e, _)| e.0[last] as usize).max().unwrap_or(0);
    let mut groups: Vec<Vec<(Vec<u16>, f64)>> = vec![Vec::new(); inner_deg + 1];
    let mut outer_deg = vec![0usize; last];
    for (e, c) in p.terms() {
        for d in 0..last {
            outer_deg[d] = outer_deg[d].max(e.0[d] as usize);
        }
        groups[e.0[last] as usize].push((e.0[..last].to_vec(), rational_f64(c)));
    }

    let rows = (n as u64).pow(last as u32);
    let per_row: Vec<(f64, u32)> = exec::map_blocks(rows, |row| {
        let mut pow_tabs: Vec<Vec<Complex64>> = Vec::with_capacity(last);
        let mut r = row;
        for d in 0..last {
            let z = nodes[(r % n as u64) as usize];
            r /= n as u64;
            let mut tab = Vec::with_capacity(outer_deg[d] + 1);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..=outer_deg[d] {
                tab.push(acc);
                acc *= z;
            }
            pow_tabs.push(tab);
        }
        let row_coeffs: Vec<Complex64> = groups
            .iter()
            .map(|g| {
                let mut s = Complex64::new(0.0, 0.0);
                for (prefix, c) in g {
                    let mut m = Complex64::new(*c, 0.0);
                    for (d, e) in prefix.iter().enumerate() {
                        m *= pow_tabs[d][*e as usize];
                    }
                    s += m;
                }
                s
            })
            .collect();

        let horner = |z: Complex64| -> Complex64 {
            let mut v = row_coeffs[inner_deg];
            for j in (0..inner_deg).rev() {
                v = v * z + row_coeffs[j];
            }
            v
        };

        // Accumulate log of the product of squared norms, flushing before
        // the running product can leave the exponent range.
        let mut acc = 0.0f64;
        let mut prod = 1.0f64;
        let mut pending = 0u32;
        let mut retries = 0u32;
        for (k, z) in nodes.iter().enumerate() {
            let mut ns = horner(*z).norm_sqr();
            if ns < vanish {
                let base = TAU * (k as f64 + 0.5) / n as f64;
                let mut delta = TAU / n as f64 * 0.5 * (-1.0f64).exp();
                for _ in 0..8 {
                    retries += 1;
                    ns = horner(Complex64::from_polar(1.0, base + delta)).norm_sqr();
                    if ns >= vanish {
                        break;
                    }
                    delta *= 2.0;
                }
                ns = ns.max(VANISH_FLOOR);
            }
            prod *= ns;
            pending += 1;
            if pending == 8 || !(1e-150..=1e150).contains(&prod) {
                acc += prod.ln();
                prod = 1.0;
                pending = 0;
            }
        }
        acc += prod.ln();
        (acc, retries)
    });

    let mut total = 0.0;
    let mut retries = 0;
    for (s, r) in per_row {
        total += s;
        retries += r;
    }
    // The accumulators summed log|P|^2 over every grid point.
    (0.5 * total / (n as f64).powi(arity as i32), retries)
}

struct McAccum {
    sum: f64,
    sum_sq: f64,
    retries: u32,
}

fn mc_reduce(blocks: Vec<McAccum>, samples: u64) -> (f64, f64, u32) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut retries = 0;
    for b in blocks {
        sum += b.sum;
        sum_sq += b.sum_sq;
        retries += b.retries;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt(), retries)
}

const MC_BLOCK: u64 = 4096;

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform-torus Monte-Carlo mean of log|P|; the error bound is three
/// standard errors of the mean. A sample landing on the zero set is redrawn
/// and counted as a retry.
fn mahler_monte_carlo(p: &SparsePolynomial, samples: u64, seed: u64) -> Result<MeasuredLog> {
    if samples < 1_000 {
        return Err(CoreError::Budget(format!("{samples} samples are too few to estimate an error")));
    }
    let arity = p.arity();
    let vanish = torus_vanish_threshold(p);
    let terms: Vec<(Vec<u16>, f64)> =
        p.terms().map(|(e, c)| (e.0.clone(), rational_f64(c))).collect();
    let mut max_deg = vec![0usize; arity];
    for (e, _) in &terms {
        for d in 0..arity {
            max_deg[d] = max_deg[d].max(e[d] as usize);
        }
    }

    let n_blocks = samples.div_ceil(MC_BLOCK);
    let per_block: Vec<McAccum> = exec::map_blocks(n_blocks, |b| {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(exec::split_seed(seed, b));
        let count = MC_BLOCK.min(samples - b * MC_BLOCK);
        let mut acc = McAccum { sum: 0.0, sum_sq: 0.0, retries: 0 };
        let mut pow_tabs: Vec<Vec<Complex64>> =
            max_deg.iter().map(|d| vec![Complex64::new(0.0, 0.0); d + 1]).collect();
        for _ in 0..count {
            let log_abs = loop {
                for tab in pow_tabs.iter_mut() {
                    let z = Complex64::from_polar(1.0, TAU * unit_f64(rng.next_u64()));
                    let mut acc_z = Complex64::new(1.0, 0.0);
                    for slot in tab.iter_mut() {
                        *slot = acc_z;
                        acc_z *= z;
                    }
                }
                let mut v = Complex64::new(0.0, 0.0);
                for (e, c) in &terms {
                    let mut m = Complex64::new(*c, 0.0);
                    for (d, tab) in pow_tabs.iter().enumerate() {
                        m *= tab[e[d] as usize];
                    }
                    v += m;
                }
                let ns = v.norm_sqr();
                if ns >= vanish {
                    break 0.5 * ns.ln();
                }
                acc.retries += 1;
            };
            acc.sum += log_abs;
            acc.sum_sq += log_abs * log_abs;
        }
        acc
    });

    let (mean, std_err, retries) = mc_reduce(per_block, samples);
    Ok(MeasuredLog {
        value: LogValue::from_f64(mean),
        err: 3.0 * std_err,
        method: Method::MonteCarlo { samples, std_err },
        retried_nodes: retries,
    })
}

/// Sum over blocks of (block degree) * (1/2 + 1/4 + ... + 1/(2m)), the exact
/// shift between the raw sphere mean of log|P| and the unitary measure,
/// where a block of m+1 variables contributes harmonic terms up to m.
pub fn sphere_shift(degrees: &[u32], block_sizes: &[usize]) -> Rational {
    let mut shift = Rational::zero();
    for (d, m) in degrees.iter().zip(block_sizes.iter().map(|s| s - 1)) {
        shift += Rational::from(Int::from(*d)) * half_harmonic(m);
    }
    shift
}

/// 1/2 + 1/4 + ... + 1/(2m) as an exact rational.
pub fn half_harmonic(m: usize) -> Rational {
    let mut h = Rational::zero();
    for j in 1..=m {
        h += Rational::new(Int::from(1), Int::from(2 * j as u64));
    }
    h
}

fn block_degrees(p: &SparsePolynomial, block_sizes: &[usize]) -> Result<Vec<u32>> {
    p.multihomogeneous_degree(block_sizes).ok_or_else(|| {
        CoreError::Degenerate("polynomial is not homogeneous within each declared block".into())
    })
}

/// log of the unitary measure: exact for monomials, otherwise the sphere
/// Monte-Carlo mean plus the exact harmonic shift.
pub fn unitary_measure(
    p: &SparsePolynomial,
    block_sizes: &[usize],
    samples: u64,
    seed: u64,
    prec: Precision,
) -> Result<MeasuredLog> {
    require_nonzero(p)?;
    block_degrees(p, block_sizes)?;
    if p.num_terms() == 1 {
        // One term: the sphere mean of each |coordinate| cancels the shift
        // exactly, leaving the coefficient alone.
        let (_, c) = p.terms().next().expect("one term");
        return Ok(MeasuredLog::exact(LogValue::ln_rational(&c.abs(), prec)));
    }
    unitary_measure_mc(p, block_sizes, samples, seed, prec)
}

/// The Monte-Carlo path of [`unitary_measure`], always sampling, used both
/// as its general case and to cross-check the exact monomial shortcut.
pub fn unitary_measure_mc(
    p: &SparsePolynomial,
    block_sizes: &[usize],
    samples: u64,
    seed: u64,
    prec: Precision,
) -> Result<MeasuredLog> {
    require_nonzero(p)?;
    let degrees = block_degrees(p, block_sizes)?;
    if samples < 1_000 {
        return Err(CoreError::Budget(format!("{samples} samples are too few to estimate an error")));
    }
    let arity = p.arity();
    let terms: Vec<(Vec<u16>, f64)> =
        p.terms().map(|(e, c)| (e.0.clone(), rational_f64(c))).collect();
    let mut max_deg = vec![0usize; arity];
    for (e, _) in &terms {
        for d in 0..arity {
            max_deg[d] = max_deg[d].max(e[d] as usize);
        }
    }
    // var index -> block index
    let mut block_of = Vec::with_capacity(arity);
    for (b, size) in block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(*size));
    }
    if block_of.len() != arity {
        return Err(CoreError::VarMismatch(format!(
            "block sizes sum to {}, arity is {}",
            block_of.len(),
            arity
        )));
    }

    let n_blocks = samples.div_ceil(MC_BLOCK);
    let deg_f: Vec<f64> = degrees.iter().map(|d| *d as f64).collect();
    let per_block: Vec<McAccum> = exec::map_blocks(n_blocks, |b| {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(exec::split_seed(seed, b));
        let count = MC_BLOCK.min(samples - b * MC_BLOCK);
        let mut acc = McAccum { sum: 0.0, sum_sq: 0.0, retries: 0 };
        let mut point = vec![Complex64::new(0.0, 0.0); arity];
        let mut pow_tabs: Vec<Vec<Complex64>> =
            max_deg.iter().map(|d| vec![Complex64::new(0.0, 0.0); d + 1]).collect();
        for _ in 0..count {
            let log_abs = loop {
                // One standard complex gaussian per variable; the block
                // norms recentre the sample onto the product of spheres.
                for slot in point.iter_mut() {
                    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
                    let u2 = unit_f64(rng.next_u64());
                    let r = (-2.0 * u1.ln()).sqrt();
                    *slot = Complex64::new(r * (TAU * u2).cos(), r * (TAU * u2).sin());
                }
                let mut norm_sqr = vec![0.0f64; block_sizes.len()];
                for (d, z) in point.iter().enumerate() {
                    norm_sqr[block_of[d]] += z.norm_sqr();
                }
                for (d, tab) in pow_tabs.iter_mut().enumerate() {
                    let mut acc_z = Complex64::new(1.0, 0.0);
                    for slot in tab.iter_mut() {
                        *slot = acc_z;
                        acc_z *= point[d];
                    }
                }
                let mut v = Complex64::new(0.0, 0.0);
                for (e, c) in &terms {
                    let mut m = Complex64::new(*c, 0.0);
                    for (d, tab) in pow_tabs.iter().enumerate() {
                        m *= tab[e[d] as usize];
                    }
                    v += m;
                }
                let ns = v.norm_sqr();
                if ns < VANISH_FLOOR || norm_sqr.iter().any(|x| *x < VANISH_FLOOR) {
                    acc.retries += 1;
                    continue;
                }
                let mut la = 0.5 * ns.ln();
                for (i, nsq) in norm_sqr.iter().enumerate() {
                    la -= deg_f[i] * 0.5 * nsq.ln();
                }
                break la;
            };
            acc.sum += log_abs;
            acc.sum_sq += log_abs * log_abs;
        }
        acc
    });

    let (mean, std_err, retries) = mc_reduce(per_block, samples);
    let shift = sphere_shift(&degrees, block_sizes);
    let value = LogValue::from_f64(mean) + LogValue::from_rational(&shift, prec);
    Ok(MeasuredLog {
        value,
        err: 3.0 * std_err,
        method: Method::MonteCarlo { samples, std_err },
        retried_nodes: retries,
    })
}

/// Height from the max-coefficient measure: exact, equal to the log of the
/// largest absolute coefficient of the content-cleared integer polynomial.
pub fn height_gauss_weil(p: &SparsePolynomial, prec: Precision) -> Result<LogValue> {
    require_nonzero(p)?;
    let (_, prim) = p.content_primitive();
    Ok(LogValue::ln_rational(&prim.gauss_weil_v(&Place::Infinite), prec))
}

/// Height from the torus-mean measure: finite places vanish after clearing
/// the content, leaving the infinite-place torus mean of the primitive part.
pub fn height_mahler(p: &SparsePolynomial, opts: &MeasureOptions) -> Result<MeasuredLog> {
    require_nonzero(p)?;
    let (_, prim) = p.content_primitive();
    mahler_auto(&prim, opts)
}

/// Height from the unitary measure of the primitive part; the polynomial
/// must be homogeneous within each declared block.
pub fn height_unitary(
    p: &SparsePolynomial,
    block_sizes: &[usize],
    opts: &MeasureOptions,
) -> Result<MeasuredLog> {
    require_nonzero(p)?;
    let (_, prim) = p.content_primitive();
    unitary_measure(&prim, block_sizes, opts.sphere_samples, opts.seed, opts.precision)
}

/// The four coefficient measures of one polynomial at the infinite place.
/// `unitary` is present only when the polynomial is homogeneous in each
/// declared block.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureReport {
    pub gauss_weil: MeasuredLog,
    pub mahler: MeasuredLog,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unitary: Option<MeasuredLog>,
    pub l2_norm: MeasuredLog,
}

pub fn measure_report(
    p: &SparsePolynomial,
    block_sizes: Option<&[usize]>,
    opts: &MeasureOptions,
) -> Result<MeasureReport> {
    require_nonzero(p)?;
    let blocks: Vec<usize> =
        block_sizes.map(|b| b.to_vec()).unwrap_or_else(|| vec![p.arity()]);
    let unitary = if p.multihomogeneous_degree(&blocks).is_some() {
        Some(unitary_measure(p, &blocks, opts.sphere_samples, opts.seed, opts.precision)?)
    } else {
        None
    };
    Ok(MeasureReport {
        gauss_weil: MeasuredLog::exact(log_gauss_weil_inf(p, opts.precision)?),
        mahler: mahler_auto(p, opts)?,
        unitary,
        l2_norm: MeasuredLog::exact(log_l2_norm(p, opts.precision)?),
    })
}

/// Variable count entering the comparison constants: a form in k+1 variables
/// obeys the same bounds as an affine polynomial in k variables, so forms
/// drop one from the arity.
pub fn affine_var_count(p: &SparsePolynomial) -> usize {
    let a = p.arity();
    if p.homogeneous_degree().is_some() {
        a.saturating_sub(1)
    } else {
        a
    }
}

fn binom_int(n: u64, k: u64) -> Int {
    num_integer::binomial(Int::from(n), Int::from(k))
}

/// (1/2) log C(d + n, n) for the affine variable count n and total degree d.
fn half_log_monomial_count(p: &SparsePolynomial, prec: Precision) -> LogValue {
    let n = affine_var_count(p) as u64;
    let d = p.total_degree().finite().expect("nonzero polynomial") as u64;
    let binom = Rational::from(binom_int(d + n, n));
    let half = Rational::new(Int::from(1), Int::from(2));
    LogValue::ln_rational(&binom, prec).scale_rational(&half, prec)
}

/// Which comparison between the measures or heights to certify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComparisonKind {
    /// Max-coefficient vs torus measure at the infinite place, both
    /// directions, plus the euclidean-norm chain between them.
    MeasureMaxVsTorus,
    /// Gauss-Weil height vs torus height, both directions.
    HeightMaxVsTorus,
    /// Torus height vs unitary height of a form: lower bound and the
    /// harmonic-shift upper bound.
    HeightTorusVsUnitary,
    /// Gauss-Weil height vs unitary height of a form, both directions.
    HeightMaxVsUnitary,
}

impl ComparisonKind {
    pub fn label(self) -> &'static str {
        match self {
            ComparisonKind::MeasureMaxVsTorus => "measure_max_vs_torus",
            ComparisonKind::HeightMaxVsTorus => "height_max_vs_torus",
            ComparisonKind::HeightTorusVsUnitary => "height_torus_vs_unitary",
            ComparisonKind::HeightMaxVsUnitary => "height_max_vs_unitary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "measure_max_vs_torus" => Some(ComparisonKind::MeasureMaxVsTorus),
            "height_max_vs_torus" => Some(ComparisonKind::HeightMaxVsTorus),
            "height_torus_vs_unitary" => Some(ComparisonKind::HeightTorusVsUnitary),
            "height_max_vs_unitary" => Some(ComparisonKind::HeightMaxVsUnitary),
            _ => None,
        }
    }
}

/// One certified inequality lhs <= rhs with its margin and error budget.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub err: f64,
    pub verdict: Verdict,
}

impl InequalityCheck {
    pub fn new(label: &str, lhs: &LogValue, rhs: &LogValue, err: f64) -> Self {
        let margin = (rhs - lhs).to_f64();
        InequalityCheck {
            label: label.into(),
            lhs: lhs.to_f64(),
            rhs: rhs.to_f64(),
            margin,
            err,
            verdict: Verdict::classify(margin, err),
        }
    }
}

/// Outcome of one comparison request: every directional check plus the
/// folded verdict (worst single verdict wins).
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRecord {
    pub kind: &'static str,
    pub checks: Vec<InequalityCheck>,
    pub verdict: Verdict,
}

impl ComparisonRecord {
    fn fold(kind: ComparisonKind, checks: Vec<InequalityCheck>) -> Self {
        let verdict =
            checks.iter().fold(Verdict::Holds, |acc, c| acc.and(c.verdict));
        ComparisonRecord { kind: kind.label(), checks, verdict }
    }
}

/// Certifies the requested comparison on one polynomial, carrying numeric
/// error into the verdict so that a violation inside the error bars is
/// reported as inconclusive rather than as a counterexample.
pub fn check_comparison(
    p: &SparsePolynomial,
    kind: ComparisonKind,
    opts: &MeasureOptions,
) -> Result<ComparisonRecord> {
    require_nonzero(p)?;
    let prec = opts.precision;
    let n = affine_var_count(p) as i64;
    let d = p.total_degree().finite().expect("nonzero polynomial") as i64;
    let half_log_binom = half_log_monomial_count(p, prec);
    let doubling = ln2(prec).scale_i64(n * d);

    let record = match kind {
        ComparisonKind::MeasureMaxVsTorus => {
            let max_log = log_gauss_weil_inf(p, prec)?;
            let torus = mahler_auto(p, opts)?;
            let l2 = log_l2_norm(p, prec)?;
            let checks = vec![
                InequalityCheck::new(
                    "torus_over_root_count_vs_max",
                    &(&torus.value - &half_log_binom),
                    &max_log,
                    torus.err,
                ),
                InequalityCheck::new(
                    "max_vs_torus_doubling",
                    &max_log,
                    &(&torus.value + &doubling),
                    torus.err,
                ),
                InequalityCheck::new("torus_vs_euclidean", &torus.value, &l2, torus.err),
                InequalityCheck::new(
                    "euclidean_vs_max_with_count",
                    &l2,
                    &(&max_log + &half_log_binom),
                    0.0,
                ),
            ];
            ComparisonRecord::fold(kind, checks)
        }
        ComparisonKind::HeightMaxVsTorus => {
            let h_max = height_gauss_weil(p, prec)?;
            let h_torus = height_mahler(p, opts)?;
            let checks = vec![
                InequalityCheck::new(
                    "torus_height_over_root_count_vs_max",
                    &(&h_torus.value - &half_log_binom),
                    &h_max,
                    h_torus.err,
                ),
                InequalityCheck::new(
                    "max_height_vs_torus_doubling",
                    &h_max,
                    &(&h_torus.value + &doubling),
                    h_torus.err,
                ),
            ];
            ComparisonRecord::fold(kind, checks)
        }
        ComparisonKind::HeightTorusVsUnitary => {
            let (h_torus, h_unit, band) = form_heights(p, opts)?;
            let checks = vec![
                InequalityCheck::new(
                    "torus_height_vs_unitary",
                    &h_torus.value,
                    &h_unit.value,
                    h_torus.err + h_unit.err,
                ),
                InequalityCheck::new(
                    "unitary_vs_torus_plus_shift",
                    &h_unit.value,
                    &(&h_torus.value + &band),
                    h_torus.err + h_unit.err,
                ),
            ];
            ComparisonRecord::fold(kind, checks)
        }
        ComparisonKind::HeightMaxVsUnitary => {
            let h_max = height_gauss_weil(p, prec)?;
            let (_, h_unit, band) = form_heights(p, opts)?;
            let lower = &(&h_unit.value - &half_log_binom) - &band;
            let checks = vec![
                InequalityCheck::new(
                    "unitary_minus_count_and_shift_vs_max",
                    &lower,
                    &h_max,
                    h_unit.err,
                ),
                InequalityCheck::new(
                    "max_vs_unitary_doubling",
                    &h_max,
                    &(&h_unit.value + &doubling),
                    h_unit.err,
                ),
            ];
            ComparisonRecord::fold(kind, checks)
        }
    };
    Ok(record)
}

/// Torus and unitary heights of a form together with the exact harmonic band
/// d * (1/2 + ... + 1/(2n)) separating them.
fn form_heights(
    p: &SparsePolynomial,
    opts: &MeasureOptions,
) -> Result<(MeasuredLog, MeasuredLog, LogValue)> {
    if p.homogeneous_degree().is_none() || p.arity() < 2 {
        return Err(CoreError::Degenerate(
            "the unitary comparison needs a form in at least two variables".into(),
        ));
    }
    let blocks = [p.arity()];
    let d = p.total_degree().finite().expect("nonzero polynomial");
    let band_rat =
        Rational::from(Int::from(d)) * half_harmonic(p.arity() - 1);
    let band = LogValue::from_rational(&band_rat, opts.precision);
    let h_torus = height_mahler(p, opts)?;
    let h_unit = height_unitary(p, &blocks, opts)?;
    Ok((h_torus, h_unit, band))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::tests_support::parse_poly;

    fn opts_small() -> MeasureOptions {
        MeasureOptions {
            quad_points: 512,
            torus_samples: 20_000,
            sphere_samples: 20_000,
            seed: 42,
            ..MeasureOptions::default()
        }
    }

    #[test]
    fn max_coefficient_measure_at_each_place() {
        let p = parse_poly(&["X"], "3*X^2 - 2*X + 1");
        assert_eq!(
            gauss_weil_measure_v(&p, &Place::Infinite).unwrap(),
            Rational::from(Int::from(3))
        );
        let q = parse_poly(&["X"], "6*X + 4");
        assert_eq!(
            gauss_weil_measure_v(&q, &Place::Finite(2)).unwrap(),
            Rational::new(Int::from(1), Int::from(2))
        );
        let x = parse_poly(&["X"], "X");
        assert_eq!(gauss_weil_measure_v(&x, &Place::Finite(7)).unwrap(), Rational::from(Int::from(1)));
        assert!(gauss_weil_measure_v(&SparsePolynomial::zero(&["X"]), &Place::Infinite).is_err());
    }

    #[test]
    fn univariate_torus_measure_from_roots() {
        let prec = Precision::default();
        let m = mahler_exact_univariate(&parse_poly(&["X"], "X - 2"), prec).unwrap();
        assert!((m.to_f64() - 2f64.ln()).abs() <= m.err + 1e-12);
        let z = mahler_exact_univariate(&parse_poly(&["X"], "X"), prec).unwrap();
        assert!(z.value.is_zero() && z.err == 0.0);
        let phi = mahler_exact_univariate(&parse_poly(&["X"], "X^2 - X - 1"), prec).unwrap();
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((phi.to_f64() - golden).abs() <= phi.err + 1e-12);
    }

    #[test]
    fn quadrature_matches_roots_in_one_variable() {
        let p = parse_poly(&["X"], "X^2 - X - 1");
        let q = mahler_quadrature(&p, 4096).unwrap();
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((q.to_f64() - golden).abs() < 1e-4, "got {}", q.to_f64());
        assert_eq!(q.retried_nodes, 0);
        // A root exactly on the circle: the closed form gives 0 and the
        // midpoint rule converges like (log 2)/n.
        let c = parse_poly(&["X"], "X + 1");
        let qc = mahler_quadrature(&c, 8192).unwrap();
        assert!(qc.to_f64().abs() < 1e-4, "got {}", qc.to_f64());
    }

    #[test]
    fn bivariate_quadrature_on_split_product() {
        let p = parse_poly(&["X", "Y"], "X*Y - 3*X - 2*Y + 6"); // (X-2)(Y-3)
        let q = mahler_quadrature(&p, 512).unwrap();
        let expect = 2f64.ln() + 3f64.ln();
        assert!((q.to_f64() - expect).abs() < 1e-4, "got {}", q.to_f64());
        assert_eq!(q.retried_nodes, 0);
    }

    #[test]
    fn grid_on_the_zero_set_is_nudged_and_counted() {
        // X + Y vanishes at exactly n of the n^2 midpoint nodes; every such
        // node must be retried, and the nudge reproduces the cell average.
        let p = parse_poly(&["X", "Y"], "X + Y");
        let q = mahler_quadrature(&p, 512).unwrap();
        assert_eq!(q.retried_nodes, 512 + 256);
        assert!(q.to_f64().abs() < 5e-3, "got {}", q.to_f64());
    }

    #[test]
    fn torus_monte_carlo_agrees_with_roots() {
        let p = parse_poly(&["X"], "X - 2");
        let m = mahler_monte_carlo(&p, 40_000, 7).unwrap();
        assert!((m.to_f64() - 2f64.ln()).abs() <= m.err, "got {} err {}", m.to_f64(), m.err);
    }

    #[test]
    fn unitary_measure_of_monomials_is_exact() {
        let p = parse_poly(&["X0", "X1"], "X0");
        let m = unitary_measure(&p, &[2], 1_000, 1, Precision::default()).unwrap();
        assert!(m.value.is_zero() && m.err == 0.0);
        let c = parse_poly(&["X0", "X1"], "-3*X0*X1^2");
        let mc = unitary_measure(&c, &[2], 1_000, 1, Precision::default()).unwrap();
        assert!((mc.to_f64() - 3f64.ln()).abs() < 1e-25);
    }

    #[test]
    fn sphere_sampling_reproduces_the_monomial_shortcut() {
        let p = parse_poly(&["X0", "X1"], "X0");
        let m = unitary_measure_mc(&p, &[2], 30_000, 11, Precision::default()).unwrap();
        assert!(m.to_f64().abs() <= m.err, "got {} err {}", m.to_f64(), m.err);
        // Same seed, doubled polynomial: the sample paths coincide, so the
        // difference is log 2 up to rounding.
        let p2 = p.scale(&Rational::from(Int::from(2)));
        let m2 = unitary_measure_mc(&p2, &[2], 30_000, 11, Precision::default()).unwrap();
        assert!((m2.to_f64() - m.to_f64() - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn heights_clear_content_and_scaling() {
        let prec = Precision::default();
        let p = parse_poly(&["X"], "6*X - 4");
        let h = height_gauss_weil(&p, prec).unwrap();
        assert!((h.to_f64() - 3f64.ln()).abs() < 1e-25);
        let one = parse_poly(&["X"], "X - 1");
        assert!(height_gauss_weil(&one, prec).unwrap().is_zero());
        let scaled = p.scale(&Rational::new(Int::from(-7), Int::from(3)));
        assert_eq!(height_gauss_weil(&p, prec).unwrap(), height_gauss_weil(&scaled, prec).unwrap());

        let m = height_mahler(&parse_poly(&["X"], "X - 2"), &opts_small()).unwrap();
        assert!((m.to_f64() - 2f64.ln()).abs() <= m.err + 1e-12);
        let mx = height_mahler(&parse_poly(&["X"], "7*X"), &opts_small()).unwrap();
        assert!(mx.value.is_zero());
    }

    #[test]
    fn linear_form_sits_inside_the_unitary_band() {
        let p = parse_poly(&["X0", "X1"], "X0 - X1");
        let rec = check_comparison(&p, ComparisonKind::HeightTorusVsUnitary, &opts_small()).unwrap();
        assert_eq!(rec.verdict, Verdict::Holds);
        // h = log sqrt(2), h_torus = 0, band = 1/2.
        let lower = &rec.checks[0];
        assert!((lower.rhs - 0.5 * 2f64.ln()).abs() < 0.02);
        assert!(lower.margin > 0.1 && lower.margin > lower.err);
        let upper = &rec.checks[1];
        assert!((upper.margin - (0.5 - 0.5 * 2f64.ln())).abs() < 0.02);
    }

    #[test]
    fn max_vs_torus_measure_margins_on_shifted_line() {
        let p = parse_poly(&["X"], "X - 2");
        let rec = check_comparison(&p, ComparisonKind::MeasureMaxVsTorus, &opts_small()).unwrap();
        assert_eq!(rec.verdict, Verdict::Holds);
        // Lower bound side: torus measure 2 against max 2 with the monomial
        // count 2, so the compared lower quantity is 2/sqrt(2) = sqrt(2).
        let lower = &rec.checks[0];
        assert!(((lower.lhs).exp() - 2f64.sqrt()).abs() < 1e-9);
        assert!((lower.margin - 0.5 * 2f64.ln()).abs() < 1e-9);
        let upper = &rec.checks[1];
        assert!((upper.margin - 2f64.ln()).abs() < 1e-9);
        // Chain: torus 2 <= sqrt(5) <= sqrt(2) * 2, the outer one exact.
        let chain_hi = &rec.checks[3];
        assert_eq!(chain_hi.err, 0.0);
        assert!((chain_hi.lhs.exp() - 5f64.sqrt()).abs() < 1e-9);
        assert!(chain_hi.margin > 0.0);
    }

    #[test]
    fn constant_polynomial_heights_compare_with_zero_margins() {
        let p = parse_poly(&["X"], "1");
        let rec = check_comparison(&p, ComparisonKind::HeightMaxVsTorus, &opts_small()).unwrap();
        assert_eq!(rec.verdict, Verdict::Holds);
        for c in &rec.checks {
            assert_eq!(c.margin, 0.0);
            assert_eq!(c.err, 0.0);
        }
    }

    #[test]
    fn harmonic_shift_values() {
        assert_eq!(half_harmonic(3), Rational::new(Int::from(11), Int::from(12)));
        assert_eq!(
            sphere_shift(&[2, 1], &[2, 3]),
            Rational::from(Int::from(2)) * half_harmonic(1) + half_harmonic(2)
        );
    }

    #[test]
    fn report_carries_method_tags() {
        let p = parse_poly(&["X", "Y"], "X^2*Y + 3");
        let rep = measure_report(&p, None, &opts_small()).unwrap();
        assert_eq!(rep.gauss_weil.method, Method::Exact);
        assert!(matches!(rep.mahler.method, Method::Quadrature { .. }));
        assert!(rep.unitary.is_none());
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"method\":\"quadrature(512)\""), "{json}");
    }
}
