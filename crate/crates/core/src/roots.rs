//! Certified univariate root finding for Mahler integrals.
//!
//! Pipeline: deflate roots at zero, split off repeated factors by exact gcd,
//! locate the simple roots of each factor with the Aberth-Ehrlich iteration
//! in f64, certify with pairwise-disjoint Newton disks (radius n|P/P'|), and
//! if the certified interval around sum log max(1,|root|) is wider than the
//! target, polish each root with complex Newton at growing binary precision.

use num_complex::Complex64;
use num_traits::Zero;

use crate::logval::{rational_to_float, Float, Precision};
use crate::{Int, Rational};

/// Result of the root-based Mahler computation for one polynomial:
/// log(prod max(1,|root|)) with a certified two-sided error, plus the roots.
#[derive(Clone, Debug)]
pub struct RootLogSum {
    pub value: f64,
    pub err: f64,
    pub roots: Vec<(f64, f64)>,
}

fn poly_divmod(a: &[Rational], b: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
    assert!(!b.is_empty() && !b.last().unwrap().is_zero());
    let mut rem = a.to_vec();
    let db = b.len() - 1;
    if rem.len() <= db {
        return (vec![], rem);
    }
    let mut quot = vec![Rational::zero(); rem.len() - db];
    while rem.len() > db && !rem.is_empty() {
        let lead = rem.last().unwrap().clone();
        if lead.is_zero() {
            rem.pop();
            continue;
        }
        let shift = rem.len() - 1 - db;
        let q = &lead / b.last().unwrap();
        quot[shift] = q.clone();
        for (i, bc) in b.iter().enumerate() {
            let idx = shift + i;
            let delta = &q * bc;
            rem[idx] -= delta;
        }
        // Leading entry is now exactly zero.
        while let Some(last) = rem.last() {
            if last.is_zero() && rem.len() > 0 {
                rem.pop();
            } else {
                break;
            }
        }
    }
    (quot, rem)
}

fn trim(mut v: Vec<Rational>) -> Vec<Rational> {
    while let Some(last) = v.last() {
        if last.is_zero() {
            v.pop();
        } else {
            break;
        }
    }
    v
}

fn derivative(p: &[Rational]) -> Vec<Rational> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * Rational::from(Int::from(i as u64)))
        .collect()
}

/// Monic gcd of two univariate rational polynomials.
pub fn gcd_univariate(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut a = trim(a.to_vec());
    let mut b = trim(b.to_vec());
    while !b.is_empty() {
        let (_, r) = poly_divmod(&a, &b);
        a = b;
        b = trim(r);
    }
    if let Some(lead) = a.last().cloned() {
        for c in &mut a {
            *c /= &lead;
        }
    }
    a
}

fn horner_c64(c: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        acc = acc * z + ck;
    }
    acc
}

/// Aberth-Ehrlich simultaneous iteration; input ascending, nonzero constant
/// and leading coefficients, degree >= 1.
fn aberth(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let dc: Vec<f64> = c
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &x)| x * i as f64)
        .collect();
    // Initial ring: geometric mean radius, irrational phase offset.
    let r = (c[0].abs() / c[n].abs()).powf(1.0 / n as f64).max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.446244;
            Complex64::from_polar(r, th)
        })
        .collect();
    for _ in 0..600 {
        let mut done = true;
        for k in 0..n {
            let pv = horner_c64(c, z[k]);
            let dv = horner_c64(&dc, z[k]);
            if pv.norm() == 0.0 {
                continue;
            }
            let w = if dv.norm() == 0.0 {
                Complex64::new(1e-12, 1e-12)
            } else {
                pv / dv
            };
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != k {
                    s += (z[k] - z[j]).inv();
                }
            }
            let denom = Complex64::new(1.0, 0.0) - w * s;
            let step = if denom.norm() < 1e-300 { w } else { w / denom };
            z[k] -= step;
            if step.norm() > 1e-14 * z[k].norm().max(1.0) {
                done = false;
            }
        }
        if done {
            break;
        }
    }
    z
}

struct CF {
    re: Float,
    im: Float,
}

impl CF {
    fn mul(&self, o: &CF) -> CF {
        CF {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
    fn add(&self, o: &CF) -> CF {
        CF {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }
    fn sub(&self, o: &CF) -> CF {
        CF {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }
    fn div(&self, o: &CF) -> CF {
        let d = &o.re * &o.re + &o.im * &o.im;
        CF {
            re: (&self.re * &o.re + &self.im * &o.im) / &d,
            im: (&self.im * &o.re - &self.re * &o.im) / &d,
        }
    }
    fn abs_f64(&self) -> f64 {
        let re = self.re.to_f64().value();
        let im = self.im.to_f64().value();
        re.hypot(im)
    }
}

fn horner_cf(c: &[CF], z: &CF, prec: usize) -> CF {
    let zero = Float::ZERO.with_precision(prec).value();
    let mut acc = CF {
        re: zero.clone(),
        im: zero,
    };
    for ck in c.iter().rev() {
        acc = acc.mul(z).add(ck);
    }
    acc
}

/// One certified factor: simple roots assumed (square-free input).
fn log_sum_squarefree(p: &[Rational], target_err: f64) -> RootLogSum {
    let n = p.len() - 1;
    if n == 0 {
        return RootLogSum {
            value: 0.0,
            err: 0.0,
            roots: vec![],
        };
    }
    let pf: Vec<f64> = p
        .iter()
        .map(|c| rational_to_float(c, Precision::new(64)).to_f64().value())
        .collect();
    let mut roots = aberth(&pf);

    // Certified interval from Newton disks; escalate precision if too wide.
    let mut precisions = [0usize, 192, 384, 768].into_iter();
    loop {
        let prec = precisions.next();
        match prec {
            None => break,
            Some(0) => {}
            Some(bits) => {
                // Complex Newton polish at higher precision.
                let cf: Vec<CF> = p
                    .iter()
                    .map(|c| CF {
                        re: rational_to_float(c, Precision::new(bits)),
                        im: Float::ZERO.with_precision(bits).value(),
                    })
                    .collect();
                let dcf: Vec<CF> = derivative(p)
                    .iter()
                    .map(|c| CF {
                        re: rational_to_float(c, Precision::new(bits)),
                        im: Float::ZERO.with_precision(bits).value(),
                    })
                    .collect();
                for z in roots.iter_mut() {
                    let mut zc = CF {
                        re: Float::try_from(z.re).unwrap().with_precision(bits).value(),
                        im: Float::try_from(z.im).unwrap().with_precision(bits).value(),
                    };
                    for _ in 0..6 {
                        let pv = horner_cf(&cf, &zc, bits);
                        let dv = horner_cf(&dcf, &zc, bits);
                        if dv.abs_f64() == 0.0 {
                            break;
                        }
                        zc = zc.sub(&pv.div(&dv));
                    }
                    *z = Complex64::new(zc.re.to_f64().value(), zc.im.to_f64().value());
                }
            }
        }
        let (value, err, ok) = certified_interval(&pf, &roots, n);
        if ok && err <= target_err {
            return RootLogSum {
                value,
                err,
                roots: roots.iter().map(|z| (z.re, z.im)).collect(),
            };
        }
        if prec == Some(768) {
            return RootLogSum {
                value,
                err,
                roots: roots.iter().map(|z| (z.re, z.im)).collect(),
            };
        }
    }
    unreachable!()
}

fn certified_interval(pf: &[f64], roots: &[Complex64], n: usize) -> (f64, f64, bool) {
    let dpf: Vec<f64> = pf
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &x)| x * i as f64)
        .collect();
    let mut value = 0.0;
    let mut err = 0.0;
    let mut disjoint = true;
    let radii: Vec<f64> = roots
        .iter()
        .map(|&z| {
            let pv = horner_c64(pf, z).norm();
            let dv = horner_c64(&dpf, z).norm();
            if dv == 0.0 {
                f64::INFINITY
            } else {
                n as f64 * pv / dv
            }
        })
        .collect();
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            if (roots[i] - roots[j]).norm() <= radii[i] + radii[j] {
                disjoint = false;
            }
        }
    }
    for (z, &r) in roots.iter().zip(&radii) {
        let m = z.norm();
        value += m.max(1.0).ln();
        let hi = (m + r).max(1.0).ln();
        let lo = (m - r).max(1.0).ln();
        err += hi - lo;
    }
    (value, err, disjoint && err.is_finite())
}

/// log(prod over roots of max(1,|root|)) for an arbitrary univariate rational
/// polynomial of degree >= 0, multiplicities included, certified error.
pub fn log_max_roots(p: &[Rational], target_err: f64) -> RootLogSum {
    let p = trim(p.to_vec());
    assert!(!p.is_empty(), "zero polynomial has no root measure");
    // Deflate roots at zero: they contribute log max(1,0) = 0.
    let nz = p.iter().position(|c| !c.is_zero()).unwrap();
    let p = p[nz..].to_vec();
    if p.len() == 1 {
        return RootLogSum {
            value: 0.0,
            err: 0.0,
            roots: vec![],
        };
    }
    // Split off repeated part: gcd(P, P') collects multiplicities.
    let g = gcd_univariate(&p, &derivative(&p));
    if g.len() > 1 {
        let (simple, rem) = poly_divmod(&p, &g);
        debug_assert!(trim(rem).is_empty());
        let a = log_max_roots(&simple, target_err / 2.0);
        let b = log_max_roots(&g, target_err / 2.0);
        let mut roots = a.roots;
        roots.extend(b.roots);
        return RootLogSum {
            value: a.value + b.value,
            err: a.err + b.err,
            roots,
        };
    }
    log_sum_squarefree(&p, target_err)
}
