//! Special-function kernels: complex log-gamma, digamma, Pochhammer symbols,
//! Gegenbauer polynomials and the Gauss hypergeometric function in the
//! parameter regimes the coefficient sequences need.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::series::{wynn_epsilon, CompensatedSum};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn c64(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn is_nonpositive_integer(w: Complex64) -> bool {
    w.im == 0.0 && w.re <= 0.0 && w.re == w.re.round()
}

/// Natural log of `Gamma(w)` (Lanczos, reflected for `Re w < 1/2`).
///
/// The imaginary part is only defined modulo `2 pi`; callers exponentiate
/// or take differences.
pub fn ln_gamma(w: Complex64) -> Result<Complex64> {
    if !(w.re.is_finite() && w.im.is_finite()) {
        return Err(Error::NonFinite("ln_gamma argument"));
    }
    if is_nonpositive_integer(w) {
        return Err(Error::PoleOfGamma(w.re));
    }
    if w.re < 0.5 {
        // Gamma(w) Gamma(1 - w) = pi / sin(pi w)
        let s = (w * PI).sin();
        return Ok(c64(PI.ln()) - s.ln() - ln_gamma(c64(1.0) - w)?);
    }
    let w = w - 1.0;
    let mut x = c64(LANCZOS[0]);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (w + i as f64);
    }
    let t = w + LANCZOS_G + 0.5;
    Ok(c64(LN_SQRT_2PI) + (w + 0.5) * t.ln() - t + x.ln())
}

/// `ln Gamma(x)` for real `x > 0`.
pub fn ln_gamma_pos(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma_pos(1.0 - x);
    }
    let w = x - 1.0;
    let mut s = LANCZOS[0];
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        s += p / (w + i as f64);
    }
    let t = w + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (w + 0.5) * t.ln() - t + s.ln()
}

/// `1/Gamma(w)`, zero at the poles.
pub fn rgamma(w: Complex64) -> Complex64 {
    if is_nonpositive_integer(w) {
        return c64(0.0);
    }
    match ln_gamma(w) {
        Ok(l) => (-l).exp(),
        Err(_) => c64(f64::NAN),
    }
}

/// Digamma `psi(w)` by upward recurrence and the asymptotic series.
pub fn digamma(w: Complex64) -> Result<Complex64> {
    if is_nonpositive_integer(w) {
        return Err(Error::PoleOfGamma(w.re));
    }
    if w.re < 0.5 {
        // psi(1 - w) - psi(w) = pi cot(pi w)
        let cot = (w * PI).cos() / (w * PI).sin();
        return Ok(digamma(c64(1.0) - w)? - cot * PI);
    }
    let mut w = w;
    let mut shift = c64(0.0);
    while w.re < 12.0 {
        shift -= w.inv();
        w += 1.0;
    }
    let r = w.inv();
    let r2 = r * r;
    let series = r2
        * (-1.0 / 12.0
            + r2 * (1.0 / 120.0 + r2 * (-1.0 / 252.0 + r2 * (1.0 / 240.0 + r2 * (-1.0 / 132.0 + r2 * (691.0 / 32760.0))))));
    Ok(shift + w.ln() - r * 0.5 + series)
}

/// Rising factorial `(a)_n` as a product.
pub fn pochhammer(a: Complex64, n: usize) -> Complex64 {
    (0..n).fold(c64(1.0), |p, k| p * (a + k as f64))
}

/// Rising factorial for real arguments.
pub fn pochhammer_real(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |p, k| p * (a + k as f64))
}

/// `(a)_n = Gamma(a + n)/Gamma(a)` through log-gamma.
pub fn pochhammer_gamma_ratio(a: Complex64, n: usize) -> Result<Complex64> {
    Ok((ln_gamma(a + n as f64)? - ln_gamma(a)?).exp())
}

/// Gegenbauer polynomial `C_n^lam(x)` by the three-term recurrence.
pub fn gegenbauer(n: usize, lam: f64, x: f64) -> f64 {
    let mut c0 = 1.0;
    if n == 0 {
        return c0;
    }
    let mut c1 = 2.0 * lam * x;
    for m in 2..=n {
        let mf = m as f64;
        let c2 = (2.0 * x * (mf + lam - 1.0) * c1 - (mf + 2.0 * lam - 2.0) * c0) / mf;
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// `C_0^lam(x), ..., C_{n_max}^lam(x)`.
pub fn gegenbauer_sequence(n_max: usize, lam: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(2.0 * lam * x);
    for m in 2..=n_max {
        let mf = m as f64;
        let c = (2.0 * x * (mf + lam - 1.0) * out[m - 1] - (mf + 2.0 * lam - 2.0) * out[m - 2]) / mf;
        out.push(c);
    }
    out
}

// ---------------------------------------------------------------------------
// double-double arithmetic for cancellation-prone real series

#[derive(Debug, Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DoubleDouble {
    fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(s, e + self.lo + o.lo);
        Self { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p) + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self.add(DoubleDouble::new(q1).mul_f64(-b));
        let q2 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

// ---------------------------------------------------------------------------
// Gauss hypergeometric function

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyp2F1Params {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub z: Complex64,
    pub tol: f64,
}

impl Hyp2F1Params {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Self {
        Self { a, b, c, z, tol: 1e-15 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Which representation produced a hypergeometric value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hyp2F1Method {
    Terminating,
    Direct,
    Pfaff,
    OneMinusZ,
    GaussSum,
    Accelerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyp2F1Value {
    pub value: Complex64,
    /// Absolute error estimate.
    pub error: f64,
    pub method: Hyp2F1Method,
    pub terms: usize,
}

/// Terms `(a)_k (b)_k / ((c)_k k!) z^k` of the defining series.
#[derive(Debug, Clone)]
pub struct Hyp2F1Terms {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
    k: usize,
    term: Complex64,
}

impl Hyp2F1Terms {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Self {
        Self { a, b, c, z, k: 0, term: c64(1.0) }
    }
}

impl Iterator for Hyp2F1Terms {
    type Item = Complex64;

    fn next(&mut self) -> Option<Complex64> {
        let out = self.term;
        let k = self.k as f64;
        self.term = self.term * (self.a + k) * (self.b + k) / ((self.c + k) * (k + 1.0)) * self.z;
        self.k += 1;
        Some(out)
    }
}

const MAX_TERMS: usize = 200_000;
const DIRECT_RADIUS: f64 = 0.75;

fn check_finite(p: &Hyp2F1Params) -> Result<()> {
    for v in [p.a, p.b, p.c, p.z] {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("hyp2f1 parameters"));
        }
    }
    if p.tol.is_nan() || p.tol <= 0.0 {
        return Err(Error::InvalidParameter("hyp2f1 tolerance must be positive".into()));
    }
    Ok(())
}

fn direct_series(a: Complex64, b: Complex64, c: Complex64, z: Complex64, tol: f64) -> Result<Hyp2F1Value> {
    let mut acc = CompensatedSum::new();
    let mut abs_sum = 0.0;
    let mut term = c64(1.0);
    let mut small = 0;
    for k in 0..MAX_TERMS {
        acc.add(term);
        abs_sum += term.norm();
        let kf = k as f64;
        let ratio = (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        let next = term * ratio;
        let q = ratio.norm();
        let s = acc.value().norm();
        let rem = if q < 1.0 { next.norm() / (1.0 - q) } else { f64::INFINITY };
        if k > 0 && rem <= tol * s {
            small += 1;
            if small >= 2 {
                return Ok(Hyp2F1Value {
                    value: acc.value(),
                    error: rem + 4.0 * f64::EPSILON * abs_sum,
                    method: Hyp2F1Method::Direct,
                    terms: k + 1,
                });
            }
        } else {
            small = 0;
        }
        term = next;
        if !(term.re.is_finite() && term.im.is_finite()) {
            return Err(Error::NonFinite("hyp2f1 series term"));
        }
    }
    Err(Error::ConvergenceFailure { what: "hyp2f1 direct series", estimate: term.norm() })
}

fn terminating_series(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Result<Hyp2F1Value> {
    let m = if is_nonpositive_integer(a) { (-a.re) as usize } else { (-b.re) as usize };
    if is_nonpositive_integer(c) && (-c.re) < m as f64 {
        return Err(Error::DomainError("c is a non-positive integer above the terminating degree".into()));
    }
    let mut acc = CompensatedSum::new();
    let mut abs_sum = 0.0;
    for t in Hyp2F1Terms::new(a, b, c, z).take(m + 1) {
        acc.add(t);
        abs_sum += t.norm();
    }
    Ok(Hyp2F1Value { value: acc.value(), error: 4.0 * f64::EPSILON * abs_sum, method: Hyp2F1Method::Terminating, terms: m + 1 })
}

fn pfaff(p: &Hyp2F1Params) -> Result<Hyp2F1Value> {
    let (a, b, c, z) = (p.a, p.b, p.c, p.z);
    let w = z / (z - 1.0);
    let one_minus_z = c64(1.0) - z;
    // keep the smaller numerator pair in the transformed series
    let (inner, pre) = if (c - a).norm() + b.norm() <= a.norm() + (c - b).norm() {
        (direct_series(c - a, b, c, w, p.tol)?, (-b * one_minus_z.ln()).exp())
    } else {
        (direct_series(a, c - b, c, w, p.tol)?, (-a * one_minus_z.ln()).exp())
    };
    Ok(Hyp2F1Value { value: pre * inner.value, error: pre.norm() * inner.error, method: Hyp2F1Method::Pfaff, terms: inner.terms })
}

fn one_minus_z(p: &Hyp2F1Params) -> Result<Hyp2F1Value> {
    let (a, b, c, z) = (p.a, p.b, p.c, p.z);
    let s = c - a - b;
    let u = c64(1.0) - z;
    let ln_u = u.ln();
    let near_int = s.im.abs() < 1e-12 && (s.re - s.re.round()).abs() < 1e-12;
    if near_int && s.re.round() >= 0.0 {
        let m = s.re.round() as usize;
        let mf = m as f64;
        // finite part
        let mut finite = c64(0.0);
        if m > 0 {
            let coef = (ln_gamma(c64(mf))? + ln_gamma(c)?).exp() * rgamma(a + mf) * rgamma(b + mf);
            let mut t = c64(1.0);
            let mut acc = CompensatedSum::new();
            for n in 0..m {
                acc.add(t);
                let nf = n as f64;
                t = t * (a + nf) * (b + nf) / ((nf + 1.0) * (1.0 - mf + nf)) * u;
            }
            finite = coef * acc.value();
        }
        // logarithmic part
        let pref = u.powf(mf) * if m.is_multiple_of(2) { 1.0 } else { -1.0 } * ln_gamma(c)?.exp() * rgamma(a) * rgamma(b);
        let mut psi_a = digamma(a + mf)?;
        let mut psi_b = digamma(b + mf)?;
        let mut psi_1 = digamma(c64(1.0))?;
        let mut psi_m = digamma(c64(mf + 1.0))?;
        let mut coef_t = c64((-ln_gamma_pos(mf + 1.0)).exp());
        let mut acc = CompensatedSum::new();
        let mut abs_sum = 0.0;
        let mut n = 0usize;
        loop {
            let bracket = ln_u - psi_1 - psi_m + psi_a + psi_b;
            let term = coef_t * bracket;
            acc.add(term);
            abs_sum += term.norm();
            let nf = n as f64;
            coef_t = coef_t * (a + mf + nf) * (b + mf + nf) / ((nf + 1.0) * (nf + mf + 1.0)) * u;
            psi_a += (a + mf + nf).inv();
            psi_b += (b + mf + nf).inv();
            psi_1 += 1.0 / (nf + 1.0);
            psi_m += 1.0 / (nf + mf + 1.0);
            n += 1;
            let est = (coef_t * (ln_u.norm() + psi_a.norm() + psi_b.norm() + psi_1.norm() + psi_m.norm())).norm();
            if n > 2 && est <= p.tol * acc.value().norm().max(1e-300) {
                break;
            }
            if n > MAX_TERMS {
                return Err(Error::ConvergenceFailure { what: "hyp2f1 1-z series", estimate: est });
            }
        }
        let value = finite - pref * acc.value();
        let err = 8.0 * f64::EPSILON * (finite.norm() + (pref * abs_sum).norm()) + p.tol * value.norm();
        return Ok(Hyp2F1Value { value, error: err, method: Hyp2F1Method::OneMinusZ, terms: n });
    }
    if near_int {
        return Err(Error::DomainError("c - a - b is a negative integer near z = 1".into()));
    }
    let g1 = (ln_gamma(c)? + ln_gamma(s)?).exp() * rgamma(c - a) * rgamma(c - b);
    let g2 = (ln_gamma(c)? + ln_gamma(-s)?).exp() * rgamma(a) * rgamma(b);
    let f1 = if g1.norm() == 0.0 { None } else { Some(direct_series(a, b, c64(1.0) - s, u, p.tol)?) };
    let f2 = if g2.norm() == 0.0 { None } else { Some(direct_series(c - a, c - b, s + 1.0, u, p.tol)?) };
    let us = (s * ln_u).exp();
    let mut value = c64(0.0);
    let mut err = 0.0;
    let mut terms = 0;
    if let Some(f) = f1 {
        value += g1 * f.value;
        err += g1.norm() * f.error;
        terms += f.terms;
    }
    if let Some(f) = f2 {
        value += g2 * us * f.value;
        err += (g2 * us).norm() * f.error;
        terms += f.terms;
    }
    Ok(Hyp2F1Value { value, error: err, method: Hyp2F1Method::OneMinusZ, terms })
}

fn accelerated(p: &Hyp2F1Params) -> Result<Hyp2F1Value> {
    const WINDOW: usize = 48;
    let mut acc = CompensatedSum::new();
    let mut partials = Vec::new();
    let mut last: Option<(Complex64, f64)> = None;
    let mut hits = 0;
    for (k, t) in Hyp2F1Terms::new(p.a, p.b, p.c, p.z).take(20_000).enumerate() {
        acc.add(t);
        partials.push(acc.value());
        if k >= 16 && k % 8 == 0 {
            let start = partials.len().saturating_sub(WINDOW);
            if let Some((est, err)) = wynn_epsilon(&partials[start..]) {
                let err = match last {
                    Some((prev, _)) => err.max((est - prev).norm()),
                    None => err,
                };
                last = Some((est, err));
                if err <= p.tol * est.norm() {
                    hits += 1;
                    if hits >= 2 {
                        return Ok(Hyp2F1Value { value: est, error: err, method: Hyp2F1Method::Accelerated, terms: k + 1 });
                    }
                } else {
                    hits = 0;
                }
            }
        }
    }
    Err(Error::ConvergenceFailure { what: "hyp2f1 accelerated series", estimate: last.map_or(f64::INFINITY, |l| l.1) })
}

/// Gauss hypergeometric function for `|z| <= 1`.
///
/// Terminating series are summed exactly. Otherwise the evaluation picks the
/// direct series for small `|z|`, the Pfaff transform `z -> z/(z-1)`, the
/// `1 - z` connection formula (integer or non-integer `c - a - b`), or
/// Wynn-accelerated summation on the unit circle away from `z = 1`.
pub fn hyp2f1(p: &Hyp2F1Params) -> Result<Hyp2F1Value> {
    check_finite(p)?;
    let (a, b, c, z) = (p.a, p.b, p.c, p.z);
    if z == c64(0.0) {
        return Ok(Hyp2F1Value { value: c64(1.0), error: 0.0, method: Hyp2F1Method::Terminating, terms: 1 });
    }
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        return terminating_series(a, b, c, z);
    }
    if is_nonpositive_integer(c) {
        return Err(Error::DomainError("c is a non-positive integer".into()));
    }
    let r = z.norm();
    if r > 1.0 + 1e-13 {
        return Err(Error::DomainError(format!("|z| = {r} > 1")));
    }
    let s = c - a - b;
    if (r - 1.0).abs() <= 1e-13 && s.re <= 0.0 {
        return Err(Error::DomainError("|z| = 1 requires Re(c - a - b) > 0".into()));
    }
    if (z - 1.0).norm() < 1e-15 {
        let v = (ln_gamma(c)? + ln_gamma(s)?).exp() * rgamma(c - a) * rgamma(c - b);
        return Ok(Hyp2F1Value { value: v, error: 1e-14 * v.norm(), method: Hyp2F1Method::GaussSum, terms: 0 });
    }
    if r <= DIRECT_RADIUS {
        return direct_series(a, b, c, z, p.tol);
    }
    let w = z / (z - 1.0);
    if w.norm() <= DIRECT_RADIUS {
        return pfaff(p);
    }
    if (c64(1.0) - z).norm() <= DIRECT_RADIUS {
        match one_minus_z(p) {
            Ok(v) => return Ok(v),
            Err(Error::DomainError(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if r < 0.995 {
        return direct_series(a, b, c, z, p.tol);
    }
    accelerated(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyp2F1Real {
    pub value: f64,
    pub error: f64,
    pub terms: usize,
}

/// Real Gauss hypergeometric function for `|z| < 1`.
///
/// Terminating series are summed in exact rational arithmetic and rounded
/// once, so strongly cancelling polynomial cases stay accurate. Other series
/// are summed in double-double arithmetic.
pub fn hyp2f1_real(a: f64, b: f64, c: f64, z: f64, tol: f64) -> Result<Hyp2F1Real> {
    if !(a.is_finite() && b.is_finite() && c.is_finite() && z.is_finite()) {
        return Err(Error::NonFinite("hyp2f1_real parameters"));
    }
    if z.abs() >= 1.0 {
        return Err(Error::DomainError(format!("hyp2f1_real needs |z| < 1, got {z}")));
    }
    let a_term = a <= 0.0 && a == a.round();
    let b_term = b <= 0.0 && b == b.round();
    let degree = if a_term && b_term {
        Some((-a).min(-b) as usize)
    } else if a_term {
        Some((-a) as usize)
    } else if b_term {
        Some((-b) as usize)
    } else {
        None
    };
    if c <= 0.0 && c == c.round() && degree.is_none_or(|m| (-c) < m as f64) {
        return Err(Error::DomainError("c is a non-positive integer".into()));
    }
    if let Some(m) = degree {
        let value = terminating_exact(a, b, c, z, m)?;
        return Ok(Hyp2F1Real { value, error: f64::EPSILON * value.abs(), terms: m + 1 });
    }
    let mut sum = DoubleDouble::new(1.0);
    let mut term = DoubleDouble::new(1.0);
    let mut abs_sum = 1.0;
    let cap = MAX_TERMS;
    let mut small = 0;
    for k in 0..cap {
        let kf = k as f64;
        term = term.mul_f64(a + kf).mul_f64(b + kf).mul_f64(z).div_f64(c + kf).div_f64(kf + 1.0);
        sum = sum.add(term);
        let t = term.to_f64().abs();
        abs_sum += t;
        {
            let q = ((a + kf + 1.0) * (b + kf + 1.0) / ((c + kf + 1.0) * (kf + 2.0)) * z).abs();
            let rem = if q < 1.0 { t * q / (1.0 - q) } else { f64::INFINITY };
            if rem <= tol * sum.to_f64().abs() {
                small += 1;
                if small >= 2 {
                    return Ok(Hyp2F1Real { value: sum.to_f64(), error: rem + 1e-30 * abs_sum, terms: k + 2 });
                }
            } else {
                small = 0;
            }
        }
    }
    Err(Error::ConvergenceFailure { what: "hyp2f1_real series", estimate: term.to_f64().abs() })
}

fn exact(x: f64) -> Result<(BigInt, BigInt)> {
    let r = BigRational::from_float(x).ok_or(Error::NonFinite("hyp2f1_real parameter"))?;
    Ok((r.numer().clone(), r.denom().clone()))
}

/// Terminating series of degree `m` in exact rational arithmetic (every
/// double is a dyadic rational), rounded once at the end.
fn terminating_exact(a: f64, b: f64, c: f64, z: f64, m: usize) -> Result<f64> {
    let (an, ad) = exact(a)?;
    let (bn, bd) = exact(b)?;
    let (cn, cd) = exact(c)?;
    let (zn, zd) = exact(z)?;
    // Horner: S = 1 + r_0 (1 + r_1 (1 + ...)), r_j = (a+j)(b+j) z / ((c+j)(j+1))
    let mut sn = BigInt::one();
    let mut sd = BigInt::one();
    for j in (0..m).rev() {
        let jb = BigInt::from(j);
        let num = (&an + &jb * &ad) * (&bn + &jb * &bd) * &zn * &cd;
        let den = (&cn + &jb * &cd) * BigInt::from(j + 1) * &ad * &bd * &zd;
        if den == BigInt::from(0) {
            return Err(Error::DomainError("c + j vanishes inside the terminating range".into()));
        }
        let new_d = &sd * &den;
        sn = &sd * &den + num * &sn;
        sd = new_d;
    }
    BigRational::new(sn, sd).to_f64().ok_or(Error::NonFinite("hyp2f1_real value"))
}
