//! Operator matrices for fixed `l`: `phi_n`, the tridiagonal `A`, its
//! factorisation `A - sigma E = b b^T`, `B = b^{-1}`, the closed-form
//! resolvent, the `g_n` sequence, `S = s^T G s` and `C = s B`.

use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{eta_sequence, upsilon};
use crate::coeffs::CoeffSequence;
use crate::error::{Error, Result};
use crate::oracle::linalg::CMatrix;
use crate::oracle::quadrature::{HalfLineRule, QuadratureRule};
use crate::oracle::series::CompensatedSum;
use crate::params::{Branch, DimensionlessState};
use crate::specfun::ln_gamma_pos;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `i sqrt((y+1)/(2 rho))` with the principal root.
pub fn phi_prefactor(state: &DimensionlessState) -> Complex64 {
    let v = (state.y + 1.0) / (2.0 * state.rho);
    // a negative zero imaginary part would flip the principal root
    let v = Complex64::new(v.re, v.im + 0.0);
    Complex64::i() * v.sqrt()
}

/// `ln` of `Gamma(n/2+1) Gamma((n+3)/2+l) / (Gamma((n+1)/2) Gamma(n/2+l+1))`.
pub fn ln_phi_ratio(n: usize, l: usize) -> f64 {
    let (nf, lf) = (n as f64, l as f64);
    ln_gamma_pos(nf / 2.0 + 1.0) + ln_gamma_pos((nf + 3.0) / 2.0 + lf)
        - ln_gamma_pos((nf + 1.0) / 2.0)
        - ln_gamma_pos(nf / 2.0 + lf + 1.0)
}

pub fn phi(n: usize, l: usize, state: &DimensionlessState) -> Complex64 {
    phi_prefactor(state) * (0.5 * ln_phi_ratio(n, l)).exp()
}

/// `phi_0..phi_{len-1}` with their squares formed without rounding through
/// the square root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSequence {
    pub l: usize,
    pub values: Vec<Complex64>,
    pub squares: Vec<Complex64>,
}

pub fn phi_sequence(l: usize, state: &DimensionlessState, len: usize) -> PhiSequence {
    let p = phi_prefactor(state);
    let p2 = -(state.y + 1.0) / (2.0 * state.rho);
    let mut values = Vec::with_capacity(len);
    let mut squares = Vec::with_capacity(len);
    for n in 0..len {
        let lr = ln_phi_ratio(n, l);
        values.push(p * (0.5 * lr).exp());
        squares.push(p2 * lr.exp());
    }
    PhiSequence { l, values, squares }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    A,
    BFactor,
    BInverse,
    Resolvent,
    SMatrix,
    CMatrix,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorMeta {
    pub y: Complex64,
    pub rho: f64,
    pub sigma: f64,
    pub gamma: Option<f64>,
}

/// An `N x N` truncation of one of the infinite operators.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub l: usize,
    pub entries: CMatrix,
    pub kind: OperatorKind,
    /// `true` once `sigma E` has been subtracted from an `A`.
    pub shifted: bool,
    pub meta: OperatorMeta,
}

impl TruncatedOperator {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// `A - sigma E`; refuses to shift twice.
    pub fn shift(&self, sigma: f64) -> Result<Self> {
        if self.kind != OperatorKind::A {
            return Err(Error::InvalidParameter("only A can be shifted".into()));
        }
        if self.shifted {
            return Err(Error::InvalidParameter("operator is already shifted".into()));
        }
        let n = self.size();
        let mut out = self.clone();
        out.entries -= CMatrix::identity(n, n) * Complex64::new(sigma, 0.0);
        out.shifted = true;
        out.meta.sigma = sigma;
        Ok(out)
    }

    /// `A` back from `A - sigma E`.
    pub fn unshift(&self) -> Result<Self> {
        if self.kind != OperatorKind::A || !self.shifted {
            return Err(Error::InvalidParameter("operator is not a shifted A".into()));
        }
        let n = self.size();
        let mut out = self.clone();
        out.entries += CMatrix::identity(n, n) * Complex64::new(self.meta.sigma, 0.0);
        out.shifted = false;
        Ok(out)
    }
}

fn meta(state: &DimensionlessState, sigma: f64) -> OperatorMeta {
    OperatorMeta { y: state.y, rho: state.rho, sigma, gamma: None }
}

/// Tridiagonal `A`: diagonal `(y-1)/(2 rho)(n+l+1)`, off-diagonal `phi_n phi_{n+1}`.
pub fn a_matrix(l: usize, state: &DimensionlessState, n: usize) -> Result<TruncatedOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter("truncation size must be at least 1".into()));
    }
    let phi = phi_sequence(l, state, n + 1);
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = (state.y - 1.0) / (2.0 * state.rho) * (i + l + 1) as f64;
        if i + 1 < n {
            // phi_n phi_{n+1} = -(y+1)/(2 rho) sqrt(r_n r_{n+1})
            let off = -(state.y + 1.0) / (2.0 * state.rho) * (0.5 * (ln_phi_ratio(i, l) + ln_phi_ratio(i + 1, l))).exp();
            debug_assert!((off - phi.values[i] * phi.values[i + 1]).norm() <= 1e-12 * off.norm().max(1e-300));
            m[(i, i + 1)] = off;
            m[(i + 1, i)] = off;
        }
    }
    Ok(TruncatedOperator { l, entries: m, kind: OperatorKind::A, shifted: false, meta: meta(state, 0.0) })
}

/// A quadrature-built operator matrix with its doubling error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMatrix {
    pub matrix: CMatrix,
    pub error: f64,
}

fn eta_table(l: usize, n: usize, rule: &HalfLineRule) -> Vec<Vec<f64>> {
    rule.nodes.iter().map(|&x| eta_sequence(n.saturating_sub(1), l, x)).collect()
}

fn weighted_gram<F: Fn(f64) -> Complex64>(l: usize, n: usize, rule: &HalfLineRule, w: F) -> CMatrix {
    let etas = eta_table(l, n, rule);
    let wx: Vec<Complex64> = rule.nodes.iter().zip(&rule.weights).map(|(&x, &q)| w(x) * q).collect();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = CompensatedSum::new();
            for (q, e) in etas.iter().enumerate() {
                s.add(wx[q] * (e[i] * e[j]));
            }
            m[(i, j)] = s.value();
            m[(j, i)] = s.value();
        }
    }
    m
}

fn with_doubling<F: Fn(usize) -> Result<CMatrix>>(points: usize, build: F) -> Result<QuadMatrix> {
    let coarse = build(points)?;
    let fine = build(2 * points)?;
    let error = (&fine - &coarse).iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(QuadMatrix { matrix: fine, error })
}

/// `A_{nm} = (1/rho)/sqrt(upsilon_n upsilon_m) int x^2 (y - x^2)/(x^2+1) eta_n eta_m dx`.
pub fn a_matrix_quadrature(l: usize, state: &DimensionlessState, n: usize, points: usize) -> Result<QuadMatrix> {
    let y = state.y;
    let rho = state.rho;
    with_doubling(points, |p| {
        let rule = HalfLineRule::new(QuadratureRule::GaussLegendreMapped, p)?;
        let mut m = weighted_gram(l, n, &rule, |x| (y - x * x) * (x * x / (x * x + 1.0)));
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] /= rho * (upsilon(i, l) * upsilon(j, l)).sqrt();
            }
        }
        Ok(m)
    })
}

/// `A^{-1}_{nm} = rho sqrt(upsilon_n upsilon_m) int x^2 (x^2+1)/(y - x^2) eta_n eta_m dx`
/// on the `E + i0` side; for positive real `y` the pole at `x = sqrt(y)` is
/// taken as principal value minus `i pi` times its residue.
pub fn a_inverse_quadrature_matrix(l: usize, state: &DimensionlessState, n: usize, points: usize) -> Result<QuadMatrix> {
    let y = state.y;
    let rho = state.rho;
    let pole = if y.im == 0.0 && y.re > 0.0 { Some(y.re.sqrt()) } else { None };
    with_doubling(points, |p| {
        let rule = HalfLineRule::new(QuadratureRule::GaussLegendreMapped, p)?;
        let mut m = match pole {
            None => weighted_gram(l, n, &rule, |x| Complex64::new(x * x * (x * x + 1.0), 0.0) / (y - x * x)),
            Some(x0) => {
                // g_{nm}(x) = x^2 (x^2+1) eta_n eta_m; subtract g_{nm}(x0)
                let g = |x: f64| x * x * (x * x + 1.0);
                let e0 = eta_sequence(n - 1, l, x0);
                let etas = eta_table(l, n, &rule);
                let mut m = CMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let g0 = g(x0) * e0[i] * e0[j];
                        let mut s = CompensatedSum::new();
                        for (q, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                            let d = x0 * x0 - x * x;
                            s.add(Complex64::new(w * (g(x) * etas[q][i] * etas[q][j] - g0) / d, 0.0));
                        }
                        let v = s.value() - Complex64::new(0.0, std::f64::consts::PI) * g0 / (2.0 * x0);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                m
            }
        };
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= rho * (upsilon(i, l) * upsilon(j, l)).sqrt();
            }
        }
        Ok(m)
    })
}

/// Single entry of the quadrature inverse.
pub fn a_inverse_quadrature(n1: usize, n2: usize, l: usize, state: &DimensionlessState, points: usize) -> Result<Complex64> {
    let m = a_inverse_quadrature_matrix(l, state, n1.max(n2) + 1, points)?;
    Ok(m.matrix[(n1, n2)])
}

fn check_beta(seq: &CoeffSequence, phi: &PhiSequence, n: usize) -> Result<()> {
    if seq.beta.len() < n || phi.values.len() < n {
        return Err(Error::IndexError(format!("sequences shorter than truncation size {n}")));
    }
    for (k, b) in seq.beta.iter().take(n).enumerate() {
        if b.norm() == 0.0 {
            return Err(Error::ZeroDivisor { n: k });
        }
    }
    Ok(())
}

fn op(seq: &CoeffSequence, entries: CMatrix, kind: OperatorKind, shifted: bool) -> TruncatedOperator {
    TruncatedOperator { l: seq.ctx.l, entries, kind, shifted, meta: meta(&seq.ctx.state, seq.ctx.sigma) }
}

/// Upper bidiagonal `b` with `b_{nn} = phi_n/sqrt(beta_n)`,
/// `b_{n,n+1} = phi_n sqrt(beta_{n+1})`, so that `b b^T = A - sigma E`.
pub fn b_factor(seq: &CoeffSequence, phi: &PhiSequence, n: usize) -> Result<TruncatedOperator> {
    check_beta(seq, phi, n)?;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = phi.values[i] / seq.beta[i].sqrt();
        if i + 1 < n {
            m[(i, i + 1)] = phi.values[i] * seq.beta[i + 1].sqrt();
        }
    }
    Ok(op(seq, m, OperatorKind::BFactor, true))
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `B_{nm} = (-1)^{n+m} / (phi_m sqrt(beta_n)) prod_{i=n}^{m} beta_i`, `m >= n`.
pub fn b_inverse(seq: &CoeffSequence, phi: &PhiSequence, n: usize) -> Result<TruncatedOperator> {
    check_beta(seq, phi, n)?;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let mut prod = Complex64::new(1.0, 0.0);
        let root = seq.beta[i].sqrt();
        for j in i..n {
            prod *= seq.beta[j];
            m[(i, j)] = prod * sign(i + j) / (phi.values[j] * root);
        }
    }
    Ok(op(seq, m, OperatorKind::BInverse, true))
}

/// The same inverse with the products telescoped to `Q_m / Q_{n-1}`.
pub fn b_inverse_telescoped(seq: &CoeffSequence, phi: &PhiSequence, n: usize) -> Result<TruncatedOperator> {
    check_beta(seq, phi, n)?;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let root = seq.beta[i].sqrt();
        for j in i..n {
            m[(i, j)] = seq.q_ratio(j as isize, i as isize - 1) * sign(i + j) / (phi.values[j] * root);
        }
    }
    Ok(op(seq, m, OperatorKind::BInverse, true))
}

/// `(A - sigma E)^{-1}_{nm}` in closed form: for `n >= m`,
/// `(-1)^{n+m}/(phi_n phi_m) prod_{k=m}^{n} beta_k S_m` with
/// `S_0 = 1`, `S_m = 1 + beta_{m-1} beta_m S_{m-1}`.
pub fn resolvent_closed(n: usize, m: usize, seq: &CoeffSequence, phi: &PhiSequence) -> Result<Complex64> {
    let (hi, lo) = if n >= m { (n, m) } else { (m, n) };
    check_beta(seq, phi, hi + 1)?;
    let mut s = Complex64::new(1.0, 0.0);
    for k in 1..=lo {
        s = s * seq.beta[k - 1] * seq.beta[k] + 1.0;
    }
    let prod: Complex64 = (lo..=hi).map(|k| seq.beta[k]).product();
    Ok(prod * s * sign(hi + lo) / (phi.values[hi] * phi.values[lo]))
}

pub fn resolvent_matrix(seq: &CoeffSequence, phi: &PhiSequence, n: usize) -> Result<TruncatedOperator> {
    check_beta(seq, phi, n)?;
    let mut s = vec![Complex64::new(1.0, 0.0); n];
    for k in 1..n {
        s[k] = s[k - 1] * seq.beta[k - 1] * seq.beta[k] + 1.0;
    }
    let mut m = CMatrix::zeros(n, n);
    for lo in 0..n {
        let mut prod = Complex64::new(1.0, 0.0);
        for hi in lo..n {
            prod *= seq.beta[hi];
            let v = prod * s[lo] * sign(hi + lo) / (phi.values[hi] * phi.values[lo]);
            m[(hi, lo)] = v;
            m[(lo, hi)] = v;
        }
    }
    Ok(op(seq, m, OperatorKind::Resolvent, true))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GSequence {
    pub values: Vec<Complex64>,
}

impl GSequence {
    /// `G_n = g_n / (1 - g_n)`.
    pub fn big_g(&self, n: usize) -> Complex64 {
        self.values[n] / (1.0 - self.values[n])
    }

    /// `(2 g_n - 1) / g_n`.
    pub fn u(&self, n: usize) -> Complex64 {
        (self.values[n] * 2.0 - 1.0) / self.values[n]
    }
}

fn degenerate(g: Complex64) -> bool {
    g.norm() < 1e-12 || (g - 1.0).norm() < 1e-12 || !(g.re.is_finite() && g.im.is_finite())
}

/// `g_0 = (phi_0^2 + sigma beta_0)/(2 phi_0^2 + sigma beta_0)` and
/// `(2g_{n+1}-1)/(1-g_{n+1}) phi_{n+1}^2/beta_{n+1} = (2g_n-1)/g_n beta_{n+1} phi_n^2 + sigma`.
pub fn g_sequence(seq: &CoeffSequence, phi: &PhiSequence, sigma: f64, n: usize) -> Result<GSequence> {
    check_beta(seq, phi, n)?;
    if n == 0 {
        return Ok(GSequence { values: Vec::new() });
    }
    let mut g = Vec::with_capacity(n);
    let g0 = (phi.squares[0] + seq.beta[0] * sigma) / (phi.squares[0] * 2.0 + seq.beta[0] * sigma);
    if degenerate(g0) {
        return Err(Error::DegenerateG { n: 0, value: format!("{g0}") });
    }
    g.push(g0);
    for k in 0..n - 1 {
        let u = (g[k] * 2.0 - 1.0) / g[k];
        let v = (u * seq.beta[k + 1] * phi.squares[k] + sigma) * seq.beta[k + 1] / phi.squares[k + 1];
        let next = (v + 1.0) / (v + 2.0);
        if degenerate(next) {
            return Err(Error::DegenerateG { n: k + 1, value: format!("{next}") });
        }
        g.push(next);
    }
    Ok(GSequence { values: g })
}

/// Normalised residual of the `g` recurrence at step `n -> n+1`.
pub fn g_recurrence_residual(n: usize, g: &GSequence, seq: &CoeffSequence, phi: &PhiSequence, sigma: f64) -> f64 {
    let lhs = (g.values[n + 1] * 2.0 - 1.0) / (1.0 - g.values[n + 1]) * phi.squares[n + 1] / seq.beta[n + 1];
    let mid = g.u(n) * seq.beta[n + 1] * phi.squares[n];
    let scale = lhs.norm().max(mid.norm()).max(sigma.abs());
    if scale == 0.0 {
        return 0.0;
    }
    (lhs - mid - sigma).norm() / scale
}

/// `C_{nm} = (-1)^{n+m} (phi_n/phi_m) ((2g_n-1)/g_n) prod_{k=n+1}^{m} beta_k`
/// for `m > n`, unit diagonal, zero below.
pub fn c_matrix(g: &GSequence, seq: &CoeffSequence, phi: &PhiSequence, n: usize) -> Result<TruncatedOperator> {
    check_beta(seq, phi, n)?;
    if g.values.len() < n {
        return Err(Error::IndexError("g sequence shorter than truncation".into()));
    }
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(1.0, 0.0);
        let u = g.u(i);
        let mut prod = Complex64::new(1.0, 0.0);
        for j in i + 1..n {
            prod *= seq.beta[j];
            m[(i, j)] = prod * u * phi.values[i] / phi.values[j] * sign(i + j);
        }
    }
    Ok(op(seq, m, OperatorKind::CMatrix, true))
}

/// Upper bidiagonal `s`: `s_{nn} = phi_n/sqrt(beta_n)`,
/// `s_{n,n+1} = ((1-g_n)/g_n) phi_n sqrt(beta_{n+1})`.
pub fn s_factor(g: &GSequence, seq: &CoeffSequence, phi: &PhiSequence, n: usize) -> Result<CMatrix> {
    check_beta(seq, phi, n)?;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = phi.values[i] / seq.beta[i].sqrt();
        if i + 1 < n {
            m[(i, i + 1)] = (1.0 - g.values[i]) / g.values[i] * phi.values[i] * seq.beta[i + 1].sqrt();
        }
    }
    Ok(m)
}

/// `diag(g_n/(1-g_n))`.
pub fn g_matrix(g: &GSequence, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| if i == j { g.big_g(i) } else { c0() })
}

/// Explicit tridiagonal `S = b^T b + sigma E`:
/// diagonal `sigma + phi_n^2/beta_n + beta_n phi_{n-1}^2`,
/// off-diagonal `phi_n^2 sqrt(beta_{n+1}/beta_n)`.
pub fn s_matrix(seq: &CoeffSequence, phi: &PhiSequence, sigma: f64, n: usize) -> Result<TruncatedOperator> {
    check_beta(seq, phi, n)?;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let mut d = phi.squares[i] / seq.beta[i] + sigma;
        if i > 0 {
            d += seq.beta[i] * phi.squares[i - 1];
        }
        m[(i, i)] = d;
        if i + 1 < n {
            let off = phi.squares[i] * seq.beta[i + 1].sqrt() / seq.beta[i].sqrt();
            m[(i, i + 1)] = off;
            m[(i + 1, i)] = off;
        }
    }
    Ok(op(seq, m, OperatorKind::SMatrix, false))
}

fn interior_max(m: &CMatrix, k: usize) -> f64 {
    crate::oracle::linalg::max_abs_block(m, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SDecomposition {
    /// `|B A - S B|` on the interior block, relative to `|B A|`.
    pub commutation: f64,
    /// `|S - s^T G s|` on the interior block, relative to `|S|`.
    pub factorisation: f64,
}

impl SDecomposition {
    pub fn max(&self) -> f64 {
        self.commutation.max(self.factorisation)
    }
}

/// Both residuals of `B A = S B` and `S = s^T G s` over the leading
/// `n - guard` block.
pub fn s_decomposition_check(
    g: &GSequence,
    seq: &CoeffSequence,
    phi: &PhiSequence,
    sigma: f64,
    n: usize,
    guard: usize,
) -> Result<SDecomposition> {
    let state = seq.ctx.state;
    let a = a_matrix(seq.ctx.l, &state, n)?;
    let b_inv = b_inverse(seq, phi, n)?;
    let s = s_matrix(seq, phi, sigma, n)?;
    let k = n.saturating_sub(guard);
    let ba = &b_inv.entries * &a.entries;
    let sb = &s.entries * &b_inv.entries;
    let commutation = interior_max(&(&ba - &sb), k) / interior_max(&ba, k).max(f64::MIN_POSITIVE);
    let sf = s_factor(g, seq, phi, n)?;
    let sgs = sf.transpose() * g_matrix(g, n) * &sf;
    let factorisation = interior_max(&(&s.entries - &sgs), k) / interior_max(&s.entries, k).max(f64::MIN_POSITIVE);
    Ok(SDecomposition { commutation, factorisation })
}

/// Whether a state sits on the special point `y = -1` where `A` is diagonal.
pub fn is_special_point(state: &DimensionlessState) -> bool {
    matches!(state.branch, Branch::NegativeReal { t } if t == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{beta_seq, CoeffContext};
    use crate::oracle::linalg::{asymmetry, lu_inverse, max_abs};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn st(y: Complex64, rho: f64) -> DimensionlessState {
        DimensionlessState::from_reduced(y, rho).unwrap()
    }

    fn chain(l: usize, y: Complex64, rho: f64, sigma: f64, n: usize) -> (CoeffSequence, PhiSequence) {
        let s = st(y, rho);
        let seq = beta_seq(n + 1, &CoeffContext::new(l, s, sigma).unwrap()).unwrap();
        let phi = phi_sequence(l, &s, n + 2);
        (seq, phi)
    }

    #[test]
    fn phi_examples() {
        let s = st(c(3.0, 0.0), 1.0);
        let p = phi(0, 0, &s);
        assert!((p - c(0.0, 1.0)).norm() < 1e-15);
        assert!((phi(0, 1, &s) - c(0.0, (2.0f64 * 0.75).sqrt())).norm() < 1e-14);
        let s = st(c(0.4, 0.3), 2.0);
        let seq = phi_sequence(3, &s, 10);
        for n in 0..10 {
            assert!((seq.values[n] * seq.values[n] - seq.squares[n]).norm() < 1e-13 * seq.squares[n].norm());
        }
        let s = st(c(2.0, 0.0), 1.5);
        assert!(phi_sequence(2, &s, 5).squares.iter().all(|v| v.re < 0.0 && v.im.abs() < 1e-15));
    }

    #[test]
    fn duplication_identity() {
        use std::f64::consts::PI;
        for n in 0..30usize {
            for z in [0.25, 0.5, 1.0, 3.5, 7.0] {
                let nf = n as f64;
                let lhs = ln_gamma_pos(nf / 2.0 + z) + ln_gamma_pos((nf + 1.0) / 2.0 + z);
                let rhs = (-2.0 * z - nf + 1.0) * 2f64.ln() + 0.5 * PI.ln() + ln_gamma_pos(nf + 2.0 * z);
                assert!((lhs.exp() - rhs.exp()).abs() < 1e-12 * rhs.exp());
            }
        }
    }

    #[test]
    fn a_matrix_shape() {
        let a = a_matrix(0, &st(c(3.0, 0.0), 1.0), 1).unwrap();
        assert_eq!(a.entries[(0, 0)], c(1.0, 0.0));
        let a = a_matrix(2, &st(c(0.3, 1.2), 0.7), 12).unwrap();
        assert_eq!(asymmetry(&a.entries), 0.0);
        let d = a_matrix(1, &st(c(-1.0, 0.0), 1.0), 8).unwrap();
        for i in 0..7 {
            assert_eq!(d.entries[(i, i + 1)], c0());
        }
    }

    #[test]
    fn shift_flag_prevents_double_shift() {
        let a = a_matrix(0, &st(c(2.0, 0.0), 1.0), 4).unwrap();
        let s = a.shift(-1.0).unwrap();
        assert!(s.shifted);
        assert!(s.shift(-1.0).is_err());
        assert_eq!(s.unshift().unwrap().entries, a.entries);
    }

    #[test]
    fn quadrature_reproduces_tridiagonal_a() {
        let s = st(c(2.5, 0.7), 1.3);
        let a = a_matrix(1, &s, 11).unwrap();
        let q = a_matrix_quadrature(1, &s, 11, 200).unwrap();
        let diff = max_abs(&(&q.matrix - &a.entries));
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn special_point_inverse_is_reciprocal_diagonal() {
        let s = st(c(-1.0, 0.0), 1.0);
        let inv = a_inverse_quadrature_matrix(0, &s, 6, 200).unwrap();
        let a = a_matrix(0, &s, 6).unwrap();
        for i in 0..6 {
            let want = 1.0 / a.entries[(i, i)];
            assert!((inv.matrix[(i, i)] - want).norm() < 1e-8 * want.norm());
            assert!(inv.matrix[(i, i)].re < 0.0);
        }
    }

    #[test]
    fn factorisation_reproduces_shifted_a() {
        let (seq, phi) = chain(0, c(2.0, 0.0), 1.0, -1.0, 40);
        let b = b_factor(&seq, &phi, 40).unwrap();
        let shifted = a_matrix(0, &seq.ctx.state, 40).unwrap().shift(-1.0).unwrap();
        let bbt = &b.entries * b.entries.transpose();
        let res = crate::oracle::linalg::max_abs_block(&(&bbt - &shifted.entries), 39);
        assert!(res < 1e-10 * max_abs(&shifted.entries), "{res}");
        // the smallest case defines beta_0
        let (seq, phi) = chain(1, c(0.5, 0.5), 1.0, 1.0, 1);
        let b1 = b_factor(&seq, &phi, 1).unwrap();
        assert!((b1.entries[(0, 0)] * b1.entries[(0, 0)] - phi.squares[0] / seq.beta[0]).norm() < 1e-14);
    }

    #[test]
    fn bidiagonal_inverse_is_exact() {
        let (seq, phi) = chain(1, c(-2.0, 1.0), 0.8, 1.0, 30);
        let b = b_factor(&seq, &phi, 30).unwrap();
        let bi = b_inverse(&seq, &phi, 30).unwrap();
        let id = &bi.entries * &b.entries;
        assert!(max_abs(&(id - CMatrix::identity(30, 30))) < 1e-12);
        for i in 0..30 {
            assert!((bi.entries[(i, i)] * b.entries[(i, i)] - 1.0).norm() < 1e-14);
        }
        let bt = b_inverse_telescoped(&seq, &phi, 30).unwrap();
        for i in 0..30 {
            for j in i..30 {
                let d = bi.entries[(i, j)];
                assert!((bt.entries[(i, j)] - d).norm() <= 1e-12 * d.norm());
            }
        }
    }

    #[test]
    fn closed_resolvent_matches_dense_inverse() {
        for (y, sigma) in [(c(-4.0, 0.0), 1.0), (c(-2.0, 1.0), -1.0), (c(-3.0, 0.0), -1.0)] {
            let (seq, phi) = chain(0, y, 1.0, sigma, 60);
            let r = resolvent_matrix(&seq, &phi, 60).unwrap();
            assert!(asymmetry(&r.entries) < 1e-12 * max_abs(&r.entries));
            let shifted = a_matrix(0, &seq.ctx.state, 60).unwrap().shift(sigma).unwrap();
            let dense = lu_inverse(&shifted.entries).unwrap().inverse;
            let diff = crate::oracle::linalg::max_abs_block(&(&dense - &r.entries), 41);
            assert!(diff < 1e-7 * max_abs(&dense), "y={y}: {diff}");
            assert_relative_eq!(resolvent_closed(3, 7, &seq, &phi).unwrap().re, r.entries[(3, 7)].re, max_relative = 1e-14);
        }
    }

    #[test]
    fn g_sequence_properties() {
        let (seq, phi) = chain(0, c(2.0, 0.5), 1.0, 0.0, 20);
        let g = g_sequence(&seq, &phi, 0.0, 20).unwrap();
        assert!(g.values.iter().all(|v| *v == c(0.5, 0.0)));
        let c_m = c_matrix(&g, &seq, &phi, 20).unwrap();
        assert_eq!(c_m.entries, CMatrix::identity(20, 20));
        let (seq, phi) = chain(1, c(2.0, 1.0), 1.0, -1.0, 41);
        let g = g_sequence(&seq, &phi, -1.0, 41).unwrap();
        for n in 0..40 {
            assert!(g_recurrence_residual(n, &g, &seq, &phi, -1.0) < 1e-10);
        }
    }

    #[test]
    fn g0_example() {
        let mut seq = chain(0, c(2.0, 0.0), 1.0, 1.0, 2).0;
        seq.beta[0] = c(0.5, 0.0);
        let phi = PhiSequence { l: 0, values: vec![c(0.0, 1.0); 3], squares: vec![c(-1.0, 0.0); 3] };
        let g = g_sequence(&seq, &phi, 1.0, 1).unwrap();
        assert!((g.values[0] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn c_equals_s_times_b() {
        let (seq, phi) = chain(0, c(2.0, 1.0), 1.0, -1.0, 30);
        let g = g_sequence(&seq, &phi, -1.0, 30).unwrap();
        let cm = c_matrix(&g, &seq, &phi, 30).unwrap();
        let sb = s_factor(&g, &seq, &phi, 30).unwrap() * b_inverse(&seq, &phi, 30).unwrap().entries;
        assert!(max_abs(&(&cm.entries - &sb)) < 1e-11 * max_abs(&cm.entries));
    }

    #[test]
    fn s_decomposition() {
        let (seq, phi) = chain(0, c(2.0, 1.0), 1.0, -1.0, 40);
        let g = g_sequence(&seq, &phi, -1.0, 40).unwrap();
        let r = s_decomposition_check(&g, &seq, &phi, -1.0, 40, 1).unwrap();
        assert!(r.max() < 1e-9, "{r:?}");
        let s = s_matrix(&seq, &phi, -1.0, 40).unwrap();
        assert!(asymmetry(&s.entries) == 0.0);
    }
}
