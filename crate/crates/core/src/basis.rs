//! Momentum-space basis `H_{n,l,m}(k) = eta_{n,l}(|k|) Y_{l,m}(k/|k|)` and the
//! separable expansion of the Coulomb potential in it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::quadrature::{gauss_legendre, HalfLineRule, QuadratureRule};
use crate::oracle::series::{accelerate_terms, CompensatedSum};
use crate::params::PhysicalSystem;
use crate::specfun::{gegenbauer_sequence, hyp2f1_real, ln_gamma_pos};

/// Basis labels `(n, l, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SpectralIndex {
    pub n: usize,
    pub l: usize,
    pub m: i64,
}

impl SpectralIndex {
    pub fn new(n: usize, l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::IndexError(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        Ok(Self { n, l, m })
    }

    /// Every index with `n <= n_max`, `l <= l_max`, in `(l, m, n)` order.
    pub fn enumerate(n_max: usize, l_max: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for l in 0..=l_max {
            for m in -(l as i64)..=(l as i64) {
                for n in 0..=n_max {
                    out.push(Self { n, l, m });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumVector {
    pub k: [f64; 3],
}

impl MomentumVector {
    pub fn new(kx: f64, ky: f64, kz: f64) -> Self {
        Self { k: [kx, ky, kz] }
    }

    pub fn from_spherical(magnitude: f64, theta: f64, phi: f64) -> Self {
        let s = theta.sin();
        Self::new(magnitude * s * phi.cos(), magnitude * s * phi.sin(), magnitude * theta.cos())
    }

    pub fn magnitude(&self) -> f64 {
        self.k[0].hypot(self.k[1]).hypot(self.k[2])
    }

    /// Polar and azimuthal angles; `None` at the origin.
    pub fn direction(&self) -> Option<(f64, f64)> {
        let r = self.magnitude();
        if r == 0.0 {
            return None;
        }
        let theta = (self.k[2] / r).clamp(-1.0, 1.0).acos();
        let phi = self.k[1].atan2(self.k[0]);
        Some((theta, phi))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.k.iter().zip(&other.k).map(|(a, b)| a * b).sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.k[0] - other.k[0], self.k[1] - other.k[1], self.k[2] - other.k[2])
    }

    /// Applies the row-major 3x3 matrix `r`.
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Self {
        let v = |i: usize| r[i][0] * self.k[0] + r[i][1] * self.k[1] + r[i][2] * self.k[2];
        Self::new(v(0), v(1), v(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisWeight {
    pub upsilon: f64,
}

impl BasisWeight {
    pub fn new(n: usize, l: usize) -> Self {
        Self { upsilon: upsilon(n, l) }
    }
}

/// `1/(n + l + 1)`.
pub fn upsilon(n: usize, l: usize) -> f64 {
    1.0 / (n + l + 1) as f64
}

/// `ln` of `4^{l+1} l! sqrt(n! (n+l+1) / (pi (n+2l+1)!))`.
fn ln_eta_norm(n: usize, l: usize) -> f64 {
    let (nf, lf) = (n as f64, l as f64);
    (lf + 1.0) * 4f64.ln() + ln_gamma_pos(lf + 1.0)
        + 0.5 * (ln_gamma_pos(nf + 1.0) + (nf + lf + 1.0).ln() - PI.ln() - ln_gamma_pos(nf + 2.0 * lf + 2.0))
}

fn ln_envelope(l: usize, k: f64) -> f64 {
    let lf = l as f64;
    lf * k.ln() - (lf + 1.5) * (k * k).ln_1p()
}

/// Radial basis function `eta_{n,l}(k)` in its Gegenbauer form.
pub fn eta(n: usize, l: usize, k: f64) -> f64 {
    eta_sequence(n, l, k)[n]
}

/// `eta_{0,l}(k), ..., eta_{n_max,l}(k)` from one Gegenbauer recurrence.
pub fn eta_sequence(n_max: usize, l: usize, k: f64) -> Vec<f64> {
    let k = k.abs();
    if k == 0.0 && l > 0 {
        return vec![0.0; n_max + 1];
    }
    let u = (k * k - 1.0) / (k * k + 1.0);
    let c = gegenbauer_sequence(n_max, l as f64 + 1.0, u);
    let env = if k == 0.0 { 0.0 } else { ln_envelope(l, k) };
    c.iter().enumerate().map(|(n, &cn)| cn * (ln_eta_norm(n, l) + env).exp()).collect()
}

/// `eta_{n,l}(k)` through the terminating hypergeometric form, summed in
/// extended precision. Used to cross-check [`eta`].
pub fn eta_hyp2f1(n: usize, l: usize, k: f64) -> Result<f64> {
    let k = k.abs();
    if k == 0.0 && l > 0 {
        return Ok(0.0);
    }
    let (nf, lf) = (n as f64, l as f64);
    let ln_pref = 2f64.ln() - ln_gamma_pos(lf + 1.5)
        + 0.5 * ((nf + lf + 1.0).ln() + ln_gamma_pos(nf + 2.0 * lf + 2.0) - ln_gamma_pos(nf + 1.0));
    let env = if k == 0.0 { 0.0 } else { ln_envelope(l, k) };
    // the terminating series obeys F(z) = (-1)^n F(1 - z) for these parameters;
    // summing at the smaller argument keeps the terms moderate
    let z = 1.0 / (1.0 + k * k);
    let (arg, sign) = if z > 0.5 { (k * k / (1.0 + k * k), if n.is_multiple_of(2) { 1.0 } else { -1.0 }) } else { (z, 1.0) };
    let f = hyp2f1_real(-nf, nf + 2.0 * lf + 2.0, lf + 1.5, arg, 1e-17)?;
    Ok(sign * (ln_pref + env).exp() * f.value)
}

/// Residual of the three-term relation
/// `u eta_n = a_n eta_{n+1} + a_{n-1} eta_{n-1}`, `u = (k^2-1)/(k^2+1)`,
/// normalised by the largest term.
pub fn eta_recurrence_residual(n: usize, l: usize, k: f64) -> f64 {
    let e = eta_sequence(n + 1, l, k);
    let u = (k * k - 1.0) / (k * k + 1.0);
    let lhs = u * e[n];
    let up = eta_recurrence_coefficient(n, l) * e[n + 1];
    let down = if n > 0 { eta_recurrence_coefficient(n - 1, l) * e[n - 1] } else { 0.0 };
    let scale = lhs.abs().max(up.abs()).max(down.abs());
    if scale == 0.0 {
        return 0.0;
    }
    (lhs - up - down).abs() / scale
}

/// `a_n = sqrt((n+1)(n+2l+2) / ((n+l+1)(n+l+2))) / 2`.
pub fn eta_recurrence_coefficient(n: usize, l: usize) -> f64 {
    let (nf, lf) = (n as f64, l as f64);
    0.5 * ((nf + 1.0) * (nf + 2.0 * lf + 2.0) / ((nf + lf + 1.0) * (nf + lf + 2.0))).sqrt()
}

/// Fully normalised associated Legendre values `N_l^m P_l^m(x)` for
/// `l = m..=l_max` (Condon-Shortley phase), `m >= 0`.
fn normalized_legendre(l_max: usize, m: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; l_max + 1];
    if m > l_max {
        return out;
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for i in 1..=m {
        let i = i as f64;
        pmm *= -s * ((2.0 * i + 1.0) / (2.0 * i)).sqrt();
    }
    out[m] = pmm;
    if m == l_max {
        return out;
    }
    let mf = m as f64;
    out[m + 1] = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for l in m + 2..=l_max {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let a_prev = ((4.0 * lp * lp - 1.0) / (lp * lp - mf * mf)).sqrt();
        out[l] = a * (x * out[l - 1] - out[l - 2] / a_prev);
    }
    out
}

/// Complex orthonormal spherical harmonic with the Condon-Shortley phase.
pub fn sph_harm(l: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return Err(Error::IndexError(format!("|m| = {am} exceeds l = {l}")));
    }
    if !(theta.is_finite() && phi.is_finite()) {
        return Err(Error::NonFinite("spherical angles"));
    }
    let p = normalized_legendre(l, am, theta.cos())[l];
    let y = Complex64::from_polar(p, am as f64 * phi);
    if m < 0 {
        let sign = if am.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(y.conj() * sign)
    } else {
        Ok(y)
    }
}

/// `H_{n,l,m}(k/gamma)`.
pub fn h_basis(idx: SpectralIndex, kvec: &MomentumVector, gamma: f64) -> Result<Complex64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    SpectralIndex::new(idx.n, idx.l, idx.m)?;
    match kvec.direction() {
        None => {
            if idx.l > 0 {
                Ok(Complex64::new(0.0, 0.0))
            } else {
                Ok(Complex64::new(eta(idx.n, 0, 0.0) / (4.0 * PI).sqrt(), 0.0))
            }
        }
        Some((theta, phi)) => Ok(sph_harm(idx.l, idx.m, theta, phi)? * eta(idx.n, idx.l, kvec.magnitude() / gamma)),
    }
}

/// `sigma alpha sqrt(2/pi) / |k - p|^2`.
pub fn potential_element(sys: &PhysicalSystem, kvec: &MomentumVector, pvec: &MomentumVector) -> Result<f64> {
    let q2 = kvec.sub(pvec).dot(&kvec.sub(pvec));
    if q2 == 0.0 {
        return Err(Error::ForwardSingularity);
    }
    Ok(sys.sigma.value() * sys.alpha * (2.0 / PI).sqrt() / q2)
}

/// Prefactor `sigma alpha / (2 gamma^4) (2 pi)^{3/2} sqrt(k^2+gamma^2) sqrt(p^2+gamma^2)`.
pub fn expansion_prefactor(sys: &PhysicalSystem, k: f64, p: f64) -> f64 {
    let g = sys.gamma;
    sys.sigma.value() * sys.alpha / (2.0 * g.powi(4)) * (2.0 * PI).powf(1.5) * (k * k + g * g).sqrt() * (p * p + g * g).sqrt()
}

/// How the radial sums of the potential expansion are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpansionSummation {
    /// Plain rectangular partial sum over `n <= n_max`, `l <= l_max`.
    Partial,
    /// For each `l` the sum over `n <= n_max` is passed through Wynn's
    /// epsilon algorithm before summing over `l`.
    ShellAccelerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionValue {
    pub value: f64,
    /// Spread of the acceleration estimates, zero for plain partial sums.
    pub remainder: f64,
}

pub(crate) fn legendre_p(l_max: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0; l_max + 1];
    if l_max >= 1 {
        p[1] = x;
    }
    for l in 2..=l_max {
        let lf = l as f64;
        p[l] = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
    }
    p
}

/// Radial terms `upsilon_{n,l} eta_{n,l}(k) eta_{n,l}(p)` for one `l`.
fn radial_terms(n_max: usize, l: usize, k: f64, p: f64) -> Vec<f64> {
    let ek = eta_sequence(n_max, l, k);
    let ep = eta_sequence(n_max, l, p);
    (0..=n_max).map(|n| upsilon(n, l) * ek[n] * ep[n]).collect()
}

/// Truncated separable expansion of the potential, summing the `m` index
/// explicitly with spherical harmonics.
pub fn potential_expansion(
    sys: &PhysicalSystem,
    kvec: &MomentumVector,
    pvec: &MomentumVector,
    n_max: usize,
    l_max: usize,
) -> Result<f64> {
    let g = sys.gamma;
    let mut total = CompensatedSum::new();
    for l in 0..=l_max {
        for m in -(l as i64)..=(l as i64) {
            for n in 0..=n_max {
                let idx = SpectralIndex { n, l, m };
                let hk = h_basis(idx, kvec, g)?;
                let hp = h_basis(idx, pvec, g)?;
                total.add(hk * hp.conj() * upsilon(n, l));
            }
        }
    }
    Ok(expansion_prefactor(sys, kvec.magnitude(), pvec.magnitude()) * total.value().re)
}

/// The same expansion with the `m` sum done by the addition theorem,
/// optionally accelerating each radial shell.
pub fn potential_expansion_shells(
    sys: &PhysicalSystem,
    kvec: &MomentumVector,
    pvec: &MomentumVector,
    n_max: usize,
    l_max: usize,
    summation: ExpansionSummation,
) -> Result<ExpansionValue> {
    let g = sys.gamma;
    let (k, p) = (kvec.magnitude(), pvec.magnitude());
    let cos = if k == 0.0 || p == 0.0 { 1.0 } else { (kvec.dot(pvec) / (k * p)).clamp(-1.0, 1.0) };
    let pl = legendre_p(l_max, cos);
    let mut total = CompensatedSum::new();
    let mut remainder = 0.0;
    for l in 0..=l_max {
        let terms = radial_terms(n_max, l, k / g, p / g);
        let (radial, rem) = match summation {
            ExpansionSummation::Partial => {
                let mut s = CompensatedSum::new();
                for t in &terms {
                    s.add(Complex64::new(*t, 0.0));
                }
                (s.value().re, 0.0)
            }
            ExpansionSummation::ShellAccelerated => {
                let cterms: Vec<Complex64> = terms.iter().map(|&t| Complex64::new(t, 0.0)).collect();
                let (v, e) = accelerate_terms(&cterms, n_max + 1);
                (v.re, e)
            }
        };
        let ang = (2.0 * l as f64 + 1.0) / (4.0 * PI) * pl[l];
        total.add(Complex64::new(ang * radial, 0.0));
        remainder += (ang * rem).abs();
    }
    let pref = expansion_prefactor(sys, k, p);
    Ok(ExpansionValue { value: pref * total.value().re, remainder: pref.abs() * remainder })
}

/// Inner products of all basis functions with `n <= n_max`, `l <= l_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthonormalityReport {
    pub gamma: f64,
    pub indices: Vec<SpectralIndex>,
    /// `<H_i|H_j> / gamma^3 - delta_ij`, row-major over `indices`.
    pub defects: Vec<Complex64>,
    pub max_defect: f64,
    /// Largest relative deviation of a diagonal product from `gamma^3`.
    pub max_diagonal_error: f64,
}

/// Numerical `int d^3k H*_{n,l,m}(k/gamma) H_{n',l',m'}(k/gamma)`.
///
/// The radial factor is a Gauss-Legendre rule in `k` itself (so `gamma`
/// genuinely enters through the integrand), the angular factor a product
/// Gauss rule in `cos(theta)` times the trapezoid rule in `phi`.
pub fn orthonormality_report(n_max: usize, l_max: usize, gamma: f64, radial_points: usize) -> Result<OrthonormalityReport> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let rule = HalfLineRule::new(QuadratureRule::GaussLegendreMapped, radial_points)?;
    // radial[(l1, n1), (l2, n2)]
    let nl = (n_max + 1) * (l_max + 1);
    let mut etas = vec![vec![0.0; rule.len()]; nl];
    for (q, &k) in rule.nodes.iter().enumerate() {
        for l in 0..=l_max {
            let e = eta_sequence(n_max, l, k / gamma);
            for n in 0..=n_max {
                etas[l * (n_max + 1) + n][q] = e[n];
            }
        }
    }
    let mut radial = vec![0.0; nl * nl];
    for a in 0..nl {
        for b in a..nl {
            let mut s = CompensatedSum::new();
            for (q, (&k, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                s.add(Complex64::new(w * k * k * etas[a][q] * etas[b][q], 0.0));
            }
            radial[a * nl + b] = s.value().re;
            radial[b * nl + a] = s.value().re;
        }
    }
    // angular products on a rule exact for degree 2 l_max
    let n_theta = l_max + 2;
    let n_phi = 2 * l_max + 3;
    let (ct, wt) = gauss_legendre(n_theta);
    let lm: Vec<(usize, i64)> = (0..=l_max).flat_map(|l| (-(l as i64)..=(l as i64)).map(move |m| (l, m))).collect();
    let mut ylm = vec![Vec::with_capacity(n_theta * n_phi); lm.len()];
    let mut wq = Vec::with_capacity(n_theta * n_phi);
    for (&c, &w) in ct.iter().zip(&wt) {
        let theta = c.clamp(-1.0, 1.0).acos();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            wq.push(w * 2.0 * PI / n_phi as f64);
            for (i, &(l, m)) in lm.iter().enumerate() {
                ylm[i].push(sph_harm(l, m, theta, phi)?);
            }
        }
    }
    let mut angular = vec![Complex64::new(0.0, 0.0); lm.len() * lm.len()];
    for a in 0..lm.len() {
        for b in 0..lm.len() {
            let mut s = CompensatedSum::new();
            for q in 0..wq.len() {
                s.add(ylm[a][q].conj() * ylm[b][q] * wq[q]);
            }
            angular[a * lm.len() + b] = s.value();
        }
    }
    let indices = SpectralIndex::enumerate(n_max, l_max);
    let lm_pos = |l: usize, m: i64| lm.iter().position(|&(a, b)| a == l && b == m).unwrap_or(0);
    let g3 = gamma.powi(3);
    let mut defects = Vec::with_capacity(indices.len() * indices.len());
    let mut max_defect: f64 = 0.0;
    let mut max_diag: f64 = 0.0;
    for i in &indices {
        for j in &indices {
            let r = radial[(i.l * (n_max + 1) + i.n) * nl + j.l * (n_max + 1) + j.n];
            let a = angular[lm_pos(i.l, i.m) * lm.len() + lm_pos(j.l, j.m)];
            let ip = a * r;
            let delta = if i == j { 1.0 } else { 0.0 };
            let d = ip / g3 - delta;
            max_defect = max_defect.max(d.norm());
            if i == j {
                max_diag = max_diag.max((ip - g3).norm() / g3);
            }
            defects.push(d);
        }
    }
    Ok(OrthonormalityReport { gamma, indices, defects, max_defect, max_diagonal_error: max_diag })
}
