//! Assembly of `tau`, the separable form factors and full T-matrix
//! elements, plus the bound-state pole scan of the diagonal special case.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{eta_sequence, legendre_p, potential_element, sph_harm, upsilon, MomentumVector, SpectralIndex};
use crate::coeffs::{beta_seq, CoeffContext, CoeffSequence};
use crate::error::{Error, Result};
use crate::opmatrix::{a_matrix, c_matrix, g_sequence, is_special_point, phi_sequence, GSequence, OperatorMeta, PhiSequence};
use crate::oracle::linalg::{lu_inverse, CMatrix};
use crate::oracle::series::{accelerate_terms, CompensatedSum};
use crate::params::{hydrogen_level, to_dimensionless, DimensionlessState, PhysicalSystem};

/// Conditions of `A - sigma E` above this are treated as singular.
pub const MAX_SHIFT_CONDITION: f64 = 1e13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TauRoute {
    /// Dense LU of the truncated `A - sigma E`, then multiplied by `A`.
    DirectSolve,
    /// `sigma C^T G C` from the `beta`, `g` chain.
    FactorizedCgc,
    /// `y = -1`, where `A` is diagonal.
    DiagonalSpecial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauResult {
    pub l: usize,
    pub tau: CMatrix,
    pub route: TauRoute,
    pub meta: OperatorMeta,
    /// 1-norm condition of `A - sigma E` when the route forms its inverse.
    pub condition: Option<f64>,
}

impl TauResult {
    pub fn size(&self) -> usize {
        self.tau.nrows()
    }
}

/// `sigma / (1 + sigma sqrt(E_{n,l}/E))` at `z = -E` with `gamma^2 = 2 mu E / hbar^2`.
pub fn tau_diagonal_special(n: usize, l: usize, energy: f64, sigma: f64, binding_energy: f64) -> Result<f64> {
    if !(energy.is_finite() && energy > 0.0) {
        return Err(Error::InvalidParameter(format!("energy must be positive, got {energy}")));
    }
    if !(binding_energy.is_finite() && binding_energy > 0.0) {
        return Err(Error::InvalidParameter(format!("binding energy must be positive, got {binding_energy}")));
    }
    let level = hydrogen_level(n, l, binding_energy);
    if sigma < 0.0 && (energy - level).abs() <= 1e-12 * level {
        return Err(Error::AtPole { energy, pole: level });
    }
    Ok(sigma / (1.0 + sigma * (level / energy).sqrt()))
}

/// Bound-state position in `y` nearest to `state.y`: `-rho^2/(n+l+1)^2`.
pub fn nearest_pole_y(l: usize, state: &DimensionlessState) -> f64 {
    let target = state.y.re;
    (0..400)
        .map(|n| -(state.rho / (n + l + 1) as f64).powi(2))
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(0.0)
}

fn meta(state: &DimensionlessState, sigma: f64) -> OperatorMeta {
    OperatorMeta { y: state.y, rho: state.rho, sigma, gamma: None }
}

/// `(A - sigma E)^{-1}` by dense LU with its condition.
fn shifted_inverse(l: usize, state: &DimensionlessState, sigma: f64, n: usize) -> Result<(CMatrix, CMatrix, f64)> {
    let a = a_matrix(l, state, n)?;
    let shifted = a.shift(sigma)?;
    let singular = |condition: f64| Error::SingularShift { condition, nearest_pole: nearest_pole_y(l, state) };
    let inv = lu_inverse(&shifted.entries).map_err(|e| match e {
        Error::IllConditioned { condition } => singular(condition),
        other => other,
    })?;
    if inv.condition > MAX_SHIFT_CONDITION {
        return Err(singular(inv.condition));
    }
    Ok((a.entries, inv.inverse, inv.condition))
}

/// The `beta`, `phi`, `g` chain of one `(l, y, rho, sigma)` point.
#[derive(Debug, Clone)]
pub struct Chain {
    pub seq: CoeffSequence,
    pub phi: PhiSequence,
    pub g: GSequence,
}

pub fn build_chain(l: usize, state: &DimensionlessState, sigma: f64, n: usize) -> Result<Chain> {
    let seq = beta_seq(n + 1, &CoeffContext::new(l, *state, sigma)?)?;
    let phi = phi_sequence(l, state, n + 2);
    let g = g_sequence(&seq, &phi, sigma, n + 1)?;
    Ok(Chain { seq, phi, g })
}

pub fn tau_matrix(l: usize, state: &DimensionlessState, sigma: f64, n: usize, route: TauRoute) -> Result<TauResult> {
    let s = Complex64::new(sigma, 0.0);
    let (tau, condition) = match route {
        TauRoute::DirectSolve => {
            let (a, inv, cond) = shifted_inverse(l, state, sigma, n)?;
            (inv * a * s, Some(cond))
        }
        TauRoute::FactorizedCgc => {
            if sigma == 0.0 {
                (CMatrix::zeros(n, n), None)
            } else {
                let ch = build_chain(l, state, sigma, n)?;
                let c = c_matrix(&ch.g, &ch.seq, &ch.phi, n)?.entries;
                let gd = CMatrix::from_fn(n, n, |i, j| if i == j { ch.g.big_g(i) } else { Complex64::new(0.0, 0.0) });
                (c.transpose() * gd * c * s, None)
            }
        }
        TauRoute::DiagonalSpecial => {
            if !is_special_point(state) {
                return Err(Error::BranchMismatch(format!("diagonal route needs y = -1, got y = {}", state.y)));
            }
            let mut t = CMatrix::zeros(n, n);
            for i in 0..n {
                let a = -((i + l + 1) as f64) / state.rho;
                if (a - sigma).abs() <= 1e-12 * a.abs() {
                    return Err(Error::SingularShift { condition: f64::INFINITY, nearest_pole: -1.0 });
                }
                t[(i, i)] = Complex64::new(sigma * a / (a - sigma), 0.0);
            }
            (t, None)
        }
    };
    Ok(TauResult { l, tau, route, meta: meta(state, sigma), condition })
}

/// `tau - sigma E = sigma^2 (A - sigma E)^{-1}`, the part of `tau` beyond
/// the potential itself.
pub fn tau_beyond_born(l: usize, state: &DimensionlessState, sigma: f64, n: usize) -> Result<CMatrix> {
    let (_, inv, _) = shifted_inverse(l, state, sigma, n)?;
    Ok(inv * Complex64::new(sigma * sigma, 0.0))
}

fn ylm(l: usize, m: i64, k: &MomentumVector) -> Result<Complex64> {
    match k.direction() {
        Some((theta, phi)) => sph_harm(l, m, theta, phi),
        None if l == 0 => Ok(Complex64::new(1.0 / (4.0 * PI).sqrt(), 0.0)),
        None => Ok(Complex64::new(0.0, 0.0)),
    }
}

/// `sqrt(upsilon_n) eta_{n,l}(k/gamma)` for `n < len`.
fn weighted_radial(len: usize, l: usize, k: f64, gamma: f64) -> Vec<f64> {
    let e = eta_sequence(len.saturating_sub(1), l, k / gamma);
    (0..len).map(|n| upsilon(n, l).sqrt() * e[n]).collect()
}

fn form_prefactor(sys: &PhysicalSystem, k: f64) -> f64 {
    let g = sys.gamma;
    (sys.alpha / 2.0).sqrt() * (k * k + g * g).sqrt() / (g * g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormFactorRoute {
    /// Row `n` of the truncated `C` matrix.
    CMatrix,
    /// Telescoped through `Q_{n1}/Q_n`.
    Telescoped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormFactor {
    pub idx: SpectralIndex,
    pub z: Complex64,
    pub k: MomentumVector,
    pub value: Complex64,
    /// Estimated size of the neglected `n1 >= N` terms.
    pub remainder: f64,
    pub terms: usize,
    pub route: FormFactorRoute,
}

/// `Phi_{n,l,m}(k, z) = sqrt(alpha/2) sqrt(k^2+gamma^2)/gamma^2
///   sum_{n1} C_{n,n1} sqrt(upsilon_{n1}) H_{n1,l,m}(k/gamma)` over `n1 < N`.
///
/// `tol`, when given, turns a remainder above `tol |value|` into
/// `SlowConvergence`.
pub fn phi_form_factor(
    idx: SpectralIndex,
    kvec: &MomentumVector,
    sys: &PhysicalSystem,
    z: Complex64,
    n_trunc: usize,
    route: FormFactorRoute,
    tol: Option<f64>,
) -> Result<FormFactor> {
    SpectralIndex::new(idx.n, idx.l, idx.m)?;
    if n_trunc <= idx.n + 2 {
        return Err(Error::InvalidParameter(format!("truncation {n_trunc} too small for n = {}", idx.n)));
    }
    let state = to_dimensionless(sys, z)?;
    let sigma = sys.sigma.value();
    let (n, l) = (idx.n, idx.l);
    let pref = ylm(l, idx.m, kvec)? * form_prefactor(sys, kvec.magnitude());
    let w = weighted_radial(n_trunc, l, kvec.magnitude(), sys.gamma);
    let done = |value: Complex64, remainder: f64, terms: usize| FormFactor {
        idx,
        z,
        k: *kvec,
        value,
        remainder,
        terms,
        route,
    };
    if sigma == 0.0 || is_special_point(&state) {
        return Ok(done(pref * w[n], 0.0, 1));
    }
    let ch = build_chain(l, &state, sigma, n_trunc)?;
    let u = ch.g.u(n);
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    // magnitudes of the smooth coefficients C_{n,n1} sqrt(upsilon_{n1})
    let mut coeff = Vec::with_capacity(n_trunc - n);
    let mut sum = CompensatedSum::new();
    sum.add(Complex64::new(w[n], 0.0));
    match route {
        FormFactorRoute::CMatrix => {
            let mut prod = Complex64::new(1.0, 0.0);
            for n1 in n + 1..n_trunc {
                prod *= ch.seq.beta[n1];
                let c = prod * u * ch.phi.values[n] / ch.phi.values[n1] * sign(n + n1);
                coeff.push(c.norm() * upsilon(n1, l).sqrt());
                sum.add(c * w[n1]);
            }
        }
        FormFactorRoute::Telescoped => {
            let lead = ch.phi.values[n] * u * sign(n);
            let mut inner = CompensatedSum::new();
            for n1 in n + 1..n_trunc {
                let t = ch.seq.q_ratio(n1 as isize, n as isize) / ch.phi.values[n1] * sign(n1);
                coeff.push((t * lead).norm() * upsilon(n1, l).sqrt());
                inner.add(t * w[n1]);
            }
            sum.add(lead * inner.value());
        }
    }
    let value = pref * sum.value();
    let remainder = tail_remainder(&coeff, &w, l) * pref.norm();
    if let Some(tol) = tol {
        if remainder > tol * value.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::SlowConvergence { remainder });
        }
    }
    Ok(done(value, remainder, n_trunc - n))
}

/// Conservative size of the neglected tail from the last coefficient
/// magnitudes and their observed ratio.
fn tail_remainder(coeff: &[f64], w: &[f64], l: usize) -> f64 {
    let m = coeff.len();
    if m < 2 {
        return f64::INFINITY;
    }
    let last = coeff[m - 1];
    if last == 0.0 {
        return 0.0;
    }
    let window = 8.min(m - 1);
    let q = (coeff[m - 1] / coeff[m - 1 - window]).powf(1.0 / window as f64);
    // radial factors eta oscillate; bound them by the recent envelope
    let nw = w.len();
    let env = (nw.saturating_sub(10)..nw)
        .map(|i| (w[i] / upsilon(i, l).sqrt()).abs())
        .fold(0.0, f64::max);
    let tail = if q < 0.999 { q / (1.0 - q) } else { nw as f64 };
    2.0 * last * env * tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssemblyRoute {
    /// `sum sqrt(upsilon upsilon) tau H H*` with `tau` from the dense solve.
    Expansion,
    /// `sum G_n Phi_n Phi^hat_n` over the separable form factors.
    Separable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TOptions {
    /// Radial truncation `N` of the sums.
    pub n: usize,
    /// Extra rows carried by the dense solve so that its truncation corner
    /// stays outside the summed block.
    pub guard: usize,
    pub l_max: usize,
    /// Shells below `tol |T|` twice in a row end the `l` sum.
    pub tol: f64,
    pub accelerate: bool,
}

impl Default for TOptions {
    fn default() -> Self {
        Self { n: 40, guard: 16, l_max: 40, tol: 1e-10, accelerate: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellContribution {
    pub l: usize,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TElement {
    pub value: Complex64,
    /// Closed-form potential `<k2|V|k1>`.
    pub born: f64,
    /// Per-`l` contributions beyond the potential.
    pub shells: Vec<ShellContribution>,
    /// Size of the last shell when the `l` sum stopped plus the summed
    /// acceleration error estimates.
    pub remainder: f64,
    pub route: AssemblyRoute,
}

fn check_region(z: Complex64) -> Result<()> {
    if z.re < 0.0 || z.im > 0.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("T-matrix assembly needs Re z < 0 or Im z > 0, got z = {z}")))
    }
}

/// Full `<k2|T(z)|k1>` as the closed-form potential plus the expansion of
/// `tau - sigma E`, summed shell by shell in `l`.
///
/// Within a shell the radial sum is taken over growing leading blocks
/// `n1, n2 < M`, `M = 1..=N`; with `accelerate` the resulting partial sums
/// go through Wynn's epsilon algorithm.
pub fn t_element(
    sys: &PhysicalSystem,
    z: Complex64,
    k2: &MomentumVector,
    k1: &MomentumVector,
    opts: &TOptions,
    route: AssemblyRoute,
) -> Result<TElement> {
    check_region(z)?;
    let born = potential_element(sys, k2, k1)?;
    let state = to_dimensionless(sys, z)?;
    let sigma = sys.sigma.value();
    let g = sys.gamma;
    let (a2, a1) = (k2.magnitude(), k1.magnitude());
    let c_prime = sys.alpha / (2.0 * g.powi(4)) * (2.0 * PI).powf(1.5) * (a2 * a2 + g * g).sqrt() * (a1 * a1 + g * g).sqrt();
    let cos = if a1 == 0.0 || a2 == 0.0 { 1.0 } else { (k2.dot(k1) / (a1 * a2)).clamp(-1.0, 1.0) };
    let pl = legendre_p(opts.l_max, cos);
    let mut total = CompensatedSum::new();
    total.add(Complex64::new(born, 0.0));
    let mut shells = Vec::new();
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    let mut spread = 0.0;
    for l in 0..=opts.l_max {
        let w2 = weighted_radial(opts.n, l, a2, g);
        let w1 = weighted_radial(opts.n, l, a1, g);
        let (value, err) = if sigma == 0.0 {
            (Complex64::new(0.0, 0.0), 0.0)
        } else {
            let inc = match route {
                AssemblyRoute::Expansion => {
                    let d = tau_beyond_born(l, &state, sigma, opts.n + opts.guard)?;
                    let ang = c_prime * (2 * l + 1) as f64 / (4.0 * PI) * pl[l];
                    expansion_increments(&d, &w2, &w1, opts.n).into_iter().map(|t| t * ang).collect()
                }
                AssemblyRoute::Separable => separable_increments(sys, z, &state, l, k2, k1, &w2, &w1, c_prime, opts.n)?,
            };
            if opts.accelerate {
                accelerate_terms(&inc, opts.n)
            } else {
                let mut s = CompensatedSum::new();
                inc.iter().for_each(|t| s.add(*t));
                (s.value(), inc.last().map_or(0.0, |t| t.norm()))
            }
        };
        shells.push(ShellContribution { l, value });
        total.add(value);
        spread += err;
        let scale = total.value().norm().max(f64::MIN_POSITIVE);
        last = value.norm();
        if last < opts.tol * scale {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let value = total.value();
    if quiet < 2 {
        return Err(Error::SlowConvergence { remainder: last });
    }
    Ok(TElement { value, born, shells, remainder: last + spread, route })
}

/// `S_M - S_{M-1}` for `S_M = sum_{i,j<M} d_ij w2_i w1_j`.
fn expansion_increments(d: &CMatrix, w2: &[f64], w1: &[f64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|q| {
            let mut s = CompensatedSum::new();
            s.add(d[(q, q)] * (w2[q] * w1[q]));
            for j in 0..q {
                s.add(d[(q, j)] * (w2[q] * w1[j]) + d[(j, q)] * (w2[j] * w1[q]));
            }
            s.value()
        })
        .collect()
}

/// `C` and `G_n` of one shell; `y = -1` has `C = E` and `G_n = tau_nn / sigma`.
fn separable_parts(l: usize, state: &DimensionlessState, sigma: f64, n: usize) -> Result<(CMatrix, Vec<Complex64>)> {
    if is_special_point(state) {
        let t = tau_matrix(l, state, sigma, n, TauRoute::DiagonalSpecial)?;
        return Ok((CMatrix::identity(n, n), (0..n).map(|i| t.tau[(i, i)] / sigma).collect()));
    }
    let ch = build_chain(l, state, sigma, n)?;
    let c = c_matrix(&ch.g, &ch.seq, &ch.phi, n)?.entries;
    Ok((c, (0..n).map(|i| ch.g.big_g(i)).collect()))
}

/// Block increments of one `l` shell of
/// `(2 pi)^{3/2} sigma sum_{m,n} G_n Phi_n(k2, z) Phi^hat_n(k1, z)`
/// minus the same truncation of the potential expansion. `Phi^hat` is
/// taken literally as the conjugate of `Phi` evaluated at `z*`.
#[allow(clippy::too_many_arguments)]
fn separable_increments(
    sys: &PhysicalSystem,
    z: Complex64,
    state: &DimensionlessState,
    l: usize,
    k2: &MomentumVector,
    k1: &MomentumVector,
    w2: &[f64],
    w1: &[f64],
    c_prime: f64,
    n: usize,
) -> Result<Vec<Complex64>> {
    let sigma = sys.sigma.value();
    let (c, big_g) = separable_parts(l, state, sigma, n)?;
    let c_star = if z.im == 0.0 {
        c.clone()
    } else {
        separable_parts(l, &to_dimensionless(sys, z.conj())?, sigma, n)?.0
    };
    let mut ang = CompensatedSum::new();
    for m in -(l as i64)..=(l as i64) {
        ang.add(ylm(l, m, k2)? * ylm(l, m, k1)?.conj());
    }
    let ang = ang.value();
    let pp = form_prefactor(sys, k2.magnitude()) * form_prefactor(sys, k1.magnitude());
    // radial parts of Phi_k(k2) and Phi^hat_k(k1) over the current block
    let mut r2 = vec![Complex64::new(0.0, 0.0); n];
    let mut r1 = vec![Complex64::new(0.0, 0.0); n];
    let mut prev = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for q in 0..n {
        for k in 0..=q {
            r2[k] += c[(k, q)] * w2[q];
            r1[k] += c_star[(k, q)].conj() * w1[q];
        }
        let mut s = CompensatedSum::new();
        for k in 0..=q {
            s.add(big_g[k] * r2[k] * r1[k]);
        }
        let s = s.value();
        let sep = (s - prev) * ang * (pp * (2.0 * PI).powf(1.5) * sigma);
        out.push(sep - ang * (w2[q] * w1[q] * sigma * c_prime));
        prev = s;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoleEntry {
    pub n: usize,
    pub l: usize,
    /// Located zero of `1/tau`.
    pub energy: f64,
    /// `E_b / (n+l+1)^2`.
    pub expected: f64,
    pub rel_err: f64,
    /// Extrapolated `lim (E - E_p) tau(E)`.
    pub residue: f64,
    /// `-2 E_p^{3/2}`, the value quoted for the residue.
    pub quoted_residue: f64,
    pub quoted_rel_err: f64,
    /// `-2 E_p`, the residue of `sigma/(1 + sigma sqrt(E_p/E))` in `E`.
    pub analytic_residue: f64,
    pub analytic_rel_err: f64,
    /// `|tau_direct - tau_closed|` near the pole, dense solve at `y = -1`.
    pub cross_check: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoleScanSpec {
    /// Open-closed energy window `(lo, hi]` of binding energies `E = -z`.
    pub window: (f64, f64),
    /// Log-spaced sampling points for the sign-change search.
    pub grid: usize,
    pub tol: f64,
}

fn refine_root<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let (mut fa, mut fb) = (f(a), f(b));
    let mut side = 0;
    for _ in 0..200 {
        if fa == 0.0 {
            return a;
        }
        if fb == 0.0 {
            return b;
        }
        // Illinois-modified regula falsi
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs() {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

/// Poles of the diagonal `tau` in `E` for each `n` in `n_range`, located as
/// sign changes of `1/tau` on a log grid and refined by regula falsi.
pub fn pole_scan(l: usize, n_range: RangeInclusive<usize>, sys: &PhysicalSystem, spec: &PoleScanSpec) -> Result<Vec<PoleEntry>> {
    let (lo, hi) = spec.window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("energy window ({lo}, {hi}] is not a positive interval")));
    }
    if spec.grid < 2 {
        return Err(Error::InvalidParameter("pole scan grid needs at least two points".into()));
    }
    let sigma = sys.sigma.value();
    let eb = sys.binding_energy();
    let mut out = Vec::new();
    for n in n_range {
        let level = hydrogen_level(n, l, eb);
        let inv_tau = |e: f64| (1.0 + sigma * (level / e).sqrt()) / sigma;
        if sigma == 0.0 {
            continue;
        }
        let grid: Vec<f64> = (0..spec.grid)
            .map(|i| lo * (hi / lo).powf(i as f64 / (spec.grid - 1) as f64))
            .collect();
        let mut found = Vec::new();
        for w in grid.windows(2) {
            let (fa, fb) = (inv_tau(w[0]), inv_tau(w[1]));
            if fa == 0.0 {
                found.push(w[0]);
            } else if fa.signum() != fb.signum() && fb != 0.0 {
                found.push(refine_root(inv_tau, w[0], w[1]));
            } else if fb == 0.0 && w[1] == hi {
                found.push(w[1]);
            }
        }
        let in_window = level > lo && level <= hi;
        if found.is_empty() {
            if in_window && sigma < 0.0 {
                return Err(Error::MissedPole { expected: level });
            }
            continue;
        }
        for e_p in found {
            let residue = residue_at(n, l, e_p, sigma, eb)?;
            let quoted = -2.0 * e_p.powf(1.5);
            let analytic = -2.0 * e_p;
            let cross_check = dense_cross_check(n, l, e_p, sys)?;
            out.push(PoleEntry {
                n,
                l,
                energy: e_p,
                expected: level,
                rel_err: (e_p - level).abs() / level,
                residue,
                quoted_residue: quoted,
                quoted_rel_err: (residue - quoted).abs() / quoted.abs(),
                analytic_residue: analytic,
                analytic_rel_err: (residue - analytic).abs() / analytic.abs(),
                cross_check,
            });
        }
    }
    Ok(out)
}

/// `(E - E_p) tau(E)` sampled symmetrically and Richardson-extrapolated.
fn residue_at(n: usize, l: usize, e_p: f64, sigma: f64, eb: f64) -> Result<f64> {
    let sample = |h: f64| -> Result<f64> {
        let plus = e_p * (1.0 + h);
        let minus = e_p * (1.0 - h);
        let rp = (plus - e_p) * tau_diagonal_special(n, l, plus, sigma, eb)?;
        let rm = (minus - e_p) * tau_diagonal_special(n, l, minus, sigma, eb)?;
        Ok(0.5 * (rp + rm))
    };
    let h = 1e-3;
    let (r1, r2) = (sample(h)?, sample(h / 2.0)?);
    Ok((4.0 * r2 - r1) / 3.0)
}

/// Dense-solve `tau_nn` at `E = 1.01 E_p` against the closed diagonal.
fn dense_cross_check(n: usize, l: usize, e_p: f64, sys: &PhysicalSystem) -> Result<f64> {
    let e = 1.01 * e_p;
    let special = sys.with_gamma(sys.special_gamma(e)?)?;
    let state = to_dimensionless(&special, Complex64::new(-e, 0.0))?;
    let sigma = sys.sigma.value();
    let t = tau_matrix(l, &state, sigma, n + 2, TauRoute::DirectSolve)?;
    let closed = tau_diagonal_special(n, l, e, sigma, sys.binding_energy())?;
    Ok((t.tau[(n, n)].re - closed).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linalg::{asymmetry, max_abs, max_abs_block};
    use crate::params::Sigma;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn st(y: Complex64, rho: f64) -> DimensionlessState {
        DimensionlessState::from_reduced(y, rho).unwrap()
    }

    #[test]
    fn special_diagonal_examples() {
        assert!((tau_diagonal_special(0, 0, 0.5, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((tau_diagonal_special(1, 1, 0.5 / 9.0, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(tau_diagonal_special(0, 0, 0.5, -1.0, 0.5), Err(Error::AtPole { .. })));
    }

    #[test]
    fn residue_in_energy_is_minus_two_e() {
        let eb = 0.5;
        let r = residue_at(0, 0, eb, -1.0, eb).unwrap();
        assert!((r + 2.0 * eb).abs() < 1e-9 * eb, "{r}");
    }

    #[test]
    fn routes_agree_on_interior() {
        for (y, sigma) in [(c(-4.0, 0.0), 1.0), (c(-2.0, 1.0), -1.0), (c(-0.3, 0.0), -1.0)] {
            let s = st(y, 1.0);
            let d = tau_matrix(0, &s, sigma, 60, TauRoute::DirectSolve).unwrap();
            let f = tau_matrix(0, &s, sigma, 60, TauRoute::FactorizedCgc).unwrap();
            assert!(asymmetry(&d.tau) < 1e-10 * max_abs(&d.tau));
            assert!(asymmetry(&f.tau) < 1e-10 * max_abs(&f.tau));
            let diff = max_abs_block(&(&d.tau - &f.tau), 40);
            assert!(diff < 1e-6 * max_abs(&d.tau), "y={y}: {diff}");
        }
    }

    #[test]
    fn special_point_is_diagonal() {
        let s = st(c(-1.0, 0.0), 0.8);
        let d = tau_matrix(1, &s, -1.0, 12, TauRoute::DirectSolve).unwrap();
        let sp = tau_matrix(1, &s, -1.0, 12, TauRoute::DiagonalSpecial).unwrap();
        assert!(max_abs(&(&d.tau - &sp.tau)) < 1e-9);
        assert!(matches!(tau_matrix(1, &st(c(-2.0, 0.0), 1.0), 1.0, 4, TauRoute::DiagonalSpecial), Err(Error::BranchMismatch(_))));
    }

    #[test]
    fn small_rho_tends_to_sigma_identity() {
        for sigma in [1.0, -1.0] {
            let t = tau_matrix(0, &st(c(-3.0, 0.5), 1e-6), sigma, 20, TauRoute::DirectSolve).unwrap();
            let d = &t.tau - CMatrix::identity(20, 20) * c(sigma, 0.0);
            assert!(max_abs(&d) < 1e-5);
        }
    }

    #[test]
    fn singular_shift_is_reported() {
        // y at the n = 0 bound state -rho^2
        let s = st(c(-1.0 / 4.0, 0.0), 0.5);
        let r = tau_matrix(0, &s, -1.0, 30, TauRoute::DirectSolve);
        assert!(matches!(r, Err(Error::SingularShift { .. })), "{r:?}");
    }

    #[test]
    fn form_factor_routes_agree() {
        let sys = PhysicalSystem::reduced(Sigma::Repulsive).with_gamma(1.0).unwrap();
        let z = c(-2.0, 0.0);
        let idx = SpectralIndex::new(0, 0, 0).unwrap();
        for i in 0..10 {
            let k = MomentumVector::from_spherical(0.1 + 0.4 * i as f64, 0.3, 0.2);
            let a = phi_form_factor(idx, &k, &sys, z, 60, FormFactorRoute::CMatrix, None).unwrap();
            let b = phi_form_factor(idx, &k, &sys, z, 60, FormFactorRoute::Telescoped, None).unwrap();
            assert!((a.value - b.value).norm() <= 1e-8 * a.value.norm(), "k={}", k.magnitude());
        }
    }

    #[test]
    fn form_factor_remainder_is_conservative() {
        let sys = PhysicalSystem::reduced(Sigma::Attractive);
        let idx = SpectralIndex::new(1, 1, 0).unwrap();
        let k = MomentumVector::new(0.3, 0.4, 0.5);
        for z in [c(-2.0, 0.0), c(-0.5, 0.5)] {
            let a = phi_form_factor(idx, &k, &sys, z, 20, FormFactorRoute::CMatrix, None).unwrap();
            let b = phi_form_factor(idx, &k, &sys, z, 40, FormFactorRoute::CMatrix, None).unwrap();
            assert!((a.value - b.value).norm() < a.remainder, "{z}: {} vs {}", (a.value - b.value).norm(), a.remainder);
        }
    }

    #[test]
    fn free_form_factor_is_single_term() {
        let sys = PhysicalSystem::reduced(Sigma::Free);
        let idx = SpectralIndex::new(2, 1, -1).unwrap();
        let k = MomentumVector::new(0.3, -0.4, 0.5);
        let f = phi_form_factor(idx, &k, &sys, c(-1.0, 0.0), 10, FormFactorRoute::CMatrix, None).unwrap();
        let h = crate::basis::h_basis(idx, &k, 1.0).unwrap();
        let want = h * (1.0f64 / 2.0).sqrt() * (0.5f64 + 1.0).sqrt() * upsilon(2, 1).sqrt();
        assert!((f.value - want).norm() < 1e-14);
    }

    #[test]
    fn assembly_routes_agree() {
        let k2 = MomentumVector::new(0.1, 0.1, 0.2);
        let k1 = MomentumVector::new(-0.6, 1.2, 0.5);
        let opts = TOptions::default();
        for (sigma, z) in [(Sigma::Attractive, c(-2.0, 0.0)), (Sigma::Repulsive, c(-1.0, 0.0)), (Sigma::Attractive, c(-0.4, 0.3))] {
            let sys = PhysicalSystem::reduced(sigma);
            let a = t_element(&sys, z, &k2, &k1, &opts, AssemblyRoute::Expansion).unwrap();
            let b = t_element(&sys, z, &k2, &k1, &opts, AssemblyRoute::Separable).unwrap();
            assert!((a.value - b.value).norm() < 1e-6 * a.value.norm(), "{z}: {} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn exchange_and_rotation() {
        let sys = PhysicalSystem::reduced(Sigma::Attractive);
        let k2 = MomentumVector::new(0.1, 0.1, 0.2);
        let k1 = MomentumVector::new(-0.6, 1.2, 0.5);
        let opts = TOptions::default();
        let z = c(-0.7, 0.0);
        let a = t_element(&sys, z, &k2, &k1, &opts, AssemblyRoute::Expansion).unwrap();
        let b = t_element(&sys, z, &k1, &k2, &opts, AssemblyRoute::Expansion).unwrap();
        assert!((a.value - b.value).norm() < 1e-10 * a.value.norm());
        let (ct, s) = (0.6f64, 0.8f64);
        let r = [[ct, -s, 0.0], [s, ct, 0.0], [0.0, 0.0, 1.0]];
        let c2 = t_element(&sys, z, &k2.rotated(&r), &k1.rotated(&r), &opts, AssemblyRoute::Separable).unwrap();
        let a2 = t_element(&sys, z, &k2, &k1, &opts, AssemblyRoute::Separable).unwrap();
        assert!((a2.value - c2.value).norm() < 1e-10 * a2.value.norm());
    }

    #[test]
    fn positive_real_energy_is_refused() {
        let sys = PhysicalSystem::reduced(Sigma::Attractive);
        let k = MomentumVector::new(0.1, 0.0, 0.0);
        let p = MomentumVector::new(0.0, 0.2, 0.0);
        let r = t_element(&sys, c(0.5, 0.0), &k, &p, &TOptions::default(), AssemblyRoute::Expansion);
        assert!(matches!(r, Err(Error::DomainError(_))));
    }

    #[test]
    fn pole_scan_finds_levels() {
        let sys = PhysicalSystem::reduced(Sigma::Attractive);
        let eb = sys.binding_energy();
        let spec = PoleScanSpec { window: (0.02 * eb, 1.5 * eb), grid: 400, tol: 1e-10 };
        let poles = pole_scan(0, 0..=2, &sys, &spec).unwrap();
        assert_eq!(poles.len(), 3);
        for p in &poles {
            assert!(p.rel_err < 1e-10);
            assert!(p.analytic_rel_err < 1e-6);
            assert!(p.cross_check < 1e-9);
        }
        let rep = PhysicalSystem::reduced(Sigma::Repulsive);
        let spec = PoleScanSpec { window: (1e-3 * eb, 10.0 * eb), grid: 400, tol: 1e-10 };
        assert!(pole_scan(0, 0..=3, &rep, &spec).unwrap().is_empty());
    }
}
