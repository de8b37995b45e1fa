//! Coefficient sequences `R_n`, `Q_n`, `beta_n` from their closed
//! hypergeometric forms, the three-term recurrence used as a residual check,
//! and the tail coefficients of the form-factor sums.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::basis::upsilon;
use crate::error::{Error, Result};
use crate::opmatrix::{phi_sequence, PhiSequence};
use crate::params::{Branch, DimensionlessState};
use crate::specfun::{hyp2f1, hyp2f1_real, ln_gamma, ln_gamma_pos, Hyp2F1Params};

const HYP_TOL: f64 = 1e-14;

/// Everything the closed forms need for one `(l, y, rho, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoeffContext {
    pub l: usize,
    pub state: DimensionlessState,
    pub sigma: f64,
    /// `(y-1)/(y+1) - 2i sqrt(y)/(y+1) = (sqrt(y) - i)/(sqrt(y) + i)`.
    pub omega2: Complex64,
    pub branch: Branch,
}

impl CoeffContext {
    /// Picks the branch from `state`: negative real `y` uses the real form.
    pub fn new(l: usize, state: DimensionlessState, sigma: f64) -> Result<Self> {
        Self::with_branch(l, state, sigma, state.branch)
    }

    pub fn with_branch(l: usize, state: DimensionlessState, sigma: f64, branch: Branch) -> Result<Self> {
        if !(sigma == 1.0 || sigma == -1.0 || sigma == 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be +1, -1 or 0, got {sigma}")));
        }
        match (branch, state.branch) {
            (Branch::Complex, Branch::NegativeReal { t }) => {
                return Err(Error::BranchMismatch(format!("y = -{t} is negative real; use the real branch")))
            }
            (Branch::NegativeReal { .. }, Branch::Complex) => {
                return Err(Error::BranchMismatch("real branch requested for a y that is not negative real".into()))
            }
            _ => {}
        }
        if state.x.is_none() {
            return Err(Error::BranchMismatch("y = -1 is the diagonal special point; the sequences vanish there".into()));
        }
        let omega2 = match state.branch {
            Branch::NegativeReal { t } => {
                let s = t.sqrt();
                Complex64::new((s - 1.0) / (s + 1.0), 0.0)
            }
            Branch::Complex => {
                let s = state.sqrt_y;
                (s - Complex64::i()) / (s + Complex64::i())
            }
        };
        Ok(Self { l, state, sigma, omega2, branch: state.branch })
    }

    /// `i rho sigma / sqrt(y)`; real (`rho sigma / sqrt(t)`) on the real branch.
    pub fn i_kappa(&self) -> Complex64 {
        match self.branch {
            Branch::NegativeReal { t } => Complex64::new(self.state.rho * self.sigma / t.sqrt(), 0.0),
            Branch::Complex => Complex64::i() * self.state.rho * self.sigma / self.state.sqrt_y,
        }
    }

    /// Middle coefficient of the recurrence, `2x(n+l+1) - 4 sigma rho/(y+1)`.
    pub fn recurrence_middle(&self, n: usize) -> Complex64 {
        let y = self.state.y;
        let x = (y - 1.0) / (y + 1.0);
        x * (2.0 * (n + self.l + 1) as f64) - 4.0 * self.sigma * self.state.rho / (y + 1.0)
    }

    fn is_real(&self) -> bool {
        matches!(self.branch, Branch::NegativeReal { .. })
    }
}

/// A number stored as `ln|v|` and a phase; on the real branch the phase is
/// exactly `0` or `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub ln_abs: f64,
    pub phase: f64,
}

impl LogValue {
    fn from_complex(v: Complex64) -> Self {
        Self { ln_abs: v.norm().ln(), phase: v.arg() }
    }

    fn from_real(v: f64) -> Self {
        Self { ln_abs: v.abs().ln(), phase: if v < 0.0 { PI } else { 0.0 } }
    }

    fn mul(self, o: Self, real: bool) -> Self {
        let phase = self.phase + o.phase;
        Self { ln_abs: self.ln_abs + o.ln_abs, phase: if real { wrap_real(phase) } else { wrap(phase) } }
    }

    fn div(self, o: Self, real: bool) -> Self {
        let phase = self.phase - o.phase;
        Self { ln_abs: self.ln_abs - o.ln_abs, phase: if real { wrap_real(phase) } else { wrap(phase) } }
    }

    pub fn value(&self) -> Complex64 {
        if self.phase == 0.0 {
            Complex64::new(self.ln_abs.exp(), 0.0)
        } else if self.phase == PI {
            Complex64::new(-self.ln_abs.exp(), 0.0)
        } else {
            Complex64::from_polar(self.ln_abs.exp(), self.phase)
        }
    }
}

fn wrap(p: f64) -> f64 {
    let mut p = p % (2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    } else if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

fn wrap_real(p: f64) -> f64 {
    // multiples of pi only
    let k = (p / PI).round() as i64;
    if k.rem_euclid(2) == 0 {
        0.0
    } else {
        PI
    }
}

/// Which formula produced a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    ClosedForm,
    ClosedFormReal,
}

/// `R_n`, `Q_n` for `n = -1..=N` and `beta_n = Q_n/Q_{n-1}` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoeffSequence {
    pub ctx: CoeffContext,
    /// Entry `i` holds index `n = i - 1`.
    pub ln_r: Vec<LogValue>,
    pub ln_q: Vec<LogValue>,
    pub beta: Vec<Complex64>,
    pub r_minus1: Complex64,
    pub provenance: Provenance,
}

impl CoeffSequence {
    /// Largest index `N` held.
    pub fn n_max(&self) -> usize {
        self.beta.len() - 1
    }

    /// `R_n` for `n >= -1`.
    pub fn r(&self, n: isize) -> Complex64 {
        self.ln_r[(n + 1) as usize].value()
    }

    /// `Q_n` for `n >= -1`.
    pub fn q(&self, n: isize) -> Complex64 {
        self.ln_q[(n + 1) as usize].value()
    }

    /// `Q_m / Q_n` without forming either.
    pub fn q_ratio(&self, m: isize, n: isize) -> Complex64 {
        let real = self.ctx.is_real();
        self.ln_q[(m + 1) as usize].div(self.ln_q[(n + 1) as usize], real).value()
    }

    /// `prod_{k=n}^{m} beta_k` as a direct product.
    pub fn beta_product(&self, n: usize, m: usize) -> Complex64 {
        (n..=m).map(|k| self.beta[k]).product()
    }
}

fn ln_hyp(ctx: &CoeffContext, n: usize) -> Result<LogValue> {
    let l = ctx.l as f64;
    let ik = ctx.i_kappa();
    let nf = n as f64;
    match ctx.branch {
        Branch::NegativeReal { .. } => {
            let q = ctx.omega2.re;
            let v = hyp2f1_real(nf + 1.0, -l + ik.re, nf + l + 2.0 + ik.re, q * q, HYP_TOL)?;
            if v.value == 0.0 {
                return Err(Error::ZeroDivisor { n });
            }
            Ok(LogValue::from_real(v.value))
        }
        Branch::Complex => {
            let p = Hyp2F1Params::new(
                Complex64::new(nf + 1.0, 0.0),
                ik - l,
                ik + nf + l + 2.0,
                ctx.omega2 * ctx.omega2,
            )
            .with_tol(HYP_TOL);
            let v = hyp2f1(&p)?;
            if v.value.norm() == 0.0 {
                return Err(Error::ZeroDivisor { n });
            }
            Ok(LogValue::from_complex(v.value))
        }
    }
}

/// Closed-form `R_n` for `n = -1..=n_max` with `R_{-1} = 1`.
fn r_closed_range(ctx: &CoeffContext, n_max: usize) -> Result<Vec<LogValue>> {
    let real = ctx.is_real();
    let l = ctx.l as f64;
    let ik = ctx.i_kappa();
    let omega = if real { LogValue::from_real(ctx.omega2.re) } else { LogValue::from_complex(ctx.omega2) };
    if omega.ln_abs == f64::NEG_INFINITY {
        return Err(Error::ZeroDivisor { n: 0 });
    }
    let mut out = Vec::with_capacity(n_max + 2);
    out.push(LogValue { ln_abs: 0.0, phase: 0.0 });
    let mut prev_f = LogValue { ln_abs: 0.0, phase: 0.0 };
    for n in 0..=n_max {
        let nf = n as f64;
        let up = LogValue::from_real(2.0 * l + 1.0 + nf);
        let down_v = ik + l + 1.0 + nf;
        if down_v.norm() < 1e-300 {
            return Err(Error::PoleOfGamma(-(l + 1.0 + nf)));
        }
        let down = if real { LogValue::from_real(down_v.re) } else { LogValue::from_complex(down_v) };
        let f = ln_hyp(ctx, n)?;
        let step = omega.mul(up, real).div(down, real).mul(f, real).div(prev_f, real);
        let last = *out.last().unwrap_or(&LogValue { ln_abs: 0.0, phase: 0.0 });
        out.push(last.mul(step, real));
        prev_f = f;
    }
    Ok(out)
}

/// Closed-form `R_n` (normalised to `R_{-1} = 1`).
pub fn r_closed(n: isize, ctx: &CoeffContext) -> Result<Complex64> {
    if n < -1 {
        return Err(Error::IndexError(format!("R_n needs n >= -1, got {n}")));
    }
    if n == -1 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(r_closed_range(ctx, n as usize)?[(n + 1) as usize].value())
}

/// `|(n+1)R_{n+1} - (2x(n+l+1) - 4 sigma rho/(y+1)) R_n + (n+2l+1)R_{n-1}|`
/// over the largest of the three terms.
///
/// The middle coefficient is written without the `2 sigma rho/(y-1)` factor,
/// whose pole at `y = 1` cancels against `x`.
pub fn r_recurrence_residual(n: usize, ctx: &CoeffContext, r_nm1: Complex64, r_n: Complex64, r_np1: Complex64) -> Result<f64> {
    if n < 1 {
        return Err(Error::IndexError("recurrence residual needs n >= 1".into()));
    }
    let a = r_np1 * (n + 1) as f64;
    let b = ctx.recurrence_middle(n) * r_n;
    let c = r_nm1 * (n + 2 * ctx.l + 1) as f64;
    let scale = a.norm().max(b.norm()).max(c.norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((a - b + c).norm() / scale)
}

/// Largest recurrence residual over `1 <= n < N` of a built sequence.
pub fn max_recurrence_residual(seq: &CoeffSequence) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..seq.n_max() {
        let n_i = n as isize;
        let r = r_recurrence_residual(n, &seq.ctx, seq.r(n_i - 1), seq.r(n_i), seq.r(n_i + 1))?;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `ln (1/((n+2)/2)_l) = ln Gamma((n+2)/2) - ln Gamma((n+2)/2 + l)`.
fn ln_q_factor(n: isize, l: usize) -> f64 {
    let a = (n as f64 + 2.0) / 2.0;
    ln_gamma_pos(a) - ln_gamma_pos(a + l as f64)
}

/// `Q_n = (-1)^n R_n / ((n+2)/2)_l`.
pub fn q_of_r(n: isize, l: usize, r_n: Complex64) -> Complex64 {
    let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    r_n * sign * ln_q_factor(n, l).exp()
}

/// Builds `R`, `Q` and `beta` up to index `n_max` with `R_{-1} = 1`.
pub fn beta_seq(n_max: usize, ctx: &CoeffContext) -> Result<CoeffSequence> {
    beta_seq_normalised(n_max, ctx, Complex64::new(1.0, 0.0))
}

/// As [`beta_seq`] with an arbitrary non-zero `R_{-1}`.
pub fn beta_seq_normalised(n_max: usize, ctx: &CoeffContext, r_minus1: Complex64) -> Result<CoeffSequence> {
    if r_minus1.norm() == 0.0 || !r_minus1.re.is_finite() || !r_minus1.im.is_finite() {
        return Err(Error::InvalidParameter("R_{-1} must be finite and non-zero".into()));
    }
    let real = ctx.is_real();
    if real && r_minus1.im != 0.0 {
        return Err(Error::BranchMismatch("the real branch needs a real R_{-1}".into()));
    }
    let norm = if real { LogValue::from_real(r_minus1.re) } else { LogValue::from_complex(r_minus1) };
    let ln_r: Vec<LogValue> = r_closed_range(ctx, n_max)?.into_iter().map(|v| v.mul(norm, real)).collect();
    let mut ln_q = Vec::with_capacity(ln_r.len());
    for (i, r) in ln_r.iter().enumerate() {
        let n = i as isize - 1;
        let sign = LogValue { ln_abs: ln_q_factor(n, ctx.l), phase: if n.rem_euclid(2) == 0 { 0.0 } else { PI } };
        ln_q.push(r.mul(sign, real));
    }
    let mut beta = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if ln_q[n].ln_abs == f64::NEG_INFINITY {
            return Err(Error::ZeroDivisor { n });
        }
        let b = ln_q[n + 1].div(ln_q[n], real).value();
        if !(b.re.is_finite() && b.im.is_finite()) || b.norm() == 0.0 {
            return Err(Error::ZeroDivisor { n });
        }
        beta.push(b);
    }
    let provenance = if real { Provenance::ClosedFormReal } else { Provenance::ClosedForm };
    Ok(CoeffSequence { ctx: *ctx, ln_r, ln_q, beta, r_minus1, provenance })
}

/// `beta_n` through the `phi`/Gamma form,
/// `phi_n^2 (2 rho/(y+1)) Gamma((n+1)/2+l)/Gamma((n+3)/2+l) R_n/R_{n-1}`.
pub fn beta_from_phi(n: usize, seq: &CoeffSequence, phi: &PhiSequence) -> Complex64 {
    let ctx = &seq.ctx;
    let (nf, l) = (n as f64, ctx.l as f64);
    let g = (ln_gamma_pos((nf + 1.0) / 2.0 + l) - ln_gamma_pos((nf + 3.0) / 2.0 + l)).exp();
    phi.squares[n] * (2.0 * ctx.state.rho) / (ctx.state.y + 1.0) * g * seq.r(n as isize) / seq.r(n as isize - 1)
}

/// `lambda_n = (y-1)/(2 rho)(n+l+1) - sigma`.
pub fn lambda(n: usize, ctx: &CoeffContext) -> Complex64 {
    (ctx.state.y - 1.0) / (2.0 * ctx.state.rho) * (n + ctx.l + 1) as f64 - ctx.sigma
}

/// Normalised residual of `phi_n^2 (beta_{n+1} + 1/beta_n) = lambda_n`.
pub fn factor_equation_residual(n: usize, seq: &CoeffSequence, phi: &PhiSequence) -> f64 {
    let p2 = phi.squares[n];
    let a = p2 * seq.beta[n + 1];
    let b = p2 / seq.beta[n];
    let lam = lambda(n, &seq.ctx);
    let scale = a.norm().max(b.norm()).max(lam.norm());
    (a + b - lam).norm() / scale
}

/// Largest factor-equation residual for `n < N`.
pub fn max_factor_equation_residual(seq: &CoeffSequence) -> f64 {
    let phi = phi_sequence(seq.ctx.l, &seq.ctx.state, seq.n_max() + 1);
    (0..seq.n_max()).map(|n| factor_equation_residual(n, seq, &phi)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCoefficient {
    pub n: usize,
    /// `(-1)^n Q_n sqrt(upsilon_{n,l}) / phi_n`.
    pub exact: Complex64,
    /// Large-`n` estimate of the same quantity.
    pub asymptotic: Complex64,
}

/// Tail coefficient of the resummed form-factor series and its large-`n`
/// estimate
/// `2^{l+1/2} Gamma(l+1+i kappa)/Gamma(2l+1) omega^{n+1} n^{-i kappa}
///  (1-omega^2)^{l-i kappa} / (n i sqrt((y+1)/(2 rho)))`.
pub fn tail_coefficient(n1: usize, seq: &CoeffSequence) -> Result<TailCoefficient> {
    if n1 < 1 || n1 > seq.n_max() {
        return Err(Error::IndexError(format!("tail coefficient index {n1} outside 1..={}", seq.n_max())));
    }
    let ctx = &seq.ctx;
    let phi = phi_sequence(ctx.l, &ctx.state, n1 + 1);
    let sign = if n1.is_multiple_of(2) { 1.0 } else { -1.0 };
    let exact = seq.q(n1 as isize) * sign * upsilon(n1, ctx.l).sqrt() / phi.values[n1];
    Ok(TailCoefficient { n: n1, exact, asymptotic: tail_asymptotic(n1, ctx)? * seq.r_minus1 })
}

/// The large-`n` estimate alone (for `R_{-1} = 1`).
pub fn tail_asymptotic(n1: usize, ctx: &CoeffContext) -> Result<Complex64> {
    let l = ctx.l as f64;
    let ik = ctx.i_kappa();
    let nf = n1 as f64;
    let w = ctx.omega2;
    let ln_pref = (l + 0.5) * 2f64.ln() + ln_gamma(ik + l + 1.0)? - ln_gamma_pos(2.0 * l + 1.0);
    let ln_w = w.ln();
    let ln_one_minus = (Complex64::new(1.0, 0.0) - w * w).ln();
    let body = (ln_pref + ln_w * (nf + 1.0) - ik * nf.ln() + ln_one_minus * (-ik + l)).exp() / nf;
    let phi_pref = crate::opmatrix::phi_prefactor(&ctx.state);
    Ok(body / phi_pref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx(l: usize, y: Complex64, rho: f64, sigma: f64) -> CoeffContext {
        CoeffContext::new(l, DimensionlessState::from_reduced(y, rho).unwrap(), sigma).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn omega_on_the_unit_circle_for_positive_y() {
        for y in [0.3, 2.0, 17.0] {
            let cx = ctx(0, c(y, 0.0), 1.0, 1.0);
            assert!((cx.omega2.norm() - 1.0).abs() < 1e-14);
            assert!(((cx.omega2 * cx.omega2.conj()).re - 1.0).abs() < 1e-14);
            let s = y.sqrt();
            let lit = c((y - 1.0) / (y + 1.0), -2.0 * s / (y + 1.0));
            assert!((cx.omega2 - lit).norm() < 1e-15);
        }
    }

    #[test]
    fn first_values() {
        let cx = ctx(0, c(-9.0, 0.0), 1.0, 0.0);
        assert_eq!(r_closed(-1, &cx).unwrap(), c(1.0, 0.0));
        assert_relative_eq!(r_closed(0, &cx).unwrap().re, 0.5, epsilon = 1e-15);
        assert_eq!(r_closed(0, &cx).unwrap().im, 0.0);
    }

    #[test]
    fn q_of_r_examples() {
        let r = c(0.7, -0.2);
        assert_eq!(q_of_r(3, 0, r), -r);
        assert!((q_of_r(0, 1, r) - r).norm() < 1e-15);
        assert!((q_of_r(2, 1, r) - r / 2.0).norm() < 1e-15);
    }

    #[test]
    fn closed_form_obeys_recurrence_generic_point() {
        let cx = ctx(1, c(2.0, 0.0), 1.0, -1.0);
        let seq = beta_seq(5, &cx).unwrap();
        let r = r_recurrence_residual(3, &cx, seq.r(2), seq.r(3), seq.r(4)).unwrap();
        assert!(r < 1e-9, "{r}");
        let cx = ctx(0, c(-4.0, 0.0), 1.0, 1.0);
        let seq = beta_seq(3, &cx).unwrap();
        let r = r_recurrence_residual(1, &cx, seq.r(0), seq.r(1), seq.r(2)).unwrap();
        assert!(r < 1e-10, "{r}");
        let perturbed = r_recurrence_residual(1, &cx, seq.r(0), seq.r(1), seq.r(2) + 1e-3).unwrap();
        assert!(perturbed > 1e-4);
    }

    #[test]
    fn free_case_satisfies_recurrence() {
        for y in [c(2.0, 0.0), c(-3.0, 0.0), c(0.5, 1.0)] {
            let seq = beta_seq(20, &ctx(2, y, 1.0, 0.0)).unwrap();
            assert!(max_recurrence_residual(&seq).unwrap() < 1e-9);
        }
    }

    #[test]
    fn energy_one_is_regular() {
        let seq = beta_seq(20, &ctx(1, c(1.0, 0.0), 1.0, -1.0)).unwrap();
        assert!(max_recurrence_residual(&seq).unwrap() < 1e-9);
    }

    #[test]
    fn beta_satisfies_factor_equation() {
        let seq = beta_seq(21, &ctx(0, c(2.0, 0.0), 1.0, -1.0)).unwrap();
        assert!(max_factor_equation_residual(&seq) < 1e-8);
        let phi = phi_sequence(0, &seq.ctx.state, 22);
        for n in 0..20 {
            let b = beta_from_phi(n, &seq, &phi);
            assert!((b - seq.beta[n]).norm() < 1e-12 * b.norm(), "n={n}");
        }
    }

    #[test]
    fn telescoping_products() {
        let seq = beta_seq(10, &ctx(1, c(0.7, 0.4), 0.5, 1.0)).unwrap();
        let direct = seq.beta_product(2, 5);
        let ratio = seq.q(5) / seq.q(1);
        assert!((direct - ratio).norm() < 1e-12 * ratio.norm());
        assert!((seq.q_ratio(5, 1) - ratio).norm() < 1e-12 * ratio.norm());
    }

    #[test]
    fn ratios_do_not_depend_on_normalisation() {
        let cx = ctx(2, c(3.0, 0.5), 2.0, -1.0);
        let a = beta_seq(15, &cx).unwrap();
        let b = beta_seq_normalised(15, &cx, c(-2.5, 1.5)).unwrap();
        for n in 0..=15 {
            assert!((a.beta[n] - b.beta[n]).norm() < 1e-13 * a.beta[n].norm());
        }
        let cx = ctx(1, c(-2.0, 0.0), 1.0, 1.0);
        let a = beta_seq(15, &cx).unwrap();
        let b = beta_seq_normalised(15, &cx, c(-7.0, 0.0)).unwrap();
        for n in 0..=15 {
            assert!((a.beta[n] - b.beta[n]).norm() < 1e-13 * a.beta[n].norm());
            assert_eq!(a.beta[n].im, 0.0);
        }
    }

    #[test]
    fn branch_guards() {
        let st = DimensionlessState::from_reduced(c(-4.0, 0.0), 1.0).unwrap();
        assert!(matches!(CoeffContext::with_branch(0, st, 1.0, Branch::Complex), Err(Error::BranchMismatch(_))));
        let st = DimensionlessState::from_reduced(c(-1.0, 0.0), 1.0).unwrap();
        assert!(CoeffContext::new(0, st, 1.0).is_err());
    }

    #[test]
    fn tail_estimate_tracks_exact_coefficient() {
        for (y, sigma) in [(c(2.0, 0.0), 1.0), (c(2.0, 0.0), -1.0), (c(-4.0, 0.0), 1.0), (c(-4.0, 0.0), -1.0), (c(1.0, 0.5), -1.0)] {
            let seq = beta_seq(400, &ctx(1, y, 1.0, sigma)).unwrap();
            let t = tail_coefficient(400, &seq).unwrap();
            let ratio = (t.exact.ln() - t.asymptotic.ln()).exp();
            assert!((ratio - 1.0).norm() < 0.02, "y={y} sigma={sigma}: ratio {ratio}");
        }
    }
}
