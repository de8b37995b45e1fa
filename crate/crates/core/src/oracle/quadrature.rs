//! Half-line quadrature through the compactification `x = tan(theta/2)`,
//! i.e. `u = (x^2 - 1)/(x^2 + 1) = -cos(theta)`, with an optional simple pole
//! treated as principal value plus the `E + i0` residue term.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::series::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadratureRule {
    GaussLegendreMapped,
    TanhSinh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PoleHandling {
    None,
    /// The integrand is `g(x)/(x0^2 - x^2 + i0)`; the caller supplies `g`.
    PrincipalValue { x0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub points: usize,
    pub target_tol: f64,
    pub pole_handling: PoleHandling,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rule: QuadratureRule::GaussLegendreMapped, points: 200, target_tol: 1e-10, pole_handling: PoleHandling::None }
    }
}

impl QuadratureSpec {
    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.target_tol = tol;
        self
    }

    pub fn with_pole(mut self, x0: f64) -> Self {
        self.pole_handling = PoleHandling::PrincipalValue { x0 };
        self
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: Complex64,
    pub error: f64,
    pub points: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// A fixed rule for `int_0^inf f(x) dx` with the compactification weight
/// already folded into `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HalfLineRule {
    pub fn new(rule: QuadratureRule, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidParameter("quadrature needs at least two points".into()));
        }
        let (theta, wt) = match rule {
            QuadratureRule::GaussLegendreMapped => {
                let (t, w) = gauss_legendre(points);
                (
                    t.iter().map(|&t| 0.5 * PI * (t + 1.0)).collect::<Vec<_>>(),
                    w.iter().map(|&w| 0.5 * PI * w).collect::<Vec<_>>(),
                )
            }
            QuadratureRule::TanhSinh => tanh_sinh_interval(points, PI),
        };
        let mut nodes = Vec::with_capacity(points);
        let mut weights = Vec::with_capacity(points);
        for (&t, &w) in theta.iter().zip(&wt) {
            if t <= 0.0 || t >= PI {
                continue;
            }
            let x = (0.5 * t).tan();
            nodes.push(x);
            weights.push(w * 0.5 * (1.0 + x * x));
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        let mut acc = CompensatedSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(f(x) * w);
        }
        acc.value()
    }
}

/// Tanh-sinh nodes on `(0, len)` from `points` abscissae, step chosen to cover
/// `|t| <= 3`.
fn tanh_sinh_interval(points: usize, len: f64) -> (Vec<f64>, Vec<f64>) {
    let k = (points / 2) as i64;
    let h = 3.0 / k.max(1) as f64;
    let mut x = Vec::with_capacity(points);
    let mut w = Vec::with_capacity(points);
    for j in -k..=k {
        let t = j as f64 * h;
        let s = 0.5 * PI * t.sinh();
        let c = s.cosh();
        // distance from the nearer endpoint, computed without cancellation
        let half = 0.5 * len;
        let d = half / (s.abs().exp() * c);
        let node = if s < 0.0 { d } else { len - d };
        let weight = half * h * 0.5 * PI * t.cosh() / (c * c);
        if d > 0.0 && weight > 0.0 {
            x.push(node);
            w.push(weight);
        }
    }
    (x, w)
}

fn pv_integrand<F: Fn(f64) -> Complex64>(f: &F, x0: f64, gx0: Complex64, x: f64) -> Complex64 {
    let d = x0 * x0 - x * x;
    if d.abs() < 1e-14 * x0 * x0 {
        // removable point: -g'(x0)/(2 x0) by central difference
        let h = 1e-5 * x0.max(1e-3);
        let dg = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        return -dg / (2.0 * x0);
    }
    (f(x) - gx0) / d
}

fn apply_rule<F: Fn(f64) -> Complex64>(f: &F, spec: &QuadratureSpec, points: usize) -> Result<Complex64> {
    let rule = HalfLineRule::new(spec.rule, points)?;
    Ok(match spec.pole_handling {
        PoleHandling::None => rule.apply(f),
        PoleHandling::PrincipalValue { x0 } => {
            let gx0 = f(x0);
            // PV int_0^inf dx/(x0^2 - x^2) = 0, so only the subtracted piece remains
            let pv = rule.apply(|x| pv_integrand(f, x0, gx0, x));
            pv - Complex64::new(0.0, PI) * gx0 / (2.0 * x0)
        }
    })
}

/// `int_0^inf f(x) dx` (or the `E + i0` regularised pole integral) with the
/// error taken from successive point doublings.
pub fn integrate_halfline<F: Fn(f64) -> Complex64>(f: F, spec: &QuadratureSpec) -> Result<Quadrature> {
    if let PoleHandling::PrincipalValue { x0 } = spec.pole_handling {
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(Error::InvalidParameter(format!("pole location must be positive, got {x0}")));
        }
    }
    const MAX_DOUBLINGS: usize = 5;
    let mut n = spec.points.max(4);
    let mut coarse = apply_rule(&f, spec, n)?;
    let mut err = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        n *= 2;
        let fine = apply_rule(&f, spec, n)?;
        if !(fine.re.is_finite() && fine.im.is_finite()) {
            return Err(Error::NonFinite("quadrature value"));
        }
        err = (fine - coarse).norm() + 16.0 * f64::EPSILON * fine.norm();
        coarse = fine;
        if err <= spec.target_tol * fine.norm().max(1.0) {
            return Ok(Quadrature { value: fine, error: err, points: n });
        }
    }
    Err(Error::QuadratureFailure { estimate: err })
}
