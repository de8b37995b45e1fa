//! Physical inputs and the reduction to the dimensionless variables `y`, `rho`
//! and `x = (y - 1)/(y + 1)` that every other module works in.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Sign of the Coulomb coupling.
///
/// `Free` switches the interaction off and is only meant for Born-limit and
/// consistency checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sigma {
    Attractive,
    Repulsive,
    Free,
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Attractive => -1.0,
            Sigma::Repulsive => 1.0,
            Sigma::Free => 0.0,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Sigma::Repulsive)
        } else if v == -1.0 {
            Ok(Sigma::Attractive)
        } else if v == 0.0 {
            Ok(Sigma::Free)
        } else {
            Err(Error::InvalidParameter(format!("sigma must be +1, -1 or 0, got {v}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalSystem {
    pub alpha: f64,
    pub mu: f64,
    pub hbar: f64,
    pub sigma: Sigma,
    pub gamma: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be a positive finite real, got {v}")))
    }
}

impl PhysicalSystem {
    pub fn new(alpha: f64, mu: f64, hbar: f64, sigma: Sigma, gamma: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("mu", mu)?;
        positive("hbar", hbar)?;
        positive("gamma", gamma)?;
        Ok(Self { alpha, mu, hbar, sigma, gamma })
    }

    /// Reduced units: alpha = mu = hbar = gamma = 1.
    pub fn reduced(sigma: Sigma) -> Self {
        Self { alpha: 1.0, mu: 1.0, hbar: 1.0, sigma, gamma: 1.0 }
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.alpha, self.mu, self.hbar, self.sigma, gamma)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.mu, self.hbar, self.sigma, self.gamma)
    }

    /// `rho = alpha mu / (gamma hbar^2)`.
    pub fn rho(&self) -> f64 {
        self.alpha * self.mu / (self.gamma * self.hbar * self.hbar)
    }

    /// Energy unit of the reduced variable `y`: `gamma^2 hbar^2 / (2 mu)`.
    pub fn energy_scale(&self) -> f64 {
        self.gamma * self.gamma * self.hbar * self.hbar / (2.0 * self.mu)
    }

    /// Ground-state binding energy `mu alpha^2 / (2 hbar^2)` of the attractive
    /// problem. This identity is a convenience; the level formula itself only
    /// needs `E_b` as an input.
    pub fn binding_energy(&self) -> f64 {
        self.mu * self.alpha * self.alpha / (2.0 * self.hbar * self.hbar)
    }

    /// Basis scale that puts `z = -energy` at `y = -1`: `gamma^2 = 2 mu E / hbar^2`.
    pub fn special_gamma(&self, energy: f64) -> Result<f64> {
        positive("energy", energy)?;
        Ok((2.0 * self.mu * energy).sqrt() / self.hbar)
    }
}

/// Which closed form the coefficient sequences use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Branch {
    /// Generic complex (or positive real) `y`.
    Complex,
    /// `y = -t` with `t > 0`, handled in real arithmetic.
    NegativeReal { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionlessState {
    pub y: Complex64,
    pub rho: f64,
    /// `(y - 1)/(y + 1)`; `None` at `y = -1`.
    pub x: Option<Complex64>,
    /// Square root of `y` with non-negative imaginary part.
    pub sqrt_y: Complex64,
    pub branch: Branch,
}

/// `sqrt(y)` on the branch `Im >= 0` (the `z = E + i0` convention).
pub fn sqrt_upper(y: Complex64) -> Complex64 {
    if y.im == 0.0 && y.re < 0.0 {
        return Complex64::new(0.0, (-y.re).sqrt());
    }
    let s = y.sqrt();
    if s.im < 0.0 {
        -s
    } else {
        s
    }
}

impl DimensionlessState {
    pub fn from_reduced(y: Complex64, rho: f64) -> Result<Self> {
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(Error::NonFinite("reduced energy y"));
        }
        positive("rho", rho)?;
        let branch = if y.im == 0.0 && y.re < 0.0 {
            Branch::NegativeReal { t: -y.re }
        } else {
            Branch::Complex
        };
        let x = if y == Complex64::new(-1.0, 0.0) { None } else { Some((y - 1.0) / (y + 1.0)) };
        if let Some(x) = x {
            if !(x.re.is_finite() && x.im.is_finite()) {
                return Err(Error::NonFinite("x = (y-1)/(y+1)"));
            }
        }
        Ok(Self { y, rho, x, sqrt_y: sqrt_upper(y), branch })
    }

    pub fn is_negative_real(&self) -> bool {
        matches!(self.branch, Branch::NegativeReal { .. })
    }

    /// Complex energy this state corresponds to in `sys`.
    pub fn energy(&self, sys: &PhysicalSystem) -> Complex64 {
        self.y * sys.energy_scale()
    }
}

/// `y = 2 mu z / (gamma^2 hbar^2)`, `rho = alpha mu / (gamma hbar^2)`.
///
/// Negative real `y` is routed to the real `t = -y` branch automatically;
/// `y = -1` is accepted there with `x` left undefined.
pub fn to_dimensionless(sys: &PhysicalSystem, z: Complex64) -> Result<DimensionlessState> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("energy z"));
    }
    let y = z / sys.energy_scale();
    DimensionlessState::from_reduced(y, sys.rho())
}

/// Hydrogen-like level `E_b / (n + l + 1)^2`.
pub fn hydrogen_level(n: usize, l: usize, binding_energy: f64) -> f64 {
    let d = (n + l + 1) as f64;
    binding_energy / (d * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reduced_unit_example() {
        let sys = PhysicalSystem::reduced(Sigma::Repulsive);
        let s = to_dimensionless(&sys, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(s.y, Complex64::new(2.0, 0.0));
        assert_eq!(s.rho, 1.0);
        assert_relative_eq!(s.x.unwrap().re, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn y_minus_one_goes_to_t_branch() {
        let sys = PhysicalSystem::reduced(Sigma::Attractive);
        let s = to_dimensionless(&sys, Complex64::new(-0.5, 0.0)).unwrap();
        assert_eq!(s.y, Complex64::new(-1.0, 0.0));
        assert!(s.x.is_none());
        assert_eq!(s.branch, Branch::NegativeReal { t: 1.0 });
    }

    #[test]
    fn special_gamma_puts_y_at_minus_one() {
        let sys = PhysicalSystem::new(1.3, 0.7, 1.1, Sigma::Attractive, 1.0).unwrap();
        let e = 0.37;
        let sys = sys.with_gamma(sys.special_gamma(e).unwrap()).unwrap();
        let s = to_dimensionless(&sys, Complex64::new(-e, 0.0)).unwrap();
        assert_relative_eq!(s.y.re, -1.0, epsilon = 1e-14);
        assert_eq!(s.y.im, 0.0);
    }

    #[test]
    fn sqrt_branch_upper_half() {
        for y in [Complex64::new(2.0, 0.0), Complex64::new(2.0, -1e-3), Complex64::new(-3.0, 0.0), Complex64::new(-3.0, -0.0), Complex64::new(0.5, 2.0)] {
            let s = sqrt_upper(y);
            assert!(s.im >= 0.0);
            assert_relative_eq!((s * s - y).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn round_trip_energy() {
        let sys = PhysicalSystem::new(2.0, 0.3, 0.9, Sigma::Repulsive, 1.7).unwrap();
        for z in [Complex64::new(0.3, 0.2), Complex64::new(-4.0, 0.0), Complex64::new(12.0, 1e-3)] {
            let s = to_dimensionless(&sys, z).unwrap();
            assert_relative_eq!((s.energy(&sys) - z).norm() / z.norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn hydrogen_levels() {
        assert_eq!(hydrogen_level(0, 0, 0.5), 0.5);
        assert_eq!(hydrogen_level(1, 0, 0.5), 0.125);
        assert_eq!(hydrogen_level(0, 1, 0.5), 0.125);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(PhysicalSystem::new(-1.0, 1.0, 1.0, Sigma::Repulsive, 1.0).is_err());
        assert!(PhysicalSystem::new(1.0, 1.0, 1.0, Sigma::Repulsive, f64::NAN).is_err());
        assert!(Sigma::from_value(2.0).is_err());
        let sys = PhysicalSystem::reduced(Sigma::Repulsive);
        assert!(to_dimensionless(&sys, Complex64::new(f64::INFINITY, 0.0)).is_err());
    }
}
