//! Brute-force solve of the projected integral equation
//! `tau = sigma E + sigma M tau` with `M` the quadrature inverse of `A`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::opmatrix::a_inverse_quadrature_matrix;
use crate::oracle::linalg::{lu_inverse, max_abs, CMatrix};
use crate::params::{to_dimensionless, DimensionlessState, PhysicalSystem};

#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    pub tau: CMatrix,
    /// `max |(E - sigma M) tau - sigma E|`, relative to `max |tau|`.
    pub residual: f64,
    pub condition: f64,
    /// Doubling estimate of the quadrature error in `M`.
    pub quadrature_error: f64,
}

/// Conditions above this are reported instead of solved.
pub const MAX_CONDITION: f64 = 1e12;

pub fn solve_truncated_state(
    l: usize,
    state: &DimensionlessState,
    sigma: f64,
    n: usize,
    points: usize,
) -> Result<TruncatedSolution> {
    let m = a_inverse_quadrature_matrix(l, state, n, points)?;
    let s = Complex64::new(sigma, 0.0);
    let lhs = CMatrix::identity(n, n) - &m.matrix * s;
    let inv = lu_inverse(&lhs)?;
    if inv.condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition: inv.condition });
    }
    let tau = inv.inverse * s;
    let check = &lhs * &tau - CMatrix::identity(n, n) * s;
    let residual = max_abs(&check) / max_abs(&tau).max(f64::MIN_POSITIVE);
    Ok(TruncatedSolution { tau, residual, condition: inv.condition, quadrature_error: m.error })
}

/// Solves the truncated system for `sys` at energy `z`.
pub fn solve_truncated_ls(l: usize, sys: &PhysicalSystem, z: Complex64, n: usize, points: usize) -> Result<TruncatedSolution> {
    let state = to_dimensionless(sys, z)?;
    solve_truncated_state(l, &state, sys.sigma.value(), n, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Sigma;

    #[test]
    fn special_point_matches_closed_diagonal() {
        let sys = PhysicalSystem::reduced(Sigma::Attractive);
        let e = 0.3;
        let sys = sys.with_gamma(sys.special_gamma(e).unwrap()).unwrap();
        let sol = solve_truncated_ls(0, &sys, Complex64::new(-e, 0.0), 8, 200).unwrap();
        let rho = sys.rho();
        for n in 0..8 {
            let want = -1.0 / (1.0 - rho / (n + 1) as f64);
            assert!((sol.tau[(n, n)].re - want).abs() < 1e-6 * want.abs(), "n={n}");
        }
    }

    #[test]
    fn both_signs_satisfy_their_own_equation() {
        let st = DimensionlessState::from_reduced(Complex64::new(-2.0, 1.0), 1.0).unwrap();
        let a = solve_truncated_state(1, &st, 1.0, 20, 200).unwrap();
        let b = solve_truncated_state(1, &st, -1.0, 20, 200).unwrap();
        assert!(a.residual < 1e-8 && b.residual < 1e-8);
        assert!((a.tau[(0, 0)] - b.tau[(0, 0)]).norm() > 1e-3);
    }
}
