//! Dense complex linear algebra used as the brute-force reference.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest 1-norm column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Largest entry magnitude of the leading `k x k` block.
pub fn max_abs_block(m: &CMatrix, k: usize) -> f64 {
    let k = k.min(m.nrows()).min(m.ncols());
    m.view((0, 0), (k, k)).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct Inverse {
    pub inverse: CMatrix,
    /// 1-norm condition number `|M|_1 |M^-1|_1`.
    pub condition: f64,
}

/// LU (partial pivoting) inverse with a condition estimate.
pub fn lu_inverse(m: &CMatrix) -> Result<Inverse> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidParameter(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let inverse = m.clone().lu().try_inverse().ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let condition = norm1(m) * norm1(&inverse);
    if !condition.is_finite() {
        return Err(Error::IllConditioned { condition });
    }
    Ok(Inverse { inverse, condition })
}

/// Solves `m X = rhs` by LU with partial pivoting.
pub fn lu_solve(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    m.clone().lu().solve(rhs).ok_or(Error::IllConditioned { condition: f64::INFINITY })
}

/// `max |m_ij - m_ji|`.
pub fn asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}
