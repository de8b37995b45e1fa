//! Independent reference machinery: half-line quadrature, dense linear
//! algebra, accelerated series summation and the brute-force truncated solve.

pub mod linalg;
pub mod quadrature;
pub mod series;
pub mod truncated;
