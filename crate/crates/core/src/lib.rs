//! Separable Coulomb T-matrix in a Sturmian-type momentum basis.
//!
//! The crate is layered: [`params`] and [`specfun`] feed [`basis`] and
//! [`coeffs`], which feed the operator matrices in [`opmatrix`] and the
//! assembly in [`tmatrix`]. [`oracle`] holds the brute-force references
//! used to cross-check every closed form.

#![allow(clippy::needless_range_loop)]

pub mod basis;
pub mod coeffs;
pub mod error;
pub mod opmatrix;
pub mod oracle;
pub mod params;
pub mod specfun;
pub mod tmatrix;

pub use basis::{MomentumVector, SpectralIndex};
pub use coeffs::{CoeffContext, CoeffSequence};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use opmatrix::{GSequence, OperatorKind, PhiSequence, TruncatedOperator};
pub use oracle::linalg::CMatrix;
pub use params::{Branch, DimensionlessState, PhysicalSystem, Sigma};
pub use tmatrix::{AssemblyRoute, FormFactor, PoleEntry, TElement, TOptions, TauResult, TauRoute};
