//! Spacing-ratio statistics for a localized level coupled to a generic pair.
//!
//! The model is a 3x3 Gaussian random matrix whose third basis state (the
//! localized one) couples to a 2x2 GOE/GUE block with strength `k`:
//! `k = 0` decouples it completely, `k = 1` gives the standard 3x3 ensemble.
//! This crate provides
//!
//! - [`ensemble`]: seeded sampling of the model, eigen-decomposition,
//!   entropy-based identification of the localized state and ratio extraction;
//! - [`analytic`]: the exact ratio densities for both symmetry classes, their
//!   limits, the joint eigenvalue densities and cached density tables;
//! - [`oracle`]: independent quadrature and Monte Carlo cross-checks;
//! - [`fitting`]: maximum-likelihood estimation of `k` from ratio samples;
//! - [`spectra`]: g-l ratio extraction from externally computed spectra;
//! - [`numerics`]: the special functions and quadrature underneath.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analytic;
pub mod ensemble;
pub mod fitting;
pub mod numerics;
pub mod oracle;
pub mod spectra;

pub use analytic::{DispatchThresholds, RatioDensity};
pub use ensemble::{Coupling, EigenTriple, RatioSample, SymmetryClass};
pub use numerics::QuadratureSpec;
