//! Special functions, adaptive quadrature and spline interpolation shared by
//! every analytic evaluation in the crate.
//!
//! Everything here is pure: the same inputs always produce the same outputs
//! and nothing holds shared mutable state, so all of it may be called from
//! any number of threads at once.

mod bessel;
mod quadrature;
mod spline;

pub use bessel::{asinh, bessel_i0_scaled};
pub(crate) use bessel::i0_scaled;
pub use quadrature::{
    gauss_legendre, integrate_1d, integrate_breakpoints, integrate_real_line,
    integrate_semiinfinite, Integral, ScaleHint,
};
pub(crate) use quadrature::{adaptive, NestedErrors, Raw};
pub use spline::{CubicSpline, SplineWeights, UniformGrid};

use thiserror::Error;

/// Errors raised by the numerical primitives.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NumericsError {
    #[error("argument must be finite, got {0}")]
    NonFinite(f64),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid quadrature configuration: {0}")]
    InvalidSpec(&'static str),
    /// Subdivision budget exhausted. The best estimate is still reported.
    #[error("quadrature did not converge: estimate {estimate} with error bound {abs_err}")]
    NotConverged { estimate: f64, abs_err: f64 },
}

/// Tolerances and truncation policy for adaptive integration.
///
/// Infinite domains are never mapped onto a finite interval. They are cut
/// at `truncation_sigmas` times a caller-supplied Gaussian scale, which keeps
/// the discarded tail analytically bounded for the Gaussian-weighted
/// integrands this crate deals with.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub truncation_sigmas: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-6,
            max_subdivisions: 200,
            truncation_sigmas: 8.0,
        }
    }
}

impl QuadratureSpec {
    pub fn new(
        abs_tol: f64,
        rel_tol: f64,
        max_subdivisions: usize,
        truncation_sigmas: f64,
    ) -> Result<Self, NumericsError> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            truncation_sigmas,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(NumericsError::InvalidSpec("abs_tol must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(NumericsError::InvalidSpec("rel_tol must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(NumericsError::InvalidSpec("max_subdivisions must be at least 1"));
        }
        if !(self.truncation_sigmas >= 4.0 && self.truncation_sigmas.is_finite()) {
            return Err(NumericsError::InvalidSpec("truncation_sigmas must be at least 4"));
        }
        Ok(())
    }

    /// A copy with both tolerances scaled, for use one nesting level deeper.
    pub fn tightened(&self, rel_factor: f64, abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: self.rel_tol * rel_factor,
            ..*self
        }
    }
}
