//! Exact ratio densities of the coupled model and their limits.
//!
//! For `0 < k < 1` the orthogonal class is a triple integral and the unitary
//! class a closed form. Both degenerate numerically near the ends of the
//! interval, so [`pdf_beta1`] and [`pdf_beta2`] switch to the exact limiting
//! densities at `k <= k_low` (decoupled level) and `k >= k_high` (standard
//! Gaussian ensemble). Nothing here renormalizes: [`normalization`] measures
//! the total mass instead.

mod beta1;
mod beta2;
mod table;

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::ensemble::SymmetryClass;
use crate::numerics::{adaptive, NumericsError, QuadratureSpec};

pub use beta1::{joint_density_beta1, pdf_beta1_integral, pdf_beta1_reduced};
pub use beta2::{
    beta2_coefficients, joint_density_beta2, master_integral, pdf_beta2_closed, term_parameters,
    Beta2Coefficients, MasterIntegralParams,
};
pub use table::{DensityTable, RatioGrid};

pub(crate) use beta1::joint_raw as joint_beta1_raw;
pub(crate) use beta2::joint_unchecked as joint_beta2_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum AnalyticError {
    #[error("ratio must be finite and nonnegative, got {0}")]
    Ratio(f64),
    #[error("coupling k = {k} outside {domain}")]
    Coupling { k: f64, domain: &'static str },
    #[error("dispatch thresholds must satisfy 0 < k_low < k_high < 1, got ({k_low}, {k_high})")]
    Thresholds { k_low: f64, k_high: f64 },
    #[error("master integral diverges unless {0}")]
    MasterDomain(&'static str),
    #[error("argument must be finite, got {0}")]
    NonFinite(f64),
    #[error("density table: {0}")]
    Table(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl AnalyticError {
    /// Best available estimate when the failure is a quadrature that ran out
    /// of subdivisions.
    pub fn estimate(&self) -> Option<f64> {
        match self {
            Self::Numerics(NumericsError::NotConverged { estimate, .. }) => Some(*estimate),
            _ => None,
        }
    }
}

pub(crate) fn check_ratio(r: f64) -> Result<(), AnalyticError> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::Ratio(r))
    }
}

pub(crate) fn check_coupling_open(k: f64) -> Result<(), AnalyticError> {
    if k > 0.0 && k < 1.0 {
        Ok(())
    } else {
        Err(AnalyticError::Coupling { k, domain: "(0, 1)" })
    }
}

pub(crate) fn check_coupling_closed(k: f64) -> Result<(), AnalyticError> {
    if (0.0..=1.0).contains(&k) {
        Ok(())
    } else {
        Err(AnalyticError::Coupling { k, domain: "[0, 1]" })
    }
}

/// Couplings at which the densities switch to their exact limits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispatchThresholds {
    pub k_low: f64,
    pub k_high: f64,
}

impl Default for DispatchThresholds {
    fn default() -> Self {
        Self { k_low: 0.02, k_high: 0.999 }
    }
}

impl DispatchThresholds {
    pub fn new(k_low: f64, k_high: f64) -> Result<Self, AnalyticError> {
        let t = Self { k_low, k_high };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if 0.0 < self.k_low && self.k_low < self.k_high && self.k_high < 1.0 {
            Ok(())
        } else {
            Err(AnalyticError::Thresholds { k_low: self.k_low, k_high: self.k_high })
        }
    }

    pub fn regime(&self, k: f64) -> Regime {
        if k <= self.k_low {
            Regime::Decoupled
        } else if k >= self.k_high {
            Regime::Standard
        } else {
            Regime::Coupled
        }
    }
}

/// Which expression a dispatched density uses at a given `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    /// `k <= k_low`: the `k = 0` density.
    Decoupled,
    /// `k_low < k < k_high`: the general expression.
    Coupled,
    /// `k >= k_high`: the standard 3x3 surmise.
    Standard,
}

/// `(r + r^2)^beta / (1 + r + r^2)^(1 + 3 beta/2) / Z_beta`, with
/// `Z_1 = 8/27` and `Z_2 = 4 pi / (81 sqrt 3)`.
pub fn surmise_ratio_pdf(class: SymmetryClass, r: f64) -> Result<f64, AnalyticError> {
    check_ratio(r)?;
    Ok(surmise(class, r))
}

pub(crate) fn surmise(class: SymmetryClass, r: f64) -> f64 {
    let w = r * r + r;
    let d = r * r + r + 1.0;
    match class {
        SymmetryClass::Orthogonal => 27.0 / 8.0 * w / (d * d * libm::sqrt(d)),
        SymmetryClass::Unitary => {
            let d2 = d * d;
            81.0 * libm::sqrt(3.0) / (4.0 * PI) * w * w / (d2 * d2)
        }
    }
}

/// `1 / (1 + r)^2`, the ratio density of uncorrelated levels.
pub fn poisson_ratio_pdf(r: f64) -> Result<f64, AnalyticError> {
    check_ratio(r)?;
    Ok(1.0 / ((1.0 + r) * (1.0 + r)))
}

/// Orthogonal-class density at `k = 0`.
pub fn pdf_beta1_k0(r: f64) -> Result<f64, AnalyticError> {
    check_ratio(r)?;
    Ok(beta1_k0(r))
}

pub(crate) fn beta1_k0(r: f64) -> f64 {
    let p = |x: f64| x * libm::sqrt(x);
    0.5 * FRAC_1_SQRT_2
        * ((r + 1.0) / p(r * r + 1.0) + 1.0 / p(2.0 * r * (r + 1.0) + 1.0) + r / p(r * (r + 2.0) + 2.0))
}

/// Unitary-class density at `k = 0`.
pub fn pdf_beta2_k0(r: f64) -> Result<f64, AnalyticError> {
    check_ratio(r)?;
    Ok(beta2_k0(r))
}

pub(crate) fn beta2_k0(r: f64) -> f64 {
    let sq = |x: f64| x * x;
    (r * r / sq(r * (r + 2.0) + 2.0) + (r * (r + 2.0) + 1.0) / sq(r * r + 1.0) + 1.0 / sq(2.0 * r * (r + 1.0) + 1.0))
        / PI
}

/// Unitary-class density with limit dispatch.
pub fn pdf_beta2(k: f64, r: f64, thresholds: &DispatchThresholds) -> Result<f64, AnalyticError> {
    check_coupling_closed(k)?;
    check_ratio(r)?;
    thresholds.validate()?;
    Ok(match thresholds.regime(k) {
        Regime::Decoupled => beta2_k0(r),
        Regime::Standard => surmise(SymmetryClass::Unitary, r),
        Regime::Coupled => beta2::closed_form(k, r),
    })
}

/// Orthogonal-class density with limit dispatch; the general case is the
/// triple integral of [`pdf_beta1_integral`].
pub fn pdf_beta1(
    k: f64,
    r: f64,
    quad: &QuadratureSpec,
    thresholds: &DispatchThresholds,
) -> Result<f64, AnalyticError> {
    check_coupling_closed(k)?;
    check_ratio(r)?;
    thresholds.validate()?;
    match thresholds.regime(k) {
        Regime::Decoupled => Ok(beta1_k0(r)),
        Regime::Standard => Ok(surmise(SymmetryClass::Orthogonal, r)),
        Regime::Coupled => Ok(pdf_beta1_integral(k, r, quad)?.value),
    }
}

/// How the orthogonal class is evaluated inside the coupled regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Beta1Route {
    /// The triple integral.
    #[default]
    Triple,
    /// The double integral with `lambda` and `x` done in closed form.
    Reduced,
}

/// A fully specified ratio density `p(k; r)` of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioDensity {
    pub class: SymmetryClass,
    pub k: f64,
    pub quad: QuadratureSpec,
    pub thresholds: DispatchThresholds,
    pub route: Beta1Route,
}

impl RatioDensity {
    pub fn new(class: SymmetryClass, k: f64) -> Result<Self, AnalyticError> {
        check_coupling_closed(k)?;
        Ok(Self {
            class,
            k,
            quad: QuadratureSpec::default(),
            thresholds: DispatchThresholds::default(),
            route: Beta1Route::default(),
        })
    }

    pub fn with_quadrature(mut self, quad: QuadratureSpec) -> Self {
        self.quad = quad;
        self
    }

    pub fn with_thresholds(mut self, thresholds: DispatchThresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn with_route(mut self, route: Beta1Route) -> Self {
        self.route = route;
        self
    }

    pub fn regime(&self) -> Regime {
        self.thresholds.regime(self.k)
    }

    pub fn pdf(&self, r: f64) -> Result<f64, AnalyticError> {
        match (self.class, self.route, self.regime()) {
            (SymmetryClass::Unitary, _, _) => pdf_beta2(self.k, r, &self.thresholds),
            (SymmetryClass::Orthogonal, Beta1Route::Reduced, Regime::Coupled) => {
                Ok(pdf_beta1_reduced(self.k, r, &self.quad)?.value)
            }
            (SymmetryClass::Orthogonal, _, _) => pdf_beta1(self.k, r, &self.quad, &self.thresholds),
        }
    }
}

/// Total mass `int_0^inf p(r) dr`, computed as
/// `int_0^1 p(r) dr + int_0^1 p(1/s) / s^2 ds`.
pub fn normalization<F>(mut pdf: F, quad: &QuadratureSpec) -> Result<crate::numerics::Integral, AnalyticError>
where
    F: FnMut(f64) -> Result<f64, AnalyticError>,
{
    quad.validate()?;
    let mut failure = None;
    let mut eval = |r: f64| match pdf(r) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let lower = adaptive(&mut eval, &[0.0, 0.5, 1.0], quad);
    let upper = adaptive(|s| eval(1.0 / s) / (s * s), &[0.0, 0.5, 1.0], quad);
    if let Some(e) = failure {
        return Err(e);
    }
    let value = lower.value + upper.value;
    let abs_err = lower.abs_err + upper.abs_err;
    if lower.converged && upper.converged {
        Ok(crate::numerics::Integral {
            value,
            abs_err,
            evaluations: lower.evaluations + upper.evaluations,
        })
    } else {
        Err(NumericsError::NotConverged { estimate: value, abs_err }.into())
    }
}
