//! Closed-form ratio density for the unitary class and its building blocks.

use core::f64::consts::PI;

use super::{check_coupling_open, check_ratio, AnalyticError};

/// The nine coefficients `a_j, b_j, c_j` of the closed form at `(k, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Beta2Coefficients {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub c: [f64; 3],
}

/// Coefficients for `0 < k < 1`, `r >= 0`.
pub fn beta2_coefficients(k: f64, r: f64) -> Result<Beta2Coefficients, AnalyticError> {
    check_coupling_open(k)?;
    check_ratio(r)?;
    Ok(coefficients(k, r))
}

pub(crate) fn coefficients(k: f64, r: f64) -> Beta2Coefficients {
    let k2 = k * k;
    let s = libm::sqrt(2.0 + k2);
    let d = 2.0 * k * s;
    Beta2Coefficients {
        a: [
            libm::sqrt(2.0 * (1.0 + r * (r + 1.0) * (2.0 - k2))) / s,
            libm::sqrt(2.0 * (1.0 + r * (r + k2))) / s,
            libm::sqrt(2.0 * (2.0 + r * (r + 2.0) - k2 * (r + 1.0))) / s,
        ],
        b: [
            (k2 * (3.0 * r + 1.0) - 2.0 * (r + 1.0)) / d,
            (2.0 + k2 * (2.0 * r - 1.0)) / d,
            (2.0 - k2 * (2.0 * r + 3.0)) / d,
        ],
        c: [
            (k2 * (3.0 * r + 2.0) - 2.0 * r) / d,
            (k2 * (r - 2.0) - 2.0 * r) / d,
            (2.0 * (r + 1.0) - k2 * (r + 3.0)) / d,
        ],
    }
}

/// `b (5a^2 + 2b^2) / (a^4 (a^2 + b^2)^2) + 3 asinh(b/a) / (a^2 + b^2)^(5/2)`.
#[inline]
fn bracket_term(a: f64, b: f64) -> f64 {
    let a2 = a * a;
    let n = a2 + b * b;
    b * (5.0 * a2 + 2.0 * b * b) / (a2 * a2 * n * n) + 3.0 * libm::asinh(b / a) / (n * n * libm::sqrt(n))
}

/// The closed form without dispatch; valid for `0 < k < 1`.
pub(crate) fn closed_form(k: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let co = coefficients(k, r);
    let k2 = k * k;
    let one_minus = 1.0 - k2;
    let prefactor = libm::sqrt(2.0 - k2) / (4.0 * PI * k * one_minus * one_minus) * r * (r + 1.0);
    let sum: f64 = (0..3)
        .map(|j| bracket_term(co.a[j], co.b[j]) - bracket_term(co.a[j], co.c[j]))
        .sum();
    prefactor * sum
}

/// The closed-form density for `0 < k < 1` with no limit dispatch.
pub fn pdf_beta2_closed(k: f64, r: f64) -> Result<f64, AnalyticError> {
    check_coupling_open(k)?;
    check_ratio(r)?;
    Ok(closed_form(k, r))
}

/// Parameters of the two-dimensional master integral
/// `int dl int_0^inf dx x^5 exp(-alpha2 x^2 + 2 eta x l - gamma2 l^2) / ((u x + 2l)(v x + 2l))`,
/// taken as a principal value across the two pole lines.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MasterIntegralParams {
    pub alpha2: f64,
    pub eta: f64,
    pub gamma2: f64,
    pub u: f64,
    pub v: f64,
}

impl MasterIntegralParams {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        let all = [self.alpha2, self.eta, self.gamma2, self.u, self.v];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(AnalyticError::MasterDomain("parameters must be finite"));
        }
        if !(self.alpha2 > 0.0 && self.gamma2 > 0.0) {
            return Err(AnalyticError::MasterDomain("alpha^2 > 0 and gamma^2 > 0"));
        }
        if !(self.alpha2 * self.gamma2 - self.eta * self.eta > 0.0) {
            return Err(AnalyticError::MasterDomain("alpha^2 gamma^2 - eta^2 > 0"));
        }
        if self.u == self.v {
            return Err(AnalyticError::MasterDomain("u != v"));
        }
        Ok(())
    }

    /// `(a, b, c)` with `a^2 = alpha2 - eta^2/gamma2`,
    /// `b = (gamma/2)(u + 2 eta/gamma2)`, `c = (gamma/2)(v + 2 eta/gamma2)`.
    pub fn reduced(&self) -> (f64, f64, f64) {
        let gamma = libm::sqrt(self.gamma2);
        let shift = 2.0 * self.eta / self.gamma2;
        (
            libm::sqrt(self.alpha2 - self.eta * self.eta / self.gamma2),
            0.5 * gamma * (self.u + shift),
            0.5 * gamma * (self.v + shift),
        )
    }
}

pub fn master_integral(p: &MasterIntegralParams) -> Result<f64, AnalyticError> {
    p.validate()?;
    let (a, b, c) = p.reduced();
    Ok(libm::sqrt(PI) / (8.0 * (p.v - p.u)) * (bracket_term(a, b) - bracket_term(a, c)))
}

/// Master-integral parameters `(params, weight)` of the three terms `t_j`,
/// so that the density is
/// `2 sqrt(2-k^2) / (pi^(3/2) k (1-k^2)^2) r (r+1) sum_j weight_j M(params_j)`.
pub fn term_parameters(k: f64, r: f64) -> [(MasterIntegralParams, f64); 3] {
    let k2 = k * k;
    let gamma2 = 1.0 + 2.0 / k2;
    [
        (
            MasterIntegralParams {
                alpha2: 1.0 - r * r + 2.0 * r * r / k2,
                eta: 1.0 + r - 2.0 * r / k2,
                gamma2,
                u: r - 1.0,
                v: r,
            },
            1.0,
        ),
        (
            MasterIntegralParams {
                alpha2: 1.0 + r * r,
                eta: 1.0 - r,
                gamma2,
                u: -1.0,
                v: r,
            },
            -(r + 1.0),
        ),
        (
            MasterIntegralParams {
                alpha2: r * r + 2.0 / k2 - 1.0,
                eta: 2.0 / k2 - r - 1.0,
                gamma2,
                u: -1.0,
                v: r - 1.0,
            },
            r,
        ),
    ]
}

/// Second divided difference of `y -> exp(-c y)` times `exp(c y_min)`.
///
/// Always positive for `c > 0`; evaluated without the removable
/// singularities of the three-term exponential bracket.
fn scaled_second_difference(c: f64, y: [f64; 3]) -> f64 {
    let mut y = y;
    y.sort_by(f64::total_cmp);
    let (d1, d2) = (y[1] - y[0], y[2] - y[0]);
    let spread = d2;
    if c * spread < 1e-5 {
        let mean = (d1 + d2) / 3.0;
        return 0.5 * c * c * libm::exp(-c * mean);
    }
    // first differences f[y0,y1] and f[y1,y2], scaled by exp(c y0)
    let first = |lo: f64, d: f64| {
        if d == 0.0 {
            -c * libm::exp(-c * lo)
        } else {
            libm::exp(-c * lo) * libm::expm1(-c * d) / d
        }
    };
    let f01 = first(0.0, d1);
    let f12 = first(d1, d2 - d1);
    (f12 - f01) / spread
}

pub(crate) fn joint_unchecked(k: f64, l: [f64; 3]) -> f64 {
    let k2 = k * k;
    let one_minus = 1.0 - k2;
    let norm = libm::sqrt(2.0 - k2) / (3.0 * libm::pow(PI, 1.5) * k * one_minus * one_minus);
    let c = 2.0 * (1.0 / k2 - 1.0);
    let y = [l[0] * l[0], l[1] * l[1], l[2] * l[2]];
    let y_min = y[0].min(y[1]).min(y[2]);
    let v = (l[0] - l[1]) * (l[1] - l[2]) * (l[2] - l[0]);
    let gauss = libm::exp(-(y[0] + y[1] + y[2]) - c * y_min);
    norm * v * v * gauss * scaled_second_difference(c, y)
}

/// Joint density of the unordered eigenvalues for the unitary class.
///
/// Equivalent to the Vandermonde-ratio form with the three-term exponential
/// bracket, rewritten as `C Delta^2 exp(-sum l^2) f[l1^2, l2^2, l3^2]` with
/// `f(y) = exp(-2(1/k^2 - 1) y)`, which is finite wherever `l_i = -l_j`.
pub fn joint_density_beta2(k: f64, l1: f64, l2: f64, l3: f64) -> Result<f64, AnalyticError> {
    check_coupling_open(k)?;
    for x in [l1, l2, l3] {
        if !x.is_finite() {
            return Err(AnalyticError::NonFinite(x));
        }
    }
    Ok(joint_unchecked(k, [l1, l2, l3]))
}
