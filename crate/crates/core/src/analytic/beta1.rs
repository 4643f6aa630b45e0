//! Ratio density for the orthogonal class as a triple integral, a reduced
//! double integral, and the joint eigenvalue density.

use core::f64::consts::{FRAC_PI_4, PI};

use super::{check_coupling_open, check_ratio, AnalyticError};
use crate::numerics::{adaptive, i0_scaled, Integral, NestedErrors, QuadratureSpec, Raw};

/// Shared constants at fixed `(k, r)`.
struct Setup {
    r: f64,
    /// `1/k^2 - 1`
    q: f64,
    /// `(2 + k^2) / (2 k^2)`, the Gaussian coefficient of `lambda`.
    a0: f64,
    prefactor: f64,
}

impl Setup {
    fn new(k: f64, r: f64) -> Self {
        let k2 = k * k;
        Self {
            r,
            q: 1.0 / k2 - 1.0,
            a0: (2.0 + k2) / (2.0 * k2),
            prefactor: libm::sqrt(2.0 - k2) / (PI * k2 * k) * r * (r + 1.0),
        }
    }

    /// `(A, B)` at angle `phi`: `A = ((1/k^2 - 1) cos 2phi + 1)/2`, `B = A - 1/2`.
    #[inline]
    fn angular(&self, phi: f64) -> (f64, f64) {
        let b = 0.5 * self.q * libm::cos(2.0 * phi);
        (b + 0.5, b)
    }

    /// Linear (`h`) and quadratic (`g`) coefficients of the exponent
    /// `-a0 l^2 + 2 h x l - g x^2` obtained with `I0(Z)` replaced by
    /// `exp(s Z)`, `s in [-1, 1]`.
    #[inline]
    fn quadratic_form(&self, a: f64, b: f64, s: f64) -> (f64, f64) {
        let r = self.r;
        (
            a * (1.0 - r) + s * b * (r + 1.0),
            a * (1.0 + r * r) - s * b * (r * r - 1.0),
        )
    }
}

fn outer_spec(quad: &QuadratureSpec, prefactor: f64) -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: quad.abs_tol / prefactor,
        ..*quad
    }
}

fn finish(
    setup: &Setup,
    outer: Raw,
    errs: NestedErrors,
    length: f64,
    quad: &QuadratureSpec,
    scale: f64,
) -> Result<Integral, AnalyticError> {
    let spec = outer_spec(quad, setup.prefactor * scale);
    match errs.conclude(outer, length, &spec) {
        Ok(i) => Ok(Integral {
            value: i.value * setup.prefactor * scale,
            abs_err: i.abs_err * setup.prefactor * scale,
            evaluations: i.evaluations,
        }),
        Err(crate::numerics::NumericsError::NotConverged { estimate, abs_err }) => {
            Err(AnalyticError::Numerics(crate::numerics::NumericsError::NotConverged {
                estimate: estimate * setup.prefactor * scale,
                abs_err: abs_err * setup.prefactor * scale,
            }))
        }
        Err(e) => Err(e.into()),
    }
}

/// The triple integral over `phi in [0, pi/4]`, `x >= 0`, `lambda in R`,
/// with the exponential and the Bessel factor combined as
/// `exp(E + |Z|) * (exp(-|Z|) I0(Z))`.
///
/// Valid for `0 < k < 1`; no limit dispatch.
pub fn pdf_beta1_integral(k: f64, r: f64, quad: &QuadratureSpec) -> Result<Integral, AnalyticError> {
    check_coupling_open(k)?;
    check_ratio(r)?;
    quad.validate()?;
    if r == 0.0 {
        return Ok(Integral { value: 0.0, abs_err: 0.0, evaluations: 0 });
    }
    let setup = Setup::new(k, r);
    let t = quad.truncation_sigmas;
    let sigma_l = 1.0 / libm::sqrt(2.0 * setup.a0);
    let x_spec = quad.tightened(0.3, f64::MIN_POSITIVE);
    let l_spec = quad.tightened(0.1, f64::MIN_POSITIVE);
    let mut errs = NestedErrors::default();

    let outer = adaptive(
        |phi| {
            let (a, b) = setup.angular(phi);
            let (hp, gp) = setup.quadratic_form(a, b, 1.0);
            let (hm, gm) = setup.quadratic_form(a, b, -1.0);
            let d_min = (gp - hp * hp / setup.a0).min(gm - hm * hm / setup.a0);
            let sigma_x = 1.0 / libm::sqrt(2.0 * d_min);
            let peak = 2.0 * sigma_x;
            let ql = 2.0 * (1.0 - setup.r);
            let qx = 1.0 + setup.r * setup.r;
            let zc = b * (setup.r + 1.0);
            let x_raw = adaptive(
                |x| {
                    if x == 0.0 {
                        return 0.0;
                    }
                    let (lp, lm) = (x * hp / setup.a0, x * hm / setup.a0);
                    let (lo, hi) = (lp.min(lm), lp.max(lm));
                    let zx = zc * x;
                    let rm1x = (setup.r - 1.0) * x;
                    let l_raw = adaptive(
                        |l| {
                            let e = -setup.a0 * l * l + a * x * (ql * l - qx * x);
                            let z = zx * (2.0 * l + rm1x);
                            libm::exp(e + libm::fabs(z)) * i0_scaled(z)
                        },
                        &[lo - t * sigma_l, lo, hi, hi + t * sigma_l],
                        &l_spec,
                    );
                    let x2 = x * x;
                    x2 * x2 * errs.absorb(l_raw)
                },
                &[0.0, peak, peak + t * sigma_x],
                &x_spec,
            );
            libm::cos(phi) * errs.absorb(x_raw)
        },
        &[0.0, FRAC_PI_4],
        &outer_spec(quad, setup.prefactor),
    );
    finish(&setup, outer, errs, FRAC_PI_4, quad, 1.0)
}

/// The same density with the `lambda` and `x` integrations done in closed
/// form after writing `I0(Z) = (1/pi) int_0^pi exp(Z cos theta) d theta`:
///
/// `p = C r(r+1) 3/(8 sqrt(a0)) int_0^{pi/4} cos phi int_0^pi D^{-5/2} d theta d phi`
///
/// with `D = g - h^2/a0` from the quadratic form at `s = cos theta`.
/// Much cheaper than the triple integral; used for tabulation.
pub fn pdf_beta1_reduced(k: f64, r: f64, quad: &QuadratureSpec) -> Result<Integral, AnalyticError> {
    check_coupling_open(k)?;
    check_ratio(r)?;
    quad.validate()?;
    if r == 0.0 {
        return Ok(Integral { value: 0.0, abs_err: 0.0, evaluations: 0 });
    }
    let setup = Setup::new(k, r);
    let scale = 3.0 / (8.0 * libm::sqrt(setup.a0));
    let inner_spec = quad.tightened(0.1, f64::MIN_POSITIVE);
    let mut errs = NestedErrors::default();
    let outer = adaptive(
        |phi| {
            let (a, b) = setup.angular(phi);
            let raw = adaptive(
                |theta| {
                    let (h, g) = setup.quadratic_form(a, b, libm::cos(theta));
                    let d = g - h * h / setup.a0;
                    1.0 / (d * d * libm::sqrt(d))
                },
                &[0.0, 0.5 * PI, PI],
                &inner_spec,
            );
            libm::cos(phi) * errs.absorb(raw)
        },
        &[0.0, FRAC_PI_4],
        &outer_spec(quad, setup.prefactor * scale),
    );
    finish(&setup, outer, errs, FRAC_PI_4, quad, scale)
}

/// Unordered joint eigenvalue density, with the `u` integral taken over
/// `t = sqrt(2/k^2 - 1 - u)` so the inverse square root at the upper end
/// disappears. Returned as the unconverged raw estimate for nesting.
pub(crate) fn joint_raw(k: f64, l: [f64; 3], quad: &QuadratureSpec) -> Raw {
    let k2 = k * k;
    let norm = libm::sqrt(2.0 - k2) / (24.0 * PI * k2 * libm::sqrt(1.0 - k2));
    let [l1, l2, l3] = l;
    let vandermonde = libm::fabs((l2 - l1) * (l3 - l1) * (l3 - l2));
    if vandermonde == 0.0 {
        return Raw { value: 0.0, abs_err: 0.0, evaluations: 0, converged: true };
    }
    let a0 = (2.0 + k2) / (2.0 * k2);
    let u_max = 2.0 / k2 - 1.0;
    let t_max = libm::sqrt(u_max - 1.0);
    let spread = l1 * l1 + l2 * l2 - 2.0 * l3 * l3;
    let diff = l1 * l1 - l2 * l2;
    let base = -a0 * l3 * l3;
    let spec = QuadratureSpec { abs_tol: f64::MIN_POSITIVE, ..*quad };
    let raw = adaptive(
        |t| {
            let u = u_max - t * t;
            let z = 0.25 * (u - 1.0) * diff;
            2.0 * libm::exp(base - 0.25 * (u + 1.0) * spread + libm::fabs(z)) * i0_scaled(z)
        },
        &[0.0, t_max],
        &spec,
    );
    let scale = norm * vandermonde;
    Raw {
        value: raw.value * scale,
        abs_err: raw.abs_err * scale,
        ..raw
    }
}

/// Joint density of the unordered eigenvalues for the orthogonal class.
///
/// `lambda_3` is the argument carrying the localized Gaussian weight.
pub fn joint_density_beta1(
    k: f64,
    l1: f64,
    l2: f64,
    l3: f64,
    quad: &QuadratureSpec,
) -> Result<f64, AnalyticError> {
    check_coupling_open(k)?;
    quad.validate()?;
    for x in [l1, l2, l3] {
        if !x.is_finite() {
            return Err(AnalyticError::NonFinite(x));
        }
    }
    let raw = joint_raw(k, [l1, l2, l3], quad);
    if raw.converged {
        Ok(raw.value)
    } else {
        Err(AnalyticError::Numerics(crate::numerics::NumericsError::NotConverged {
            estimate: raw.value,
            abs_err: raw.abs_err,
        }))
    }
}
