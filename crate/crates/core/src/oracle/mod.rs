//! Brute-force cross-checks for the analytic densities.
//!
//! The ratio density is recomputed from the joint eigenvalue density as
//! `p(r) = int dl int_0^inf dx x 3! P(l - x, l + r x, l)`, the master
//! integral as a principal value by singularity subtraction, and any density
//! against Monte Carlo samples through the Kolmogorov-Smirnov distance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::analytic::{self, AnalyticError, MasterIntegralParams};
use crate::ensemble::{self, Coupling, EnsembleError, SymmetryClass};
use crate::numerics::{adaptive, Integral, NestedErrors, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("invalid comparison grid: {0}")]
    Grid(&'static str),
    #[error("Monte Carlo comparison needs at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
}

/// Pointwise and distributional comparison of two densities.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub grid: Vec<f64>,
    pub reference: Vec<f64>,
    pub candidate: Vec<f64>,
    pub sup_norm: f64,
    pub ks_distance: Option<f64>,
    pub n_samples: Option<usize>,
}

/// A pinned oracle value with the quadrature configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fixture {
    pub beta: u8,
    pub k: f64,
    pub r: f64,
    pub value: f64,
    pub abs_err_bound: f64,
    pub spec_hash: String,
}

/// Canonical text of a quadrature configuration, for hashing.
pub fn spec_fingerprint(quad: &QuadratureSpec) -> String {
    format!(
        "abs_tol={:e};rel_tol={:e};max_subdivisions={};truncation_sigmas={:e}",
        quad.abs_tol, quad.rel_tol, quad.max_subdivisions, quad.truncation_sigmas
    )
}

/// Evaluate `f` and `g` on `grid`; `sup_norm` is the largest absolute
/// difference.
pub fn compare_densities<F, G>(mut f: F, mut g: G, grid: &[f64]) -> Result<ComparisonReport, OracleError>
where
    F: FnMut(f64) -> Result<f64, AnalyticError>,
    G: FnMut(f64) -> Result<f64, AnalyticError>,
{
    let mut report = ComparisonReport { grid: grid.to_vec(), ..Default::default() };
    for &r in grid {
        let (a, b) = (f(r)?, g(r)?);
        report.sup_norm = report.sup_norm.max(libm::fabs(a - b));
        report.reference.push(a);
        report.candidate.push(b);
    }
    Ok(report)
}

/// `n` points spaced evenly in `ln r` from `r_min` to `r_max`.
pub fn log_spaced(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![r_min];
    }
    let (a, b) = (libm::log(r_min), libm::log(r_max));
    (0..n)
        .map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Centres of the Gaussian factors in `l` at fixed `x`, and their widest
/// standard deviation, read off the joint density.
fn lambda_centres(class: SymmetryClass, k: f64, r: f64, x: f64) -> ([f64; 3], f64) {
    let k2 = k * k;
    match class {
        SymmetryClass::Orthogonal => {
            // exponent in l: -a0 l^2 - (u+1)/2 l x (r-1) -+ (u-1)/2 l x (r+1), u in [1, 2/k^2 - 1]
            let a0 = (2.0 + k2) / (2.0 * k2);
            let at = |u: f64, s: f64| (-(u + 1.0) * (r - 1.0) - s * (u - 1.0) * (r + 1.0)) * x / (4.0 * a0);
            let u_max = 2.0 / k2 - 1.0;
            ([at(1.0, 0.0), at(u_max, 1.0), at(u_max, -1.0)], 1.0 / libm::sqrt(2.0 * a0))
        }
        SymmetryClass::Unitary => {
            // exp(-sum l_i^2 - c l_j^2) for j = 1, 2, 3
            let c = 2.0 * (1.0 / k2 - 1.0);
            let d = 3.0 + c;
            (
                [x * (1.0 + c - r) / d, x * (1.0 - (1.0 + c) * r) / d, -x * (r - 1.0) / d],
                1.0 / libm::sqrt(6.0),
            )
        }
    }
}

/// The ratio density recomputed from the joint eigenvalue density by
/// two-dimensional quadrature (three-dimensional for the orthogonal class,
/// whose joint density is itself an integral).
///
/// For the unitary class the integrand is the regular divided-difference
/// form of the joint density, never the individually singular terms.
pub fn pdf_via_joint_quadrature(
    class: SymmetryClass,
    k: f64,
    r: f64,
    quad: &QuadratureSpec,
) -> Result<Integral, OracleError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(AnalyticError::Coupling { k, domain: "(0, 1)" }.into());
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(AnalyticError::Ratio(r).into());
    }
    quad.validate().map_err(AnalyticError::from)?;
    let t = quad.truncation_sigmas;
    // both joint densities are bounded by a multiple of exp(-sum l^2 / 2), and
    // min over l of sum l^2 is (2/3)(1 + r + r^2) x^2
    let sigma_x = libm::sqrt(1.5 / (1.0 + r + r * r));
    let inner = quad.tightened(0.1, f64::MIN_POSITIVE);
    let joint_spec = quad.tightened(0.01, f64::MIN_POSITIVE);
    let mut errs = NestedErrors::default();
    let outer = adaptive(
        |x| {
            if x == 0.0 {
                return 0.0;
            }
            let (centres, sigma) = lambda_centres(class, k, r, x);
            let mut pts = centres;
            pts.sort_by(f64::total_cmp);
            let breaks = [pts[0] - t * sigma, pts[0], pts[1], pts[2], pts[2] + t * sigma];
            let raw = adaptive(
                |l| {
                    let ls = [l - x, l + r * x, l];
                    match class {
                        SymmetryClass::Unitary => analytic::joint_beta2_unchecked(k, ls),
                        SymmetryClass::Orthogonal => errs.absorb(analytic::joint_beta1_raw(k, ls, &joint_spec)),
                    }
                },
                &breaks,
                &inner,
            );
            6.0 * x * errs.absorb(raw)
        },
        &[0.0, sigma_x, 2.0 * sigma_x, 3.0 * sigma_x, (3.0 + t) * sigma_x],
        quad,
    );
    errs.conclude(outer, (3.0 + t) * sigma_x, quad)
        .map_err(|e| OracleError::Analytic(e.into()))
}

/// Principal value of the master integral, computed directly from its
/// defining double integral.
///
/// The pole lines are split by partial fractions; each one-dimensional
/// principal value `PV int g(l) / (l - l0) dl` becomes the regular integral
/// `int_0^L (g(l0 + s) - g(l0 - s)) / s ds`.
pub fn master_integral_pv(p: &MasterIntegralParams, quad: &QuadratureSpec) -> Result<Integral, OracleError> {
    p.validate()?;
    quad.validate().map_err(AnalyticError::from)?;
    let t = quad.truncation_sigmas;
    let a2 = p.alpha2 - p.eta * p.eta / p.gamma2;
    let sigma_x = 1.0 / libm::sqrt(2.0 * a2);
    let sigma_l = 1.0 / libm::sqrt(2.0 * p.gamma2);
    let inner = quad.tightened(0.1, f64::MIN_POSITIVE);
    let mut errs = NestedErrors::default();
    let outer = adaptive(
        |x| {
            if x == 0.0 {
                return 0.0;
            }
            let g = |l: f64| libm::exp(-p.alpha2 * x * x + 2.0 * p.eta * x * l - p.gamma2 * l * l);
            let centre = p.eta * x / p.gamma2;
            let mut pv = |w: f64| {
                let l0 = -0.5 * w * x;
                let offset = libm::fabs(l0 - centre);
                let raw = adaptive(
                    |s| (g(l0 + s) - g(l0 - s)) / s,
                    &[0.0, offset, offset + t * sigma_l],
                    &inner,
                );
                errs.absorb(raw)
            };
            // 1/((ux+2l)(vx+2l)) = [1/(ux+2l) - 1/(vx+2l)] / ((v-u) x), 1/(wx+2l) = 1/(2 (l - l0))
            let (ju, jv) = (pv(p.u), pv(p.v));
            let x2 = x * x;
            x2 * x2 * 0.5 * (ju - jv) / (p.v - p.u)
        },
        &[0.0, 2.0 * sigma_x, (2.0 + t) * sigma_x],
        quad,
    );
    errs.conclude(outer, (2.0 + t) * sigma_x, quad)
        .map_err(|e| OracleError::Analytic(e.into()))
}

/// One-sample KS distance of an ascending sample against `cdf`.
pub fn ks_distance<F: FnMut(f64) -> f64>(sorted: &[f64], mut cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample KS distance between ascending samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(libm::fabs(i as f64 / na - j as f64 / nb));
    }
    d
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Histogram density of `ratios` on bins `edges` against the bin averages
/// of `cdf`, plus the KS distance against `cdf`.
///
/// `grid` holds the bin centres; the density is normalized by the full
/// sample size, so mass outside the bins is not redistributed.
pub fn compare_sample<F: FnMut(f64) -> f64>(
    ratios: &[f64],
    edges: &[f64],
    mut cdf: F,
) -> Result<ComparisonReport, OracleError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OracleError::Grid("bin edges must be strictly ascending"));
    }
    let sample = sorted(ratios);
    let n = sample.len();
    let mut report = ComparisonReport {
        ks_distance: Some(ks_distance(&sample, &mut cdf)),
        n_samples: Some(n),
        ..Default::default()
    };
    let mut below = sample.partition_point(|&x| x < edges[0]);
    for w in edges.windows(2) {
        let upto = sample.partition_point(|&x| x < w[1]);
        let width = w[1] - w[0];
        let density = (upto - below) as f64 / (n as f64 * width);
        let expected = (cdf(w[1]) - cdf(w[0])) / width;
        report.grid.push(0.5 * (w[0] + w[1]));
        report.candidate.push(density);
        report.reference.push(expected);
        report.sup_norm = report.sup_norm.max(libm::fabs(density - expected));
        below = upto;
    }
    Ok(report)
}

/// Simulate `n` ratios of the model and compare them with `cdf`.
pub fn pdf_via_monte_carlo<F: FnMut(f64) -> f64>(
    class: SymmetryClass,
    k: f64,
    edges: &[f64],
    n: usize,
    seed: u64,
    cdf: F,
) -> Result<ComparisonReport, OracleError> {
    const MIN_SAMPLES: usize = 10_000;
    if n < MIN_SAMPLES {
        return Err(OracleError::TooFewSamples { n, min: MIN_SAMPLES });
    }
    let sample = ensemble::sample_ratios(class, Coupling::new(k)?, n, seed)?;
    compare_sample(&sample.ratios, edges, cdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{beta1_k0, master_integral, pdf_beta2_closed, poisson_ratio_pdf, surmise};
    use approx::assert_relative_eq;

    #[test]
    fn compare_examples() {
        let rep = compare_densities(|r| Ok(beta1_k0(r)), poisson_ratio_pdf, &[0.0]).unwrap();
        assert_relative_eq!(rep.sup_norm, 1.0 - core::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        let grid = log_spaced(0.1, 10.0, 7);
        let f = |r: f64| Ok(surmise(SymmetryClass::Unitary, r));
        assert_eq!(compare_densities(f, f, &grid).unwrap().sup_norm, 0.0);
    }

    #[test]
    fn unitary_oracle_matches_closed_form() {
        let q = QuadratureSpec { abs_tol: 1e-11, rel_tol: 1e-9, ..QuadratureSpec::default() };
        for (k, r) in [(0.5, 1.0), (0.2, 0.3), (0.8, 2.5)] {
            let oracle = pdf_via_joint_quadrature(SymmetryClass::Unitary, k, r, &q).unwrap().value;
            let closed = pdf_beta2_closed(k, r).unwrap();
            assert!((oracle - closed).abs() < 1e-8, "k={k} r={r}: {oracle} vs {closed}");
        }
        let at_zero = pdf_via_joint_quadrature(SymmetryClass::Unitary, 0.02, 0.0, &q).unwrap();
        assert_eq!(at_zero.value, 0.0);
    }

    /// Dawson's integral `exp(-z^2) int_0^z exp(t^2) dt` by quadrature.
    fn dawson(z: f64) -> f64 {
        let q = QuadratureSpec { abs_tol: 1e-15, rel_tol: 1e-13, ..QuadratureSpec::default() };
        crate::numerics::integrate_1d(|t| (t * t - z * z).exp(), 0.0, z.abs(), &q)
            .map(|i| i.value * z.signum())
            .unwrap_or(0.0)
    }

    #[test]
    fn master_integral_principal_value() {
        let q = QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-10, ..QuadratureSpec::default() };
        let p = MasterIntegralParams { alpha2: 1.0, eta: 0.0, gamma2: 4.0, u: 1.0, v: 2.0 };
        let pv = master_integral_pv(&p, &q).unwrap().value;
        assert!((pv - master_integral(&p).unwrap()).abs() < 1e-8, "{pv}");
        // independent closed form of the inner principal value through Dawson's function
        let gamma = 2.0f64;
        let inner = |x: f64, w: f64| {
            let l0 = -0.5 * w * x;
            -2.0 * core::f64::consts::PI.sqrt() * dawson(gamma * l0) * (-x * x).exp()
        };
        let with_dawson = crate::numerics::integrate_1d(
            |x| x.powi(4) * 0.5 * (inner(x, 1.0) - inner(x, 2.0)),
            0.0,
            12.0,
            &QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-10, ..QuadratureSpec::default() },
        )
        .unwrap()
        .value;
        assert!((with_dawson - pv).abs() < 1e-8);
        for (k, r) in [(0.3, 0.5), (0.7, 2.0)] {
            for (params, _) in analytic::term_parameters(k, r) {
                let a = master_integral_pv(&params, &q).unwrap().value;
                let b = master_integral(&params).unwrap();
                assert!((a - b).abs() < 1e-8 * b.abs().max(1e-3), "k={k} r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ks_helpers() {
        let s = [0.1, 0.4, 0.6, 0.9];
        let d = ks_distance(&s, |x| x.clamp(0.0, 1.0));
        assert_relative_eq!(d, 0.15, max_relative = 1e-12);
        assert_eq!(ks_two_sample(&s, &s), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        let rep = compare_sample(&[0.5, 1.5, 2.5], &[0.0, 1.0, 2.0], |x| (x / 3.0).min(1.0)).unwrap();
        assert_eq!(rep.candidate, alloc::vec![1.0 / 3.0, 1.0 / 3.0]);
        assert!(compare_sample(&[1.0], &[1.0, 1.0], |x| x).is_err());
        assert!(pdf_via_monte_carlo(SymmetryClass::Unitary, 0.5, &[0.0, 1.0], 10, 1, |x| x).is_err());
    }
}
