//! Self-checks run by `ratio-rmt validate`.
//!
//! The quick suite covers the limiting densities, inversion symmetry, the
//! master integral and the pinned fixtures. The full suite adds Monte Carlo
//! comparisons at 10^6 draws, the joint-density quadrature oracles and
//! normalization of the general densities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use rayon::prelude::*;
use ratio_rmt_core::analytic::{
    self, master_integral, pdf_beta1, pdf_beta2, Beta1Route, DensityTable, DispatchThresholds,
    MasterIntegralParams, RatioDensity, RatioGrid,
};
use ratio_rmt_core::ensemble::{Coupling, RatioStream, SymmetryClass};
use ratio_rmt_core::numerics::QuadratureSpec;
use ratio_rmt_core::oracle::{self, Fixture};
use serde::Serialize;

use crate::format::{real, sha256_hex};
use crate::CliError;

/// Quadrature settings the fixtures are pinned to.
pub const FIXTURE_QUAD: QuadratureSpec =
    QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-10, max_subdivisions: 400, truncation_sigmas: 8.0 };

pub const DEFAULT_FIXTURES: &str = include_str!("../fixtures/reference.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: String, measured: f64, tolerance: f64) -> Self {
        Self { passed: measured <= tolerance, name, measured, tolerance }
    }

    fn failed(name: String) -> Self {
        Self { name, passed: false, measured: f64::NAN, tolerance: 0.0 }
    }
}

pub fn fixture_hash() -> String {
    sha256_hex(&oracle::spec_fingerprint(&FIXTURE_QUAD))
}

pub fn parse_fixtures(text: &str) -> Result<Vec<Fixture>, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(format!("fixtures: {e}")))
}

fn class_of(beta: u8) -> Result<SymmetryClass, CliError> {
    SymmetryClass::from_beta(beta).ok_or_else(|| CliError::Parse(format!("fixtures: beta must be 1 or 2, got {beta}")))
}

/// Reference values from the joint-density oracle, independent of the
/// densities they later check.
pub fn generate_fixtures(pool: &rayon::ThreadPool) -> Result<Vec<Fixture>, CliError> {
    let mut cases = vec![];
    for beta in [1u8, 2] {
        for k in [0.2, 0.5, 0.8] {
            for r in [0.5, 1.0, 2.0] {
                cases.push((beta, k, r));
            }
        }
    }
    let hash = fixture_hash();
    pool.install(|| {
        cases
            .par_iter()
            .map(|&(beta, k, r)| {
                let v = oracle::pdf_via_joint_quadrature(class_of(beta)?, k, r, &FIXTURE_QUAD)
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                Ok(Fixture { beta, k, r, value: v.value, abs_err_bound: (10.0 * v.abs_err).max(1e-8), spec_hash: hash.clone() })
            })
            .collect()
    })
}

fn fixture_check(f: &Fixture, hash: &str) -> Check {
    let name = format!("fixture/beta{}/k={}/r={}", f.beta, f.k, f.r);
    if f.spec_hash != hash {
        return Check::failed(format!("{name}/spec-hash"));
    }
    let th = DispatchThresholds::default();
    let value = match f.beta {
        1 => pdf_beta1(f.k, f.r, &FIXTURE_QUAD, &th),
        2 => pdf_beta2(f.k, f.r, &th),
        _ => return Check::failed(name),
    };
    match value {
        Ok(v) => Check::new(name, (v - f.value).abs(), f.abs_err_bound),
        Err(_) => Check::failed(name),
    }
}

fn goe(r: f64) -> f64 {
    27.0 / 8.0 * (r * r + r) / (r * r + r + 1.0).powf(2.5)
}

fn gue(r: f64) -> f64 {
    81.0 * 3f64.sqrt() / (4.0 * PI) * (r * r + r).powi(2) / (r * r + r + 1.0).powi(4)
}

fn quick_checks(fixtures: &[Fixture], pool: &rayon::ThreadPool) -> Vec<Check> {
    let th = DispatchThresholds::default();
    let q = QuadratureSpec::default();
    let mut out = vec![];
    for k in [0.9995, 1.0] {
        for r in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let p1 = pdf_beta1(k, r, &q, &th).unwrap_or(f64::NAN);
            out.push(Check::new(format!("limit/beta1/k={k}/r={r}"), (p1 - goe(r)).abs(), 1e-12));
            let p2 = pdf_beta2(k, r, &th).unwrap_or(f64::NAN);
            out.push(Check::new(format!("limit/beta2/k={k}/r={r}"), (p2 - gue(r)).abs(), 1e-12));
        }
    }
    let p1 = analytic::pdf_beta1_k0(0.0).unwrap_or(f64::NAN);
    out.push(Check::new("k0/beta1/r=0".into(), (p1 - FRAC_1_SQRT_2).abs(), 1e-12));
    let p2 = analytic::pdf_beta2_k0(0.0).unwrap_or(f64::NAN);
    out.push(Check::new("k0/beta2/r=0".into(), (p2 - 2.0 / PI).abs(), 1e-12));
    let tight = QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-12, ..q };
    for (name, f) in [
        ("k0/beta1/mass", analytic::pdf_beta1_k0 as fn(f64) -> _),
        ("k0/beta2/mass", analytic::pdf_beta2_k0),
    ] {
        let m = analytic::normalization(f, &tight).map_or(f64::NAN, |i| (i.value - 1.0).abs());
        out.push(Check::new(name.into(), m, 1e-9));
    }
    for k in [0.1, 0.4, 0.9] {
        for r in [0.2, 0.5, 2.0, 5.0] {
            let d = pdf_beta2(k, r, &th).and_then(|a| Ok(a - pdf_beta2(k, 1.0 / r, &th)? / (r * r)));
            out.push(Check::new(format!("inversion/beta2/k={k}/r={r}"), d.map_or(f64::NAN, f64::abs), 1e-6));
        }
    }
    let p = MasterIntegralParams { alpha2: 1.0, eta: 0.0, gamma2: 4.0, u: 1.0, v: 2.0 };
    let swapped = MasterIntegralParams { u: 2.0, v: 1.0, ..p };
    let closed = master_integral(&p).unwrap_or(f64::NAN);
    let pv = oracle::master_integral_pv(&p, &FIXTURE_QUAD).map_or(f64::NAN, |i| i.value);
    out.push(Check::new("master/principal-value".into(), (closed - pv).abs(), 1e-6));
    let exchange = master_integral(&swapped).map_or(f64::NAN, |m| (m - closed).abs());
    out.push(Check::new("master/exchange".into(), exchange, 1e-14));

    let hash = fixture_hash();
    let fixture_checks: Vec<Check> = pool.install(|| fixtures.par_iter().map(|f| fixture_check(f, &hash)).collect());
    if fixture_checks.is_empty() {
        out.push(Check::failed("fixtures/present".into()));
    }
    out.extend(fixture_checks);
    out
}

pub fn mc_check(class: SymmetryClass, k: f64, pool: &rayon::ThreadPool) -> Check {
    const N: usize = 1_000_000;
    const CHUNK: usize = 1 << 14;
    let name = format!("monte-carlo-ks/beta{}/k={k}", class.beta());
    let Ok(coupling) = Coupling::new(k) else { return Check::failed(name) };
    let stream = RatioStream::new(class, coupling, 20_240_917);
    let chunks: Vec<_> = pool.install(|| {
        (0..N)
            .step_by(CHUNK)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&s| stream.ratios(s as u64, (s + CHUNK).min(N) as u64))
            .collect()
    });
    let mut ratios = Vec::with_capacity(N);
    for c in chunks {
        match c {
            Ok((r, _)) => ratios.extend(r),
            Err(_) => return Check::failed(name),
        }
    }
    let table = RatioDensity::new(class, k)
        .map(|d| d.with_route(Beta1Route::Reduced))
        .and_then(|d| DensityTable::from_density(&d, RatioGrid::default()));
    let Ok(table) = table else { return Check::failed(name) };
    let total = table.total_mass();
    let ks = oracle::ks_distance(&oracle::sorted(&ratios), |r| table.cdf(r) / total);
    Check::new(name, ks, 0.003)
}

pub fn oracle_check(class: SymmetryClass, k: f64, tolerance: f64) -> Check {
    let name = format!("joint-oracle/beta{}/k={k}", class.beta());
    let th = DispatchThresholds::default();
    let q = QuadratureSpec::default();
    let grid = oracle::log_spaced(0.05, 5.0, 25);
    let report = oracle::compare_densities(
        |r| match class {
            SymmetryClass::Orthogonal => analytic::pdf_beta1_integral(k, r, &q).map(|i| i.value),
            SymmetryClass::Unitary => pdf_beta2(k, r, &th),
        },
        |r| oracle::pdf_via_joint_quadrature(class, k, r, &q).map(|i| i.value).map_err(|e| match e {
            oracle::OracleError::Analytic(a) => a,
            _ => analytic::AnalyticError::NonFinite(f64::NAN),
        }),
        &grid,
    );
    match report {
        Ok(rep) => Check::new(name, rep.sup_norm, tolerance),
        Err(_) => Check::failed(name),
    }
}

pub fn normalization_check(class: SymmetryClass, k: f64, tolerance: f64) -> Check {
    let name = format!("normalization/beta{}/k={k}", class.beta());
    let q = QuadratureSpec::default();
    let d = match RatioDensity::new(class, k) {
        Ok(d) => d.with_quadrature(q),
        Err(_) => return Check::failed(name),
    };
    match analytic::normalization(|r| d.pdf(r), &q) {
        Ok(i) => Check::new(name, (i.value - 1.0).abs(), tolerance),
        Err(_) => Check::failed(name),
    }
}

fn full_checks(pool: &rayon::ThreadPool) -> Vec<Check> {
    let mut out = vec![];
    for class in [SymmetryClass::Orthogonal, SymmetryClass::Unitary] {
        for k in [0.0, 0.3, 0.7, 1.0] {
            out.push(mc_check(class, k, pool));
        }
    }
    let mut jobs: Vec<(SymmetryClass, f64, bool)> = vec![];
    for k in [0.2, 0.5, 0.8] {
        jobs.push((SymmetryClass::Unitary, k, true));
    }
    for k in [0.2, 0.5] {
        jobs.push((SymmetryClass::Orthogonal, k, true));
    }
    for k in [0.1, 0.4, 0.9] {
        jobs.push((SymmetryClass::Unitary, k, false));
        jobs.push((SymmetryClass::Orthogonal, k, false));
    }
    let heavy: Vec<Check> = pool.install(|| {
        jobs.par_iter()
            .map(|&(class, k, joint)| match (joint, class) {
                (true, SymmetryClass::Unitary) => oracle_check(class, k, 1e-6),
                (true, SymmetryClass::Orthogonal) => oracle_check(class, k, 2e-4),
                (false, SymmetryClass::Unitary) => normalization_check(class, k, 1e-6),
                (false, SymmetryClass::Orthogonal) => normalization_check(class, k, 1e-3),
            })
            .collect()
    });
    out.extend(heavy);
    out
}

pub fn run(suite: Suite, fixtures: &[Fixture], pool: &rayon::ThreadPool) -> Vec<Check> {
    let mut checks = quick_checks(fixtures, pool);
    if suite == Suite::Full {
        checks.extend(full_checks(pool));
    }
    checks
}

pub fn report_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,status,measured,tolerance\n");
    for c in checks {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            real(c.measured),
            real(c.tolerance)
        );
    }
    s
}

pub fn report_json(checks: &[Check]) -> String {
    serde_json::to_string_pretty(checks).expect("checks serialize") + "\n"
}
