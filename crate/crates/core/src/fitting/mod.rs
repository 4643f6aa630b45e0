//! Estimating the coupling `k` from a ratio sample.
//!
//! A [`CouplingModel`] caches `ln p(k; r)` on a log-spaced ratio grid for a
//! log-spaced set of couplings inside the coupled regime, plus one row for
//! each limiting density. Natural splines are linear in their data, so the
//! log-likelihood of a whole sample at every coupling node reduces to a dot
//! product with per-node weights aggregated once from the sample. Refits of
//! bootstrap resamples only re-aggregate the weights.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{
    AnalyticError, Beta1Route, DensityTable, DispatchThresholds, RatioDensity, RatioGrid, Regime,
};
use crate::ensemble::{RatioSample, SymmetryClass};
use crate::numerics::{gauss_legendre, CubicSpline, QuadratureSpec, SplineWeights, UniformGrid};
use crate::oracle::{ks_distance, sorted};

/// `ln(1e-300)`: log-density terms below this are floored and counted.
pub const LN_FLOOR: f64 = -690.775_527_898_213_7;
/// Resolution of the coarse scan that brackets the maximum.
pub const SCAN_STEP: f64 = 0.01;
/// Samples smaller than this are fitted but flagged.
pub const SMALL_SAMPLE: usize = 100;
/// Relative spread below which the objective counts as flat.
pub const FLAT_TOLERANCE: f64 = 1e-9;

/// A second likelihood maximum within this many log-likelihood units of the
/// best one makes the fit multimodal: half the 95% quantile of chi-squared
/// with one degree of freedom.
pub const LIKELIHOOD_MARGIN: f64 = 1.920_729_410_347_062;

/// Histogram counterpart of [`LIKELIHOOD_MARGIN`], as a fraction of the
/// objective's range over the bounds.
pub const HISTOGRAM_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("empty sample")]
    EmptySample,
    #[error("ratio #{index} = {value} is not finite and nonnegative")]
    Ratio { index: usize, value: f64 },
    #[error("bounds must satisfy 0 <= low < high <= 1, got ({low}, {high})")]
    Bounds { low: f64, high: f64 },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("histogram: {0}")]
    Histogram(&'static str),
    #[error("model needs at least 4 coupling nodes, got {0}")]
    Nodes(usize),
    /// The objective does not distinguish couplings inside the bounds.
    #[error("objective is flat across the bounds (spread {spread:e})")]
    NonIdentifiable { spread: f64 },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FitMethod {
    #[cfg_attr(feature = "serde", serde(rename = "MLE"))]
    Mle,
    #[cfg_attr(feature = "serde", serde(rename = "histogram-least-squares"))]
    HistogramLeastSquares,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub class: SymmetryClass,
    pub method: FitMethod,
    pub k_hat: f64,
    pub log_likelihood: f64,
    pub ks_statistic: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_used: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    /// Terms of the log-likelihood at `k_hat` floored at [`LN_FLOOR`].
    pub floored_terms: usize,
    /// Fewer than [`SMALL_SAMPLE`] ratios.
    pub small_sample: bool,
    /// The coarse scan found more than one local maximum.
    pub multimodal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub bounds: (f64, f64),
    pub tol: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bounds: (0.0, 1.0), tol: 1e-4, bootstrap: 200, seed: 0 }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<(), FitError> {
        let (low, high) = self.bounds;
        if !(0.0 <= low && low < high && high <= 1.0) {
            return Err(FitError::Bounds { low, high });
        }
        if !(self.tol > 0.0) {
            return Err(FitError::Tolerance(self.tol));
        }
        Ok(())
    }
}

/// Binned ratios. Values outside `[edges[0], edges[last])` go to
/// `overflow_count`; bins are half-open.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overflow_count: u64,
    /// `counts / (total * width)` with the total including overflow.
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow_count
    }
}

/// 50 uniform bins on `[0, 5]`.
pub fn default_edges() -> Vec<f64> {
    (0..=50).map(|i| 0.1 * i as f64).collect()
}

pub fn build_histogram(ratios: &[f64], edges: &[f64]) -> Result<Histogram, FitError> {
    if edges.len() < 2 {
        return Err(FitError::Histogram("need at least two edges"));
    }
    if !edges.iter().all(|e| e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::Histogram("edges must be finite and strictly ascending"));
    }
    let last = edges[edges.len() - 1];
    let mut counts = vec![0u64; edges.len() - 1];
    let mut overflow = 0u64;
    for &r in ratios {
        if r >= edges[0] && r < last {
            counts[edges.partition_point(|&e| e <= r) - 1] += 1;
        } else {
            overflow += 1;
        }
    }
    let total = ratios.len() as f64;
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| if total > 0.0 { c as f64 / (total * (w[1] - w[0])) } else { 0.0 })
        .collect();
    Ok(Histogram { edges: edges.to_vec(), counts, overflow_count: overflow, density })
}

fn check_ratios(ratios: &[f64]) -> Result<(), FitError> {
    if ratios.is_empty() {
        return Err(FitError::EmptySample);
    }
    match ratios.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
        Some(index) => Err(FitError::Ratio { index, value: ratios[index] }),
        None => Ok(()),
    }
}

fn density_at(class: SymmetryClass, k: f64, quad: QuadratureSpec, thresholds: DispatchThresholds) -> Result<RatioDensity, AnalyticError> {
    Ok(RatioDensity::new(class, k)?
        .with_quadrature(quad)
        .with_thresholds(thresholds)
        .with_route(Beta1Route::Reduced))
}

/// `ln p`, floored. A quadrature that stops short still yields its estimate.
fn floored_ln_pdf(d: &RatioDensity, r: f64) -> Result<(f64, bool), AnalyticError> {
    let p = d.pdf(r).or_else(|e| e.estimate().ok_or(e))?;
    let lp = if p > 0.0 { libm::log(p) } else { f64::NEG_INFINITY };
    Ok(if lp < LN_FLOOR { (LN_FLOOR, true) } else { (lp, false) })
}

/// Sum of log-density terms with the number of floored ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub floored: usize,
}

/// `sum ln p(k; r_i)` from a density table at `k`; ratios outside the table
/// are evaluated directly.
pub fn log_likelihood(sample: &RatioSample, class: SymmetryClass, k: f64) -> Result<LogLikelihood, FitError> {
    check_ratios(&sample.ratios)?;
    let d = density_at(class, k, QuadratureSpec::default(), DispatchThresholds::default())?;
    let grid = RatioGrid::default();
    let table = DensityTable::from_density(&d, grid)?;
    let mut ll = LogLikelihood { value: 0.0, floored: 0 };
    for &r in &sample.ratios {
        let (lp, floored) = if r >= grid.r_min && r <= grid.r_max {
            (table.ln_pdf(r).max(LN_FLOOR), table.ln_pdf(r) < LN_FLOOR)
        } else {
            floored_ln_pdf(&d, r)?
        };
        ll.value += lp;
        ll.floored += floored as usize;
    }
    Ok(ll)
}

/// Kolmogorov-Smirnov distance between the sample and the model CDF at `k`.
pub fn ks_statistic(sample: &RatioSample, class: SymmetryClass, k: f64) -> Result<f64, FitError> {
    check_ratios(&sample.ratios)?;
    let d = density_at(class, k, QuadratureSpec::default(), DispatchThresholds::default())?;
    ks_against(&sorted(&sample.ratios), &d)
}

fn ks_against(sorted: &[f64], d: &RatioDensity) -> Result<f64, FitError> {
    let table = DensityTable::from_density(d, RatioGrid::default())?;
    let total = table.total_mass();
    Ok(ks_distance(sorted, |r| table.cdf(r) / total).clamp(0.0, 1.0))
}

/// Grid and quadrature settings of a [`CouplingModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub grid: RatioGrid,
    /// Log-spaced couplings on `[k_low, k_high]`.
    pub k_nodes: usize,
    pub quad: QuadratureSpec,
    pub thresholds: DispatchThresholds,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            grid: RatioGrid::default(),
            k_nodes: 120,
            quad: QuadratureSpec::default(),
            thresholds: DispatchThresholds::default(),
        }
    }
}

/// Tabulated `ln p(k; r)` over couplings and ratios for one class.
#[derive(Debug, Clone)]
pub struct CouplingModel {
    class: SymmetryClass,
    spec: ModelSpec,
    r_grid: UniformGrid,
    k_grid: UniformGrid,
    /// Decoupled row, one row per coupling node, standard row.
    rows: Vec<CubicSpline>,
    /// Second derivatives along `ln k` for each ratio node, by coupling node.
    k_curvatures: Vec<Vec<f64>>,
}

/// A sample located on the model grid.
struct Prepared<'a> {
    ratios: &'a [f64],
    weights: Vec<Option<SplineWeights>>,
    /// Sample index and floored `ln p` at every row, for ratios off the grid.
    outside: Vec<(usize, Vec<f64>)>,
}

/// Objective values at every row plus the spline along the coupling nodes.
struct Curve {
    decoupled: f64,
    coupled: CubicSpline,
    standard: f64,
    thresholds: DispatchThresholds,
}

impl Curve {
    fn eval(&self, k: f64) -> f64 {
        match self.thresholds.regime(k) {
            Regime::Decoupled => self.decoupled,
            Regime::Standard => self.standard,
            Regime::Coupled => self.coupled.eval(libm::log(k)),
        }
    }
}

impl CouplingModel {
    pub fn build(class: SymmetryClass, spec: ModelSpec) -> Result<Self, FitError> {
        spec.grid.validate()?;
        spec.thresholds.validate()?;
        spec.quad.validate().map_err(AnalyticError::from)?;
        if spec.k_nodes < 4 {
            return Err(FitError::Nodes(spec.k_nodes));
        }
        let th = spec.thresholds;
        let k_grid = UniformGrid::spanning(libm::log(th.k_low), libm::log(th.k_high), spec.k_nodes);
        let r_grid = spec.grid.log_grid();
        let ratios = spec.grid.ratios();
        let mut ks = vec![0.0];
        ks.extend((0..spec.k_nodes).map(|j| libm::exp(k_grid.node(j))));
        ks.push(1.0);
        let mut rows = Vec::with_capacity(ks.len());
        for (j, &k) in ks.iter().enumerate() {
            // pin the node couplings to the coupled regime despite rounding
            let d = density_at(class, k, spec.quad, th)?;
            let d = if j == 0 || j == ks.len() - 1 { d } else { with_coupled(d) };
            let mut y = Vec::with_capacity(ratios.len());
            for &r in &ratios {
                let p = d.pdf(r).or_else(|e| e.estimate().ok_or(e))?;
                if !(p > 0.0 && p.is_finite()) {
                    return Err(AnalyticError::Table("density must be positive on the grid").into());
                }
                y.push(libm::log(p));
            }
            rows.push(CubicSpline::new(r_grid, y));
        }
        let mut k_curvatures = vec![vec![0.0; r_grid.len]; spec.k_nodes];
        let mut column = vec![0.0; spec.k_nodes];
        for i in 0..r_grid.len {
            for (j, c) in column.iter_mut().enumerate() {
                *c = rows[1 + j].values()[i];
            }
            for (j, m) in CubicSpline::second_derivatives(&k_grid, &column).into_iter().enumerate() {
                k_curvatures[j][i] = m;
            }
        }
        Ok(Self { class, spec, r_grid, k_grid, rows, k_curvatures })
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn density(&self, k: f64) -> Result<RatioDensity, AnalyticError> {
        density_at(self.class, k, self.spec.quad, self.spec.thresholds)
    }

    /// The interpolated row `ln p(k; .)` as a spline in `ln r`.
    pub fn row_at(&self, k: f64) -> Result<CubicSpline, FitError> {
        let d = self.density(k)?;
        let last = self.rows.len() - 1;
        Ok(match d.regime() {
            Regime::Decoupled => self.rows[0].clone(),
            Regime::Standard => self.rows[last].clone(),
            Regime::Coupled => {
                let w = CubicSpline::weights(&self.k_grid, libm::log(k));
                let j = w.index;
                let (y0, y1) = (self.rows[1 + j].values(), self.rows[2 + j].values());
                let (m0, m1) = (&self.k_curvatures[j], &self.k_curvatures[j + 1]);
                let y = (0..self.r_grid.len)
                    .map(|i| w.a * y0[i] + w.b * y1[i] + w.c * m0[i] + w.d * m1[i])
                    .collect();
                CubicSpline::new(self.r_grid, y)
            }
        })
    }

    /// Interpolated `ln p(k; r)` on the grid, direct evaluation off it.
    pub fn ln_pdf(&self, k: f64, r: f64) -> Result<f64, FitError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(AnalyticError::Ratio(r).into());
        }
        if self.on_grid(r) {
            Ok(self.row_at(k)?.eval(libm::log(r)))
        } else {
            Ok(floored_ln_pdf(&self.density(k)?, r)?.0)
        }
    }

    fn on_grid(&self, r: f64) -> bool {
        r >= self.spec.grid.r_min && r <= self.spec.grid.r_max
    }

    fn prepare<'a>(&self, ratios: &'a [f64]) -> Result<Prepared<'a>, FitError> {
        check_ratios(ratios)?;
        let mut weights = Vec::with_capacity(ratios.len());
        let mut outside = Vec::new();
        let mut densities = None;
        for (s, &r) in ratios.iter().enumerate() {
            if self.on_grid(r) {
                weights.push(Some(CubicSpline::weights(&self.r_grid, libm::log(r))));
                continue;
            }
            weights.push(None);
            let ds = match &densities {
                Some(ds) => ds,
                None => densities.insert(self.row_densities()?),
            };
            let mut v = Vec::with_capacity(ds.len());
            for d in ds.iter() {
                v.push(floored_ln_pdf(d, r)?.0);
            }
            outside.push((s, v));
        }
        Ok(Prepared { ratios, weights, outside })
    }

    fn row_densities(&self) -> Result<Vec<RatioDensity>, AnalyticError> {
        let last = self.rows.len() - 1;
        (0..self.rows.len())
            .map(|j| {
                let k = match j {
                    0 => 0.0,
                    j if j == last => 1.0,
                    j => libm::exp(self.k_grid.node(j - 1)),
                };
                let d = self.density(k)?;
                Ok(if j == 0 || j == last { d } else { with_coupled(d) })
            })
            .collect()
    }

    /// Log-likelihood curve for the sample weighted by `multiplicity`.
    fn likelihood_curve(&self, p: &Prepared, multiplicity: Option<&[u32]>) -> Curve {
        let n_r = self.r_grid.len;
        let (mut wy, mut wm) = (vec![0.0; n_r], vec![0.0; n_r]);
        for (s, w) in p.weights.iter().enumerate() {
            let Some(w) = w else { continue };
            let m = multiplicity.map_or(1.0, |m| m[s] as f64);
            if m == 0.0 {
                continue;
            }
            wy[w.index] += m * w.a;
            wy[w.index + 1] += m * w.b;
            wm[w.index] += m * w.c;
            wm[w.index + 1] += m * w.d;
        }
        let values: Vec<f64> = self
            .rows
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let grid_part: f64 = row
                    .values()
                    .iter()
                    .zip(row.curvatures())
                    .zip(wy.iter().zip(&wm))
                    .map(|((y, m), (a, c))| a * y + c * m)
                    .sum();
                let off: f64 = p
                    .outside
                    .iter()
                    .map(|(s, v)| multiplicity.map_or(1.0, |m| m[*s] as f64) * v[j])
                    .sum();
                grid_part + off
            })
            .collect();
        let last = values.len() - 1;
        Curve {
            decoupled: values[0],
            coupled: CubicSpline::new(self.k_grid, values[1..last].to_vec()),
            standard: values[last],
            thresholds: self.spec.thresholds,
        }
    }

    /// Log-likelihood of `ratios` at `k` from the cached grid.
    pub fn log_likelihood(&self, ratios: &[f64], k: f64) -> Result<LogLikelihood, FitError> {
        self.density(k)?;
        let p = self.prepare(ratios)?;
        let value = self.likelihood_curve(&p, None).eval(k);
        Ok(LogLikelihood { value, floored: self.floored_at(&p, k)? })
    }

    fn floored_at(&self, p: &Prepared, k: f64) -> Result<usize, FitError> {
        if p.outside.is_empty() {
            return Ok(0);
        }
        let d = self.density(k)?;
        let mut n = 0;
        for (s, _) in &p.outside {
            n += floored_ln_pdf(&d, p.ratios[*s])?.1 as usize;
        }
        Ok(n)
    }

    /// Maximum-likelihood coupling with a percentile bootstrap interval.
    pub fn fit_mle(&self, ratios: &[f64], opts: &FitOptions) -> Result<FitResult, FitError> {
        opts.validate()?;
        let p = self.prepare(ratios)?;
        let curve = self.likelihood_curve(&p, None);
        let best = maximize(|k| curve.eval(k), opts.bounds, opts.tol);
        if best.flat {
            return Err(FitError::NonIdentifiable { spread: best.spread });
        }
        let (ci_low, ci_high) = bootstrap(ratios.len(), opts, best.k, |m| {
            let c = self.likelihood_curve(&p, Some(m));
            Ok(maximize(|k| c.eval(k), opts.bounds, opts.tol).k)
        })?;
        let d = self.density(best.k)?;
        Ok(FitResult {
            class: self.class,
            method: FitMethod::Mle,
            k_hat: best.k,
            log_likelihood: best.value,
            ks_statistic: ks_against(&sorted(ratios), &d)?,
            ci_low,
            ci_high,
            n_used: ratios.len(),
            bootstrap_resamples: opts.bootstrap,
            seed: opts.seed,
            floored_terms: self.floored_at(&p, best.k)?,
            small_sample: ratios.len() < SMALL_SAMPLE,
            multimodal: best.competing(LIKELIHOOD_MARGIN) > 1,
        })
    }

    /// Mean model density over each bin.
    fn binned(&self, k: f64, edges: &[f64]) -> Result<Vec<f64>, FitError> {
        let row = self.row_at(k)?;
        Ok(edges
            .windows(2)
            .map(|w| gauss_legendre(|r| if r > 0.0 { libm::exp(row.eval(libm::log(r))) } else { 0.0 }, w[0], w[1]) / (w[1] - w[0]))
            .collect())
    }

    fn histogram_objective(&self, h: &Histogram) -> impl Fn(f64) -> f64 + '_ {
        let h = h.clone();
        move |k| match self.binned(k, &h.edges) {
            Ok(m) => -m.iter().zip(&h.density).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Least-squares fit of the binned model density to the sample
    /// histogram.
    pub fn fit_histogram(&self, ratios: &[f64], edges: &[f64], opts: &FitOptions) -> Result<FitResult, FitError> {
        opts.validate()?;
        check_ratios(ratios)?;
        let h = build_histogram(ratios, edges)?;
        let best = maximize(self.histogram_objective(&h), opts.bounds, opts.tol);
        if best.flat {
            return Err(FitError::NonIdentifiable { spread: best.spread });
        }
        let mut resample = Vec::with_capacity(ratios.len());
        let (ci_low, ci_high) = bootstrap(ratios.len(), opts, best.k, |m| {
            resample.clear();
            for (s, &c) in m.iter().enumerate() {
                resample.extend(core::iter::repeat(ratios[s]).take(c as usize));
            }
            let hb = build_histogram(&resample, edges)?;
            Ok(maximize(self.histogram_objective(&hb), opts.bounds, opts.tol).k)
        })?;
        let p = self.prepare(ratios)?;
        let d = self.density(best.k)?;
        Ok(FitResult {
            class: self.class,
            method: FitMethod::HistogramLeastSquares,
            k_hat: best.k,
            log_likelihood: self.likelihood_curve(&p, None).eval(best.k),
            ks_statistic: ks_against(&sorted(ratios), &d)?,
            ci_low,
            ci_high,
            n_used: ratios.len(),
            bootstrap_resamples: opts.bootstrap,
            seed: opts.seed,
            floored_terms: self.floored_at(&p, best.k)?,
            small_sample: ratios.len() < SMALL_SAMPLE,
            multimodal: best.competing(HISTOGRAM_MARGIN * best.spread) > 1,
        })
    }
}

fn with_coupled(mut d: RatioDensity) -> RatioDensity {
    let k = d.k.clamp(d.thresholds.k_low, d.thresholds.k_high);
    // exp(ln k) can land a rounding error outside the open interval
    d.k = if k <= d.thresholds.k_low {
        libm::nextafter(d.thresholds.k_low, 1.0)
    } else if k >= d.thresholds.k_high {
        libm::nextafter(d.thresholds.k_high, 0.0)
    } else {
        k
    };
    d
}

/// Percentile 95% interval of refits on `n`-point resamples with
/// replacement, widened to contain `center`. Resample `b` draws from ChaCha8
/// stream `b` of the seed.
fn bootstrap<F>(n: usize, opts: &FitOptions, center: f64, mut refit: F) -> Result<(f64, f64), FitError>
where
    F: FnMut(&[u32]) -> Result<f64, FitError>,
{
    if opts.bootstrap == 0 {
        return Ok((center, center));
    }
    let mut fits = Vec::with_capacity(opts.bootstrap);
    let mut counts = vec![0u32; n];
    for b in 0..opts.bootstrap {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(b as u64);
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        fits.push(refit(&counts)?);
    }
    fits.sort_by(f64::total_cmp);
    Ok((quantile(&fits, 0.025).min(center), quantile(&fits, 0.975).max(center)))
}

/// Linearly interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = libm::floor(pos) as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

#[derive(Debug, Clone, PartialEq)]
struct Optimum {
    k: f64,
    value: f64,
    flat: bool,
    spread: f64,
    local_maxima: usize,
    peaks: Vec<f64>,
}

impl Optimum {
    /// Local maxima of the scan within `margin` of the best value.
    fn competing(&self, margin: f64) -> usize {
        self.peaks.iter().filter(|&&v| v >= self.value - margin).count()
    }
}

/// Scan at [`SCAN_STEP`], then golden-section search inside the bracket of
/// the best scan point. The scan also counts local maxima, so multimodal
/// objectives still return the global maximum of the scan's bracket.
fn maximize<F: Fn(f64) -> f64>(f: F, bounds: (f64, f64), tol: f64) -> Optimum {
    let (a, b) = bounds;
    let steps = (libm::ceil((b - a) / SCAN_STEP) as usize).max(2);
    let ks: Vec<f64> = (0..=steps).map(|i| a + (b - a) * i as f64 / steps as f64).collect();
    let vs: Vec<f64> = ks.iter().map(|&k| f(k)).collect();
    let mut best = 0;
    for i in 1..vs.len() {
        if vs[i] > vs[best] {
            best = i;
        }
    }
    let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = vs[best] - lo;
    let flat = !(spread > FLAT_TOLERANCE * libm::fabs(vs[best]).max(1.0));

    // local maxima after merging runs of equal values
    let mut plateau: Vec<f64> = Vec::with_capacity(vs.len());
    for &v in &vs {
        if plateau.last() != Some(&v) {
            plateau.push(v);
        }
    }
    let peaks: Vec<f64> = (0..plateau.len())
        .filter(|&i| (i == 0 || plateau[i] > plateau[i - 1]) && (i + 1 == plateau.len() || plateau[i] > plateau[i + 1]))
        .map(|i| plateau[i])
        .collect();
    let local_maxima = peaks.len();

    let (mut x0, mut x3) = (ks[best.saturating_sub(1)], ks[(best + 1).min(steps)]);
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while x3 - x0 > tol {
        if f1 >= f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - g * (x3 - x0);
            f1 = f(x1);
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + g * (x3 - x0);
            f2 = f(x2);
        }
    }
    let (k, value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    let (k, value) = if value >= vs[best] { (k, value) } else { (ks[best], vs[best]) };
    Optimum { k, value, flat, spread, local_maxima, peaks }
}

/// Maximum-likelihood fit with the default model grid.
pub fn fit_k_mle(sample: &RatioSample, class: SymmetryClass, opts: &FitOptions) -> Result<FitResult, FitError> {
    check_ratios(&sample.ratios)?;
    CouplingModel::build(class, ModelSpec::default())?.fit_mle(&sample.ratios, opts)
}

/// Histogram least-squares fit on `edges` with the default model grid.
pub fn fit_k_histogram(
    sample: &RatioSample,
    class: SymmetryClass,
    edges: &[f64],
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    check_ratios(&sample.ratios)?;
    CouplingModel::build(class, ModelSpec::default())?.fit_histogram(&sample.ratios, edges, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::pdf_beta2;
    use crate::ensemble::{sample_ratios, Coupling, RatioMeta, RatioSource};
    use proptest::prelude::*;

    fn sample_of(ratios: Vec<f64>) -> RatioSample {
        RatioSample {
            ratios,
            meta: RatioMeta {
                class: None,
                source: RatioSource::External { label: "test".into() },
                seed: None,
                n_requested: 0,
                n_discarded: 0,
            },
        }
    }

    #[test]
    fn histogram_examples() {
        let h = build_histogram(&[0.5, 1.5, 2.5], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.overflow_count, 1);
        assert_eq!(h.total(), 3);
        let e = build_histogram(&[], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.counts, vec![0, 0]);
        assert_eq!(e.density, vec![0.0, 0.0]);
        assert!(build_histogram(&[1.0], &[0.0]).is_err());
        assert!(build_histogram(&[1.0], &[0.0, 0.0, 1.0]).is_err());
        assert_eq!(default_edges().len(), 51);
    }

    #[test]
    fn likelihood_examples() {
        let one = sample_of(vec![1.0]);
        let ll = log_likelihood(&one, SymmetryClass::Unitary, 1.0).unwrap();
        // ln(sqrt(3)/pi)
        assert!((ll.value - (-0.595_423_741_515_345_3)).abs() < 1e-6, "{}", ll.value);
        assert_eq!(ll.floored, 0);
        assert_eq!(log_likelihood(&sample_of(vec![]), SymmetryClass::Unitary, 0.5), Err(FitError::EmptySample));
        let zero = log_likelihood(&sample_of(vec![0.0]), SymmetryClass::Unitary, 0.5).unwrap();
        assert_eq!((zero.value, zero.floored), (LN_FLOOR, 1));

        // the unitary density barely moves between k = 0.5 and 0.9, so the
        // ordering needs more than 10^4 ratios to be reliable
        let s = sample_ratios(SymmetryClass::Unitary, Coupling::new(0.5).unwrap(), 100_000, 11).unwrap();
        let at = |k| log_likelihood(&s, SymmetryClass::Unitary, k).unwrap().value;
        assert!(at(0.5) > at(0.9));
    }

    #[test]
    fn model_interpolates_between_nodes() {
        let model = CouplingModel::build(SymmetryClass::Unitary, ModelSpec::default()).unwrap();
        let th = DispatchThresholds::default();
        let mut worst: f64 = 0.0;
        for k in [0.021, 0.0345, 0.11, 0.333, 0.61, 0.85, 0.97, 0.995] {
            let row = model.row_at(k).unwrap();
            for r in [1.5e-3, 0.013, 0.2, 0.77, 1.9, 12.0, 470.0] {
                let exact = pdf_beta2(k, r, &th).unwrap().ln();
                worst = worst.max((row.eval(r.ln()) - exact).abs());
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn grid_likelihood_matches_direct_sum() {
        let model = CouplingModel::build(SymmetryClass::Unitary, ModelSpec::default()).unwrap();
        let ratios = [1e-5, 0.004, 0.3, 1.0, 2.5, 40.0, 3e3];
        for k in [0.0, 0.3, 0.7, 1.0] {
            let grid = model.log_likelihood(&ratios, k).unwrap().value;
            let th = DispatchThresholds::default();
            let direct: f64 = ratios.iter().map(|&r| pdf_beta2(k, r, &th).unwrap().ln()).sum();
            assert!((grid - direct).abs() < 1e-3, "k={k}: {grid} vs {direct}");
        }
    }

    #[test]
    fn maximizer_behaviour() {
        let o = maximize(|k| -(k - 0.4137) * (k - 0.4137), (0.0, 1.0), 1e-6);
        assert!((o.k - 0.4137).abs() < 1e-6);
        assert_eq!(o.local_maxima, 1);
        assert!(!o.flat);
        assert!(maximize(|_| 3.0, (0.0, 1.0), 1e-4).flat);
        let two = maximize(|k| libm::cos(4.0 * core::f64::consts::PI * k) + 0.1 * k, (0.0, 1.0), 1e-6);
        assert!(two.local_maxima >= 2);
        assert_eq!(two.competing(0.5), 3);
        assert_eq!(two.competing(0.02), 1);
        assert!((two.k - 1.0).abs() < 1e-3, "{}", two.k);
        let edge = maximize(|k| k, (0.2, 0.6), 1e-6);
        assert!((edge.k - 0.6).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_unitary_coupling() {
        let model = CouplingModel::build(SymmetryClass::Unitary, ModelSpec::default()).unwrap();
        let s = sample_ratios(SymmetryClass::Unitary, Coupling::new(0.5).unwrap(), 50_000, 7).unwrap();
        let opts = FitOptions { bootstrap: 50, seed: 3, ..FitOptions::default() };
        let fit = model.fit_mle(&s.ratios, &opts).unwrap();
        assert!((0.47..=0.53).contains(&fit.k_hat), "{fit:?}");
        assert!(fit.ci_low <= fit.k_hat && fit.k_hat <= fit.ci_high);
        assert!(fit.ks_statistic < 0.01);
        assert!(!fit.small_sample);
        assert_eq!(model.fit_mle(&s.ratios, &opts).unwrap(), fit);
        let hist = model.fit_histogram(&s.ratios, &default_edges(), &FitOptions { bootstrap: 10, ..opts }).unwrap();
        assert!((hist.k_hat - 0.5).abs() < 0.05, "{hist:?}");
        assert_eq!(hist.method, FitMethod::HistogramLeastSquares);
    }

    #[test]
    fn small_samples_are_flagged() {
        let model = CouplingModel::build(SymmetryClass::Unitary, ModelSpec { k_nodes: 20, ..ModelSpec::default() }).unwrap();
        let fit = model.fit_mle(&[0.3, 1.2, 0.8, 2.0, 0.05], &FitOptions { bootstrap: 20, ..FitOptions::default() }).unwrap();
        assert!(fit.small_sample);
        assert!((0.0..=1.0).contains(&fit.k_hat));
        assert!(matches!(model.fit_mle(&[-1.0], &FitOptions::default()), Err(FitError::Ratio { index: 0, .. })));
        assert!(matches!(
            model.fit_mle(&[1.0], &FitOptions { bounds: (0.5, 0.5), ..FitOptions::default() }),
            Err(FitError::Bounds { .. })
        ));
    }

    #[test]
    fn ks_separates_decoupled_from_standard() {
        let s = sample_ratios(SymmetryClass::Unitary, Coupling::new(0.0).unwrap(), 10_000, 5).unwrap();
        let wrong = ks_statistic(&s, SymmetryClass::Unitary, 1.0).unwrap();
        let right = ks_statistic(&s, SymmetryClass::Unitary, 0.0).unwrap();
        assert!(wrong > 0.05, "{wrong}");
        assert!(right < 0.02, "{right}");
        assert_eq!(ks_statistic(&s, SymmetryClass::Unitary, 1.0).unwrap(), wrong);
    }

    proptest! {
        #[test]
        fn histogram_accounts_for_every_ratio(
            ratios in prop::collection::vec(0.0f64..8.0, 0..200),
            widths in prop::collection::vec(0.05f64..1.0, 1..20),
        ) {
            let mut edges = vec![0.3];
            for w in widths {
                edges.push(edges.last().unwrap() + w);
            }
            let h = build_histogram(&ratios, &edges).unwrap();
            prop_assert_eq!(h.total(), ratios.len() as u64);
            if !ratios.is_empty() {
                let mass: f64 = h.density.iter().zip(edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
                let expected = 1.0 - h.overflow_count as f64 / ratios.len() as f64;
                prop_assert!((mass - expected).abs() < 1e-12);
            }
        }

        #[test]
        fn golden_section_finds_unimodal_peaks(peak in 0.0f64..1.0, width in 0.05f64..2.0) {
            let o = maximize(|k| -((k - peak) / width).powi(2), (0.0, 1.0), 1e-7);
            prop_assert!((o.k - peak).abs() < 1e-6);
            prop_assert_eq!(o.local_maxima, 1);
        }
    }
}
