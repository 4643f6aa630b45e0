use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use ratio_rmt_core::analytic::{self, Beta1Route, DispatchThresholds, RatioDensity};
use ratio_rmt_core::ensemble::{Coupling, RatioMeta, RatioSample, RatioSource, RatioStream, SymmetryClass};
use ratio_rmt_core::fitting::{CouplingModel, FitMethod, FitOptions, FitResult, ModelSpec};
use ratio_rmt_core::numerics::QuadratureSpec;
use ratio_rmt_core::oracle::spec_fingerprint;
use ratio_rmt_core::spectra::{self, LevelParser, SpectraError, TripleSelectionMode};
use serde::Serialize;

use crate::format::{self, real, NormalizationRow, PdfRow, PdfTable, Provenance};
use crate::CliError;

/// Draws per parallel work item. Draw `i` always uses stream `i`, so the
/// chunking never changes the output.
pub const SIMULATION_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Command output plus messages for stderr.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Output {
    pub body: String,
    pub messages: Vec<String>,
}

fn class_name(class: SymmetryClass) -> &'static str {
    match class {
        SymmetryClass::Orthogonal => "orthogonal",
        SymmetryClass::Unitary => "unitary",
    }
}

fn route_name(route: Beta1Route) -> &'static str {
    match route {
        Beta1Route::Triple => "triple",
        Beta1Route::Reduced => "reduced",
    }
}

fn analytic_spec(quad: &QuadratureSpec, thresholds: &DispatchThresholds) -> String {
    format!(
        "{};k_low={};k_high={}",
        spec_fingerprint(quad),
        real(thresholds.k_low),
        real(thresholds.k_high)
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateConfig {
    pub class: SymmetryClass,
    pub k: f64,
    pub n: usize,
    pub seed: u64,
    pub format: OutputFormat,
}

pub fn simulate(cfg: &SimulateConfig, pool: &rayon::ThreadPool) -> Result<Output, CliError> {
    let coupling = Coupling::new(cfg.k).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut messages = Vec::new();
    if !coupling.in_analytic_domain() {
        messages.push(format!("warning: k = {} is outside 0 <= k <= 1 where the exact densities apply", cfg.k));
    }
    let stream = RatioStream::new(cfg.class, coupling, cfg.seed);
    let starts: Vec<usize> = (0..cfg.n).step_by(SIMULATION_CHUNK).collect();
    let chunks: Vec<_> = pool.install(|| {
        starts
            .par_iter()
            .map(|&s| stream.ratios(s as u64, (s + SIMULATION_CHUNK).min(cfg.n) as u64))
            .collect()
    });
    let mut ratios = Vec::with_capacity(cfg.n);
    let mut discarded = 0;
    for chunk in chunks {
        let (r, d) = chunk.map_err(|e| CliError::Numeric(e.to_string()))?;
        ratios.extend(r);
        discarded += d;
    }
    let sample = RatioSample {
        ratios,
        meta: RatioMeta {
            class: Some(cfg.class),
            source: RatioSource::Ensemble { k: cfg.k },
            seed: Some(cfg.seed),
            n_requested: cfg.n,
            n_discarded: discarded,
        },
    };
    let spec = format!(
        "class={};k={};n={};sampler=chacha8-stream-per-draw",
        class_name(cfg.class),
        real(cfg.k),
        cfg.n
    );
    let prov = Provenance::new("simulate", Some(cfg.seed), spec);
    messages.push(format!("simulated {} ratios; {} degenerate draws redrawn", sample.len(), discarded));
    let body = match cfg.format {
        OutputFormat::Csv => format::ratios_csv(&sample, &prov),
        OutputFormat::Json => format::ratios_json(&sample, &prov),
    };
    Ok(Output { body, messages })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridKind {
    #[default]
    Uniform,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfConfig {
    pub class: SymmetryClass,
    pub k: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    pub grid: GridKind,
    pub route: Beta1Route,
    pub quad: QuadratureSpec,
    pub thresholds: DispatchThresholds,
    pub format: OutputFormat,
}

impl PdfConfig {
    pub fn ratios(&self) -> Result<Vec<f64>, CliError> {
        let (a, b, n) = (self.r_min, self.r_max, self.points);
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
            return Err(CliError::Usage(format!("need 0 <= r-min <= r-max, got [{a}, {b}]")));
        }
        if n == 0 || (n == 1) != (a == b) {
            return Err(CliError::Usage("use --points 1 exactly when r-min equals r-max".into()));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        Ok(match self.grid {
            GridKind::Uniform => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            GridKind::Log => {
                if a <= 0.0 {
                    return Err(CliError::Usage("a log grid needs r-min > 0".into()));
                }
                let (la, lb) = (a.ln(), b.ln());
                (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
            }
        })
    }
}

pub fn pdf(cfg: &PdfConfig, pool: &rayon::ThreadPool) -> Result<Output, CliError> {
    if !(0.0..=1.0).contains(&cfg.k) {
        return Err(CliError::Usage(format!("k must lie in [0, 1], got {}", cfg.k)));
    }
    let rs = cfg.ratios()?;
    let density = RatioDensity::new(cfg.class, cfg.k)?
        .with_quadrature(cfg.quad)
        .with_thresholds(cfg.thresholds)
        .with_route(cfg.route);
    let values: Vec<_> = pool.install(|| rs.par_iter().map(|&r| density.pdf(r)).collect());
    let mut rows = Vec::with_capacity(rs.len());
    for (&r, v) in rs.iter().zip(values) {
        rows.push(PdfRow { r, pdf: v? });
    }
    let norm = analytic::normalization(|r| density.pdf(r), &cfg.quad)?;
    let spec = format!(
        "class={};route={};{}",
        class_name(cfg.class),
        route_name(cfg.route),
        analytic_spec(&cfg.quad, &cfg.thresholds)
    );
    let table = PdfTable {
        provenance: Provenance::new("pdf", None, spec),
        beta: cfg.class.beta(),
        k: cfg.k,
        rows,
        normalization: NormalizationRow { mass: norm.value, abs_err: norm.abs_err },
    };
    let body = match cfg.format {
        OutputFormat::Csv => table.csv(),
        OutputFormat::Json => table.json(),
    };
    Ok(Output { body, messages: vec![] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub input: PathBuf,
    pub class: SymmetryClass,
    pub method: FitMethod,
    pub options: FitOptions,
    pub edges: Vec<f64>,
    pub model: ModelSpec,
}

/// JSON document written by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub provenance: Provenance,
    pub input: String,
    pub beta: u8,
    pub result: FitResult,
    pub warnings: Vec<String>,
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

pub fn fit(cfg: &FitConfig) -> Result<Output, CliError> {
    let ratios = format::parse_ratios(&read_input(&cfg.input)?)?;
    if ratios.is_empty() {
        return Err(CliError::Parse(format!("{} contains no ratios", cfg.input.display())));
    }
    let model = CouplingModel::build(cfg.class, cfg.model)?;
    let result = match cfg.method {
        FitMethod::Mle => model.fit_mle(&ratios, &cfg.options)?,
        FitMethod::HistogramLeastSquares => model.fit_histogram(&ratios, &cfg.edges, &cfg.options)?,
    };
    let mut warnings = Vec::new();
    if result.small_sample {
        warnings.push(format!("small sample: {} ratios", result.n_used));
    }
    if result.multimodal {
        warnings.push("objective has competing local maxima; k_hat may belong to another mode".into());
    }
    if result.floored_terms > 0 {
        warnings.push(format!("{} log-density terms floored at ln(1e-300)", result.floored_terms));
    }
    let o = &cfg.options;
    let spec = format!(
        "class={};method={:?};bounds=[{},{}];tol={};bootstrap={};r_grid=[{},{}]x{};k_nodes={};{}",
        class_name(cfg.class),
        cfg.method,
        real(o.bounds.0),
        real(o.bounds.1),
        real(o.tol),
        o.bootstrap,
        real(cfg.model.grid.r_min),
        real(cfg.model.grid.r_max),
        cfg.model.grid.points,
        cfg.model.k_nodes,
        analytic_spec(&cfg.model.quad, &cfg.model.thresholds)
    );
    let report = FitReport {
        provenance: Provenance::new("fit", Some(o.seed), spec),
        input: cfg.input.display().to_string(),
        beta: cfg.class.beta(),
        result,
        warnings: warnings.clone(),
    };
    let body = serde_json::to_string_pretty(&report).expect("fit reports serialize") + "\n";
    Ok(Output { body, messages: warnings.into_iter().map(|w| format!("warning: {w}")).collect() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub input: PathBuf,
    pub threshold: Option<f64>,
    pub mode: TripleSelectionMode,
    /// Emit g-g ratios (triples without a localized level) instead.
    pub generic: bool,
    pub format: OutputFormat,
}

fn spectra_error(e: SpectraError, path: &Path) -> CliError {
    match e {
        SpectraError::Parse { .. } | SpectraError::Duplicate { .. } | SpectraError::Empty => {
            CliError::Parse(format!("{}: {e}", path.display()))
        }
        SpectraError::MissingEntropy | SpectraError::MissingFlags | SpectraError::Threshold(_) => {
            CliError::Usage(format!("{}: {e}", path.display()))
        }
        e => CliError::Numeric(format!("{}: {e}", path.display())),
    }
}

pub fn ingest(cfg: &IngestConfig) -> Result<Output, CliError> {
    let path = &cfg.input;
    let file = File::open(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut parser = LevelParser::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        parser.push_line(&line).map_err(|e| spectra_error(e, path))?;
    }
    let mut seq = parser.finish().map_err(|e| spectra_error(e, path))?;
    if let Some(t) = cfg.threshold {
        seq = spectra::tag_localized(&seq, t).map_err(|e| spectra_error(e, path))?;
    } else if seq.localized.is_none() {
        return Err(CliError::Usage(format!(
            "{} has no localized column; pass --entropy-threshold",
            path.display()
        )));
    }
    let mut messages = vec![format!(
        "{} levels, {} localized ({:.4} of the spectrum)",
        seq.len(),
        seq.localized_count(),
        seq.localized_fraction()
    )];
    let extracted = if cfg.generic {
        spectra::extract_gg_ratios(&seq)
    } else {
        spectra::extract_gl_ratios(&seq, cfg.mode)
    };
    let mut sample = match extracted {
        Ok(s) => s,
        Err(SpectraError::NoInteriorLocalized) => RatioSample {
            ratios: vec![],
            meta: RatioMeta {
                class: None,
                source: RatioSource::Spectrum { label: String::new(), mode: cfg.mode, threshold: seq.threshold },
                seed: None,
                n_requested: 0,
                n_discarded: 0,
            },
        },
        Err(e) => return Err(spectra_error(e, path)),
    };
    if let RatioSource::Spectrum { label, .. } = &mut sample.meta.source {
        *label = path.display().to_string();
    }
    if seq.localized_count() == 0 && !cfg.generic {
        messages.push("warning: no localized levels; no g-l ratios".into());
    } else if sample.is_empty() {
        messages.push("warning: no triple matched the selection".into());
    }
    if sample.meta.n_discarded > 0 {
        messages.push(format!("{} degenerate triples discarded", sample.meta.n_discarded));
    }
    let spec = format!(
        "kind={};mode={};entropy_threshold={};duplicate_tol=1e-12;degeneracy=1e-10x21",
        if cfg.generic { "g-g" } else { "g-l" },
        format::mode_name(cfg.mode),
        seq.threshold.map_or("none".into(), real)
    );
    let prov = Provenance::new("ingest", None, spec);
    let body = match cfg.format {
        OutputFormat::Csv => format::ratios_csv(&sample, &prov),
        OutputFormat::Json => format::ratios_json(&sample, &prov),
    };
    Ok(Output { body, messages })
}
