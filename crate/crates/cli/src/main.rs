use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ratio_rmt_std::commands::{self, FitConfig, GridKind, IngestConfig, OutputFormat, PdfConfig, SimulateConfig};
use ratio_rmt_std::validate::{self, Suite};
use ratio_rmt_std::{pool_from_env, CliError};
use ratio_rmt_core::analytic::{Beta1Route, DispatchThresholds};
use ratio_rmt_core::ensemble::SymmetryClass;
use ratio_rmt_core::fitting::{default_edges, FitMethod, FitOptions, ModelSpec};
use ratio_rmt_core::numerics::QuadratureSpec;
use ratio_rmt_core::spectra::TripleSelectionMode;

/// Spacing-ratio statistics of a localized level coupled to a 2x2 Gaussian
/// block: simulate, evaluate, fit, ingest spectra and self-validate.
#[derive(Parser)]
#[command(name = "ratio-rmt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample g-l ratios from the random-matrix model.
    Simulate(SimulateArgs),
    /// Tabulate the exact ratio density.
    Pdf(PdfArgs),
    /// Fit the coupling k to a ratios file.
    Fit(FitArgs),
    /// Extract g-l ratios from a level file.
    Ingest(IngestArgs),
    /// Run the built-in cross-checks.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn beta_parser() -> clap::builder::RangedI64ValueParser<u8> {
    clap::value_parser!(u8).range(1..=2)
}

fn class(beta: u8) -> SymmetryClass {
    SymmetryClass::from_beta(beta).expect("range-checked by clap")
}

fn unit_coupling(s: &str) -> Result<f64, String> {
    let k: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&k) {
        Ok(k)
    } else {
        Err(format!("k must lie in [0, 1], got {k}"))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = beta_parser())]
    beta: u8,
    /// Coupling; 0 <= k < sqrt(2).
    #[arg(long, allow_negative_numbers = true)]
    k: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Uniform,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum Route {
    /// Triple integral over the angle, radius and centre.
    Triple,
    /// Equivalent double integral; much faster.
    Reduced,
}

#[derive(Args)]
struct PdfArgs {
    #[arg(long, value_parser = beta_parser())]
    beta: u8,
    #[arg(long, value_parser = unit_coupling, allow_negative_numbers = true)]
    k: f64,
    #[arg(long, default_value_t = 0.0)]
    r_min: f64,
    #[arg(long, default_value_t = 5.0)]
    r_max: f64,
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    grid: Grid,
    /// Evaluation of the orthogonal class.
    #[arg(long, value_enum, default_value = "triple")]
    route: Route,
    #[command(flatten)]
    tolerances: Tolerances,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Tolerances {
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_subdivisions: Option<usize>,
    #[arg(long)]
    truncation_sigmas: Option<f64>,
}

impl Tolerances {
    fn spec(&self) -> Result<QuadratureSpec, CliError> {
        let d = QuadratureSpec::default();
        QuadratureSpec::new(
            self.abs_tol.unwrap_or(d.abs_tol),
            self.rel_tol.unwrap_or(d.rel_tol),
            self.max_subdivisions.unwrap_or(d.max_subdivisions),
            self.truncation_sigmas.unwrap_or(d.truncation_sigmas),
        )
        .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mle,
    Histogram,
}

#[derive(Args)]
struct FitArgs {
    /// Ratios file (text or JSON).
    input: PathBuf,
    #[arg(long, value_parser = beta_parser())]
    beta: u8,
    #[arg(long, value_enum, default_value = "mle")]
    method: Method,
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, value_parser = unit_coupling, default_value_t = 0.0)]
    k_min: f64,
    #[arg(long, value_parser = unit_coupling, default_value_t = 1.0)]
    k_max: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Centered,
    AllAdjacent,
}

#[derive(Args)]
struct IngestArgs {
    /// Level file with header `energy[,entropy][,localized]`.
    input: PathBuf,
    /// Flag levels with entropy at or below this value as localized.
    #[arg(long, allow_negative_numbers = true)]
    entropy_threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "all-adjacent")]
    mode: Mode,
    /// Emit g-g ratios (triples without localized levels) instead.
    #[arg(long)]
    generic: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "quick")]
    suite: SuiteArg,
    /// Fixture file replacing the built-in reference values.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Recompute the reference values from the oracle, write them here and exit.
    #[arg(long)]
    write_fixtures: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn emit(out: &Option<PathBuf>, output: commands::Output) -> Result<(), CliError> {
    let mut stderr = std::io::stderr().lock();
    for m in &output.messages {
        let _ = writeln!(stderr, "{m}");
    }
    match out {
        Some(path) => std::fs::write(path, output.body)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(output.body.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write output: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = SimulateConfig { class: class(a.beta), k: a.k, n: a.n, seed: a.seed, format: a.common.format.into() };
            emit(&a.common.out, commands::simulate(&cfg, &pool_from_env()?)?)
        }
        Command::Pdf(a) => {
            let cfg = PdfConfig {
                class: class(a.beta),
                k: a.k,
                r_min: a.r_min,
                r_max: a.r_max,
                points: a.points,
                grid: match a.grid {
                    Grid::Uniform => GridKind::Uniform,
                    Grid::Log => GridKind::Log,
                },
                route: match a.route {
                    Route::Triple => Beta1Route::Triple,
                    Route::Reduced => Beta1Route::Reduced,
                },
                quad: a.tolerances.spec()?,
                thresholds: DispatchThresholds::default(),
                format: a.common.format.into(),
            };
            emit(&a.common.out, commands::pdf(&cfg, &pool_from_env()?)?)
        }
        Command::Fit(a) => {
            if a.k_min >= a.k_max {
                return Err(CliError::Usage("--k-min must be below --k-max".into()));
            }
            let cfg = FitConfig {
                input: a.input,
                class: class(a.beta),
                method: match a.method {
                    Method::Mle => FitMethod::Mle,
                    Method::Histogram => FitMethod::HistogramLeastSquares,
                },
                options: FitOptions { bounds: (a.k_min, a.k_max), tol: a.tol, bootstrap: a.bootstrap, seed: a.seed },
                edges: default_edges(),
                model: ModelSpec::default(),
            };
            emit(&a.out, commands::fit(&cfg)?)
        }
        Command::Ingest(a) => {
            let cfg = IngestConfig {
                input: a.input,
                threshold: a.entropy_threshold,
                mode: match a.mode {
                    Mode::Centered => TripleSelectionMode::CenteredOnly,
                    Mode::AllAdjacent => TripleSelectionMode::AllAdjacent,
                },
                generic: a.generic,
                format: a.common.format.into(),
            };
            emit(&a.common.out, commands::ingest(&cfg)?)
        }
        Command::Validate(a) => {
            let pool = pool_from_env()?;
            if let Some(path) = a.write_fixtures {
                let fixtures = validate::generate_fixtures(&pool)?;
                let body = serde_json::to_string_pretty(&fixtures).expect("fixtures serialize") + "\n";
                return emit(&Some(path), commands::Output { body, messages: vec![] });
            }
            let fixtures = match &a.fixtures {
                Some(p) => validate::parse_fixtures(&commands::read_input(p)?)?,
                None => validate::parse_fixtures(validate::DEFAULT_FIXTURES)?,
            };
            let suite = match a.suite {
                SuiteArg::Quick => Suite::Quick,
                SuiteArg::Full => Suite::Full,
            };
            let checks = validate::run(suite, &fixtures, &pool);
            let body = match a.common.format {
                Format::Csv => validate::report_csv(&checks),
                Format::Json => validate::report_json(&checks),
            };
            let failed = checks.iter().filter(|c| !c.passed).count();
            let summary = format!("{} checks, {} failed", checks.len(), failed);
            emit(&a.common.out, commands::Output { body, messages: vec![summary] })?;
            if failed > 0 {
                Err(CliError::Validation(format!("{failed} of {} checks failed", checks.len())))
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
