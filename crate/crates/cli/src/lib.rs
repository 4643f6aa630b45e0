//! IO, file formats and command implementations behind the `ratio-rmt`
//! binary. Each command returns its output as a string so the binary only
//! has to route it to a file or stdout.

pub mod commands;
pub mod format;
pub mod validate;

use ratio_rmt_core::analytic::AnalyticError;
use ratio_rmt_core::fitting::FitError;
use ratio_rmt_core::numerics::NumericsError;

/// Environment variable capping the worker count; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "RATIO_RMT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Numeric(String),
    #[error("fit is not identifiable: {0}")]
    NonIdentifiable(String),
    #[error("{0}")]
    Io(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// 0 success, 1 numerical or domain failure, 2 usage or parse failure,
    /// 3 non-identifiable fit.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Parse(_) => 2,
            Self::Numeric(_) | Self::Io(_) | Self::Validation(_) => 1,
            Self::NonIdentifiable(_) => 3,
        }
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::Numerics(NumericsError::NotConverged { estimate, abs_err }) => Self::Numeric(format!(
                "quadrature did not converge; best estimate {estimate:e} with error bound {abs_err:e}"
            )),
            e => Self::Numeric(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::NonIdentifiable { spread } => {
                Self::NonIdentifiable(format!("log-likelihood varies by only {spread:e} across the bounds"))
            }
            FitError::Analytic(a) => a.into(),
            e => Self::Numeric(e.to_string()),
        }
    }
}

/// Worker count from the value of [`THREADS_ENV`].
pub fn threads_from(value: Option<&str>) -> Result<usize, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(0),
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"))),
    }
}

/// Thread pool sized by [`THREADS_ENV`].
pub fn pool_from_env() -> Result<rayon::ThreadPool, CliError> {
    let n = threads_from(std::env::var(THREADS_ENV).ok().as_deref())?;
    pool(n)
}

pub fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))
}
