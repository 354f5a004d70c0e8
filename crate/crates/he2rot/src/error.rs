//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Configuration could not be read or parsed.
    #[error("config error at {path}: {message}")]
    Config { path: PathBuf, message: String },

    /// Configuration parsed but failed a validation check.
    #[error("config validation failed for key `{key}`: {message}")]
    ConfigValidation { key: String, message: String },

    /// CSV ingestion failed; `line` is 1-based and includes comment lines.
    #[error("CSV parse error in {path} at line {line}: {message}")]
    CsvParse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Kick pulse energy and peak intensity disagree beyond tolerance.
    #[error(
        "inconsistent pulse parameterization: calibrated P = {p_calibrated:.4} from energy, \
         physical P = {p_physical:.4} from intensity x duration (relative mismatch {mismatch:.2} \
         exceeds {tolerance:.2})"
    )]
    InconsistentPulse {
        p_calibrated: f64,
        p_physical: f64,
        mismatch: f64,
        tolerance: f64,
    },

    /// Population leaked into the guard shells of the truncated basis.
    #[error(
        "basis truncation error: population {leak:.3e} in the two highest N shells \
         (N = {shell_lo}, {shell_hi}) exceeds {tolerance:.1e}; enlarge n_max"
    )]
    Truncation {
        leak: f64,
        shell_lo: u32,
        shell_hi: u32,
        tolerance: f64,
    },

    /// Time integration violated the norm-conservation bound.
    #[error("integration failure: norm drift {drift:.3e} exceeds {bound:.1e}; reduce dt")]
    NormDrift { drift: f64, bound: f64 },

    /// Both coherences of a ratio are required to be resolvable.
    #[error("amplitude ratio undefined: |coherence(1,3)| = {magnitude:.3e} is numerically zero")]
    DegenerateRatio { magnitude: f64 },

    /// Trace grid cannot represent the requested frequency content.
    #[error("undersampled grid: dt = {dt_ps} ps cannot represent {frequency_thz} THz (Nyquist {nyquist_thz} THz)")]
    Undersampled {
        dt_ps: f64,
        frequency_thz: f64,
        nyquist_thz: f64,
    },

    /// Trace too short for the requested spectral feature.
    #[error("trace span {span_ps} ps too short for {frequency_thz} THz: {message}")]
    Resolution {
        span_ps: f64,
        frequency_thz: f64,
        message: String,
    },

    #[error("expected spectral peak `{label}` not found")]
    MissingPeak { label: String },

    /// Bath table lookup outside the tabulated temperature range.
    #[error("temperature {t_k} K outside bath table range [{lo} K, {hi} K]; no extrapolation")]
    TemperatureRange { t_k: f64, lo: f64, hi: f64 },

    /// Least-squares problem is structurally unusable.
    #[error("invalid fit problem: {0}")]
    FitProblem(String),

    /// Model returned NaN/inf during optimization.
    #[error("non-finite model output at parameters {params:?}")]
    NonFiniteModel { params: Vec<f64> },

    #[error("fit not identifiable: {0}")]
    NonIdentifiable(String),

    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),

    #[error("unknown model variant `{0}`")]
    UnknownVariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
