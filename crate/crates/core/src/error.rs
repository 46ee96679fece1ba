use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("density `{0}` has no tail envelope and no analytic tail formula")]
    TailEnvelopeMissing(String),

    #[error("quadrature budget exceeded: error {achieved:.3e} above tolerance {requested:.3e} (value {value:.6e})")]
    BudgetExceeded {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("integrand does not converge under refinement: {0}")]
    DivergentIntegrand(String),

    #[error("N_n for n = {n} exceeds the 64-bit range (log N_n = {log_n:.3})")]
    OverflowAtScale { n: u32, log_n: f64 },

    #[error("quadratic exponential moment diverges: t0 = {t0} but 2·t0·λ_max = {ratio} ≥ 1 (component {component})")]
    MomentDiverges {
        t0: f64,
        ratio: f64,
        component: usize,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no admissible radius up to {r_max}: {reason}")]
    ScheduleInfeasible { r_max: f64, reason: String },

    #[error("tolerance {requested:.3e} unreachable; best achieved {best:.3e}")]
    ToleranceUnreachable { requested: f64, best: f64 },

    #[error("infimum of the density on the ball underflows ({0:.3e})")]
    InfimumTooSmall(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownTarget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
