use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: shapes, parameter ranges, unknown keys.
    #[error("configuration error: {0}")]
    Config(String),

    /// Several configuration problems found in one pass.
    #[error("{} validation error(s):\n  {}", .0.len(), .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("metric validation failed: {0}")]
    Metric(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("reproduction number undefined: D({mass}, q_{index}) = 0")]
    DivisionDomain { mass: f64, index: usize },

    #[error("no sign change of R(s, q_{index}) - 1 on [0, {s_max}]; increase s_max")]
    Bracket { index: usize, s_max: f64 },

    #[error(
        "picard step at t = {t} did not converge in {iterations} iterations \
         (last change {change:e}); retry with a smaller dt"
    )]
    StepFailure {
        t: f64,
        iterations: usize,
        change: f64,
    },

    #[error("time {t} is outside the trajectory interior ({lo}, {hi})")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    /// The simplex hit a state that cannot occur for a well-formed flat-norm LP.
    #[error("internal LP failure: {0}")]
    Lp(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Validation(_)
            | Error::Metric(_)
            | Error::Dimension { .. } => 1,
            _ => 2,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
