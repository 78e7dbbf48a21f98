use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
///
/// Variants split into two families: input/validation problems (the data
/// violates an assumption) and numeric failures (the data was accepted but a
/// computation could not deliver a trustworthy answer). See
/// [`Error::is_validation`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "state matrix is not symmetric: max |a - a^T| = {asymmetry:e} exceeds tolerance {tol:e}"
    )]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("state matrix is not Hurwitz: eigenvalue real part {max_real:e} > -{margin:e}")]
    NotHurwitz { max_real: f64, margin: f64 },

    #[error("parse error{}: {message}", location_suffix(.line, .field))]
    Parse {
        message: String,
        line: Option<usize>,
        field: Option<String>,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inadmissible weights: {0}")]
    InadmissibleWeights(String),

    #[error("coordinated blocks have incompatible input widths: {0:?}")]
    IncompatibleInputWidths(Vec<usize>),

    #[error("state matrix is not diagonal: max off-diagonal |a_ij| = {0:e}")]
    NotDiagonalA(f64),

    #[error("state matrix is numerically singular: condition estimate {cond:e} exceeds {limit:e}")]
    SingularStateMatrix { cond: f64, limit: f64 },

    #[error("closed loop is not Hurwitz: max eigenvalue real part {max_real:e}")]
    UnstableClosedLoop { max_real: f64 },

    #[error("realization is not stable: max eigenvalue real part {max_real:e}")]
    NotStable { max_real: f64 },

    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence { iterations: usize, context: String },

    #[error("no stabilizing Riccati solution at gamma = {gamma}: {reason}")]
    NoStabilizingSolution { gamma: f64, reason: String },

    #[error("ill-conditioned invariant subspace: basis condition {cond:e} exceeds {limit:e}")]
    IllConditionedSubspace { cond: f64, limit: f64 },

    #[error("Riccati residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("gamma feasibility is not monotone: {0}")]
    NonMonotoneFeasibility(String),

    #[error(
        "positivity tests disagree: -BB^T metzler = {from_b}, A+BL metzler = {from_closed_loop}"
    )]
    PositivityMismatch {
        from_b: bool,
        from_closed_loop: bool,
    },

    #[error("independent computations disagree: {0}")]
    OracleDisagreement(String),

    #[error("non-finite value encountered in {0}")]
    NonFiniteResult(String),
}

fn location_suffix(line: &Option<usize>, field: &Option<String>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" at line {l}, field `{f}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(message: impl Into<String>) -> Self {
        Error::Parse {
            message: message.into(),
            line: None,
            field: None,
        }
    }

    pub(crate) fn parse_field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            message: message.into(),
            line: None,
            field: Some(field.into()),
        }
    }

    /// True for errors caused by the input itself rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NotSymmetric { .. }
                | Error::NotHurwitz { .. }
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::InvalidArgument(_)
                | Error::InadmissibleWeights(_)
                | Error::IncompatibleInputWidths(_)
                | Error::NotDiagonalA(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
