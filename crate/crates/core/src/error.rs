use std::path::PathBuf;

use thiserror::Error;

use crate::graph::LinkId;
use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed row in an input file. `line` is 1-based and counts the header.
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error("invalid network: {0}")]
    Network(String),

    #[error("invalid path: {0}")]
    Path(String),

    #[error("missing value for link {0}")]
    MissingValue(LinkId),

    #[error("negative or non-finite cost {value} on link {link}")]
    NegativeCost { link: LinkId, value: f64 },

    #[error("node {destination} is unreachable from {origin}")]
    Unreachable { origin: String, destination: String },

    #[error("invalid linear program: {0}")]
    InvalidProgram(String),

    /// The solver returned a status other than OPTIMAL where an optimum is required.
    #[error("solver failure: {0}")]
    Solver(LpStatus),

    /// No nonnegative pricing of the designated links rationalizes the route.
    #[error("observation {0} is inconsistent with any nonnegative pricing")]
    ObservationInconsistent(String),

    #[error("no usable observations ({skipped} skipped as inconsistent)")]
    NoUsableObservations { skipped: usize },

    #[error("flow decomposition failed for commodity {0}")]
    Decomposition(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the input data.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver(_) | Error::Decomposition(_))
    }
}
