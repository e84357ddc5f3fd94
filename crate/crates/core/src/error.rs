use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("FCIDUMP header: {0}")]
    Header(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("orbital index {index} out of range for {n_orb} orbitals")]
    IndexOutOfRange { index: usize, n_orb: usize },

    #[error("NELEC + MS2 must be even (NELEC={nelec}, MS2={ms2})")]
    OddSpin { nelec: i64, ms2: i64 },

    #[error("invalid electron count: {0}")]
    ElectronCount(String),

    #[error("bitstring has length {got}, expected {expected}")]
    BitstringLength { got: usize, expected: usize },

    #[error("determinant {0} is outside the symmetry sector")]
    SectorViolation(String),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("closed-shell reconstruction requires n_alpha == n_beta (got {n_alpha}, {n_beta})")]
    NotClosedShell { n_alpha: usize, n_beta: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("empty matrix or subspace")]
    Empty,

    #[error("sector holds {count} determinants, above the limit of {limit}")]
    SectorTooLarge { count: String, limit: usize },

    #[error("brute-force oracle supports at most {limit} spin orbitals, got {got}")]
    OracleLimit { got: usize, limit: usize },

    #[error("no configurations survived symmetry filtering at iteration {iteration}; raise shots or enable recovery")]
    NoValidSamples { iteration: usize },

    #[error("subspace grew to {size} determinants after tensor reconstruction (safety cap {cap})")]
    SafetyCap { size: usize, cap: usize },

    #[error("update called without a pending probe pair")]
    NoPendingProbe,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
