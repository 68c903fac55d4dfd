use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the pipeline.
///
/// The CLI maps these onto exit codes: configuration problems exit with 2,
/// data problems with 3, numerical failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("corpus contains no sentences")]
    EmptyCorpus,

    #[error("sentence structure error at line {line}: {message}")]
    Structure { line: usize, message: String },

    #[error("labeled fraction {0} outside (0, 1]")]
    FractionDomain(f64),

    #[error("alignment failed for slot {slot}: value {value:?} not found in left-to-right order")]
    Alignment { slot: String, value: String },

    #[error("lexicon error: {0}")]
    Lexicon(String),

    #[error("invalid token surface {0:?}: must be non-empty and contain no whitespace")]
    Token(String),

    #[error("feature template error: {0}")]
    Template(String),

    #[error("model file error at line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("marginal row {row} sums to {sum:.9}, expected 1 within 1e-6")]
    MarginalRow { row: usize, sum: f64 },

    #[error("k-NN configuration: k = {k} but the graph has only {nodes} nodes")]
    KnnConfig { k: usize, nodes: usize },

    #[error("graph dump error at line {line}: {message}")]
    DumpFormat { line: usize, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse category used by the CLI for exit codes.
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            FractionDomain(_) | Template(_) | KnnConfig { .. } | Domain(_) | Config(_) => {
                ErrorCategory::Config
            }
            Parse { .. } | EmptyCorpus | Structure { .. } | Alignment { .. } | Lexicon(_)
            | Token(_) | ModelFormat { .. } | DumpFormat { .. } | Io(_) => ErrorCategory::Data,
            MarginalRow { .. } | Contract(_) | Numerical(_) => ErrorCategory::Numerical,
        }
    }
}

/// Exit-code categories for command-line use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad flags, config keys, or parameter domains (exit 2).
    Config,
    /// Unreadable or malformed input data (exit 3).
    Data,
    /// NaN/Inf or violated numeric contracts (exit 4).
    Numerical,
}
