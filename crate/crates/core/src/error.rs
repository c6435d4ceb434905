use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("feature `{0}` is not present in the view map")]
    UnmappedFeature(String),

    #[error("invalid view map: {0}")]
    InvalidViewMap(String),

    #[error("outcome value `{value}` on data row {row} is not 0 or 1")]
    NonBinaryOutcome { row: usize, value: String },

    #[error("ragged CSV `{path}`: record {record} has {found} fields, expected {expected}")]
    RaggedCsv { path: PathBuf, record: usize, found: usize, expected: usize },

    #[error("cannot parse `{value}` as a number in `{path}` (record {record}, column `{column}`)")]
    ParseNumber { path: PathBuf, record: usize, column: String, value: String },

    #[error("feature `{0}` has zero variance")]
    ZeroVarianceFeature(String),

    #[error("non-positive entry {value} in feature `{feature}`")]
    NonPositiveEntry { feature: String, value: f64 },

    #[error("cannot split {n} samples into {k} folds")]
    TooManyFolds { n: usize, k: usize },

    #[error("dataset has no outcome column")]
    MissingOutcome,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no admissible feature: the null model is optimal for every lambda")]
    NullPath,

    #[error("fit did not converge after {sweeps} sweeps")]
    DidNotConverge { sweeps: usize },

    #[error("no stability threshold in (0.5, 1] satisfies PFER <= {pfer_max} (q = {q}, V = {views})")]
    Infeasible { q: usize, views: usize, pfer_max: f64 },

    #[error("both classes must be present")]
    OneClassOnly,

    #[error("selection stability undefined: every model selects none or all views")]
    DegenerateSelection,

    #[error("view structure mismatch: {0}")]
    ViewStructureMismatch(String),

    #[error("result file schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error behind any number of context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}
