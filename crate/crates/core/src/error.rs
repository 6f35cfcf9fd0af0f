use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input file could not be opened or read.
    #[error("cannot read {path}: {source}")]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// Malformed CSV.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    /// The requested column is not in the header.
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    /// A cell that should hold a number does not (1-based data row).
    #[error("non-numeric value '{value}' at row {row}")]
    NonNumeric {
        /// 1-based data row (header excluded).
        row: usize,
        /// Raw cell text.
        value: String,
    },
    /// The series has no observations.
    #[error("series is empty")]
    EmptySeries,
    /// A value in the series is NaN or infinite.
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    /// A structural argument was out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Not enough observations for the requested operation.
    #[error("insufficient history: need more than {required} observations, got {available}")]
    InsufficientHistory {
        /// Minimum number of observations needed.
        required: usize,
        /// Observations available.
        available: usize,
    },
    /// Matrix or vector shapes disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// ReliefF was handed a single class.
    #[error("ReliefF needs at least two distinct labels")]
    SingleClass,
    /// The ReliefF neighbour count exceeds what the smallest class can provide.
    #[error("k_neighbors = {k} too large: smallest class has {smallest} instances")]
    TooManyNeighbors {
        /// Requested neighbour count.
        k: usize,
        /// Size of the smallest class.
        smallest: usize,
    },
    /// ETS smoothing parameter search did not converge.
    #[error("ETS optimizer did not converge after {iterations} iterations (best sse {best})")]
    EtsNonConvergence {
        /// Iterations performed.
        iterations: usize,
        /// Best objective reached.
        best: f64,
        /// Best objective after each iteration.
        trace: Vec<f64>,
    },
    /// The GARCH(1,1) fit failed or sits on the stationarity boundary.
    #[error("GARCH(1,1) fit degenerate: {reason} (omega {omega}, alpha {alpha}, beta {beta})")]
    GarchDegenerate {
        /// What went wrong.
        reason: String,
        /// Fitted omega.
        omega: f64,
        /// Fitted alpha.
        alpha: f64,
        /// Fitted beta.
        beta: f64,
    },
    /// A log score came out as NaN or infinity.
    #[error("non-finite log score")]
    NonFiniteScore,
    /// The posterior mode search failed from every start.
    #[error("MAP estimation failed: {0}")]
    MapFailed(String),
    /// MASE scale is zero (constant training series).
    #[error("MASE scale is zero: training series is constant")]
    DegenerateScale,
    /// A component model failed while building the density matrix.
    #[error("model {model} at t = {t}: {source}")]
    ModelAt {
        /// Target index.
        t: usize,
        /// Model name.
        model: String,
        /// Underlying failure.
        #[source]
        source: Box<Error>,
    },
    /// Feature computation failed at a given target index.
    #[error("features at t = {t}: {source}")]
    FeaturesAt {
        /// Target index.
        t: usize,
        /// Underlying failure.
        #[source]
        source: Box<Error>,
    },
    /// A pipeline stage failed.
    #[error("{stage}: {source}")]
    Stage {
        /// Stage name.
        stage: &'static str,
        /// Underlying failure.
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// True when the root cause is numerical rather than a data or argument problem.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::EtsNonConvergence { .. }
            | Error::GarchDegenerate { .. }
            | Error::NonFiniteScore
            | Error::MapFailed(_)
            | Error::DegenerateScale => true,
            Error::ModelAt { source, .. }
            | Error::FeaturesAt { source, .. }
            | Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
