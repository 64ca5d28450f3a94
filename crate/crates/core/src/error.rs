use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}: failure indicator missing but screener is negative")]
    MissingWithNegativeScreen { row: usize },

    #[error("dataset violates {count} invariant(s); first: {first}")]
    InvalidDataset { count: usize, first: String },

    #[error("dataset contains subjects with missing failure indicators")]
    HasMissingStatus,

    #[error("dataset contains no observed events")]
    NoEvents,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Hessian of the partial likelihood is singular")]
    SingularHessian,

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("fit did not converge")]
    NotConverged,

    #[error("expected a {expected} fit")]
    WrongFamily { expected: &'static str },

    #[error("imputation training set is degenerate: {0}")]
    DegenerateTrainingSet(String),

    #[error("at least two imputations are required, got {0}")]
    MTooSmall(usize),

    #[error("probability {prob} for subject {index} is outside [0, 1]")]
    ProbOutOfRange { index: usize, prob: f64 },

    #[error("probabilities must cover exactly the subjects with missing indicators")]
    CoverageMismatch,

    #[error("bootstrap gave up after {attempts} attempts ({accepted} usable replicates)")]
    ResampleDegenerate { attempts: usize, accepted: usize },

    #[error("every replicate failed")]
    AllReplicatesFailed,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
