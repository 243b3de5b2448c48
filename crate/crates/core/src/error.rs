use thiserror::Error;

/// Errors raised by dataset validation, model fitting and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: treatment value {value} is not 0 or 1")]
    NonBinaryTreatment { row: usize, value: f64 },

    #[error("treatment arm {arm} has no observations")]
    EmptyArm { arm: u8 },

    #[error("row {row}, column `{column}`: non-finite value")]
    NonFiniteValue { row: usize, column: String },

    #[error("row {row}, column `{column}`: cannot parse `{text}`")]
    Parse { row: usize, column: String, text: String },

    #[error("bad input shape: {0}")]
    Shape(String),

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("cannot split {n} rows into {k} folds (need 2 <= k <= n)")]
    BadFoldCount { n: usize, k: usize },

    #[error("{loss}: argument {value} is outside the loss domain ({location})")]
    Domain { loss: String, value: f64, location: String },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("regularization strength must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("leave-one-out needs n_de >= 2 and n_nu >= 2 (got n_de = {n_de}, n_nu = {n_nu})")]
    TooFewSamples { n_de: usize, n_nu: usize },

    #[error("waymark {waymark} would hold {got} samples, need at least {needed}")]
    InsufficientWaymarkSamples { waymark: usize, got: usize, needed: usize },

    #[error("training complement of fold {fold} has no observations in arm {arm}")]
    EmptyArmInFold { fold: usize, arm: u8 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the input data (as opposed to numerical
    /// failures or bad configuration).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::NonBinaryTreatment { .. }
                | Error::EmptyArm { .. }
                | Error::NonFiniteValue { .. }
                | Error::Parse { .. }
                | Error::Shape(_)
                | Error::TooFewRows { .. }
                | Error::TooFewSamples { .. }
                | Error::InsufficientWaymarkSamples { .. }
                | Error::EmptyArmInFold { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }

    /// True for configuration / usage errors.
    pub fn is_usage_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::BadFoldCount { .. }
                | Error::NonPositiveLambda(_)
                | Error::DegenerateDesign(_)
        )
    }

    pub(crate) fn domain(loss: impl ToString, value: f64, location: impl Into<String>) -> Self {
        Error::Domain { loss: loss.to_string(), value, location: location.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
