use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing label column")]
    MissingLabelColumn,
    #[error("zero data rows")]
    EmptyTable,
    #[error("no informative features")]
    NoInformativeFeatures,
    #[error("degenerate labels")]
    DegenerateLabels,
    #[error("positive label not found: {0}")]
    PositiveLabelNotFound(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("sample fraction leaves a class empty")]
    ClassVanished,
    #[error("train fraction too small to include both classes")]
    TrainSetTooSmall,
    #[error("k exceeds training rows ({k} > {rows})")]
    KTooLarge { k: usize, rows: usize },
    #[error("class too small for folds")]
    ClassTooSmallForFolds,
    #[error("probability calibration not fitted")]
    CalibrationUnfitted,
    #[error("empty input")]
    EmptyInput,
    #[error("mixed model names in aggregation")]
    MixedModelNames,
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown model name: {0}")]
    UnknownModel(String),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code taxonomy: 1 config, 2 data, 3 training.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) | InvalidParameter { .. } | UnknownModel(_) => 1,
            Io(_) | Csv(_) | MissingLabelColumn | EmptyTable | NoInformativeFeatures
            | PositiveLabelNotFound(_) | ClassVanished | EmptyInput | Serde(_)
            | DegenerateLabels | TrainSetTooSmall => 2,
            DimensionMismatch { .. } | KTooLarge { .. } | ClassTooSmallForFolds
            | CalibrationUnfitted | MixedModelNames => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
