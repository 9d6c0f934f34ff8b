use std::path::PathBuf;

/// Every failure the library can report.
///
/// Variants are grouped loosely by the module that raises them. [`Error::is_io`] separates
/// input/output problems from computational ones, which the CLI maps to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // state matrices and partitions
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("value {value} at row {row}, column {column} is not binary")]
    NonBinaryValue { row: usize, column: usize, value: String },
    #[error("duplicate node label {0:?}")]
    DuplicateLabel(String),
    #[error("{labels} labels given for {columns} columns")]
    LabelCountMismatch { labels: usize, columns: usize },
    #[error("state matrix needs at least 2 time steps, got {0}")]
    TooFewSteps(usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    // information measures
    #[error("time delay {tau} out of range for {steps} steps (need 1 <= tau <= steps - 1)")]
    TauOutOfRange { tau: usize, steps: usize },
    #[error("node subset is empty")]
    EmptySubset,
    #[error("node subset of {0} nodes exceeds the 64-node state key width")]
    SubsetTooLarge(usize),
    #[error("probabilities sum to {0}, not 1")]
    UnnormalizedDistribution(f64),

    // phi engine
    #[error("{nodes} nodes exceed the bipartition enumeration cap of {cap}")]
    NodeCapExceeded { nodes: usize, cap: usize },
    #[error("every bipartition has a part with zero past-state entropy")]
    AllBipartitionsDegenerate,
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("fewer than 2 nodes remain and no valid phi was found")]
    ExhaustedNodes,
    #[error("no valid phi values to aggregate")]
    NoValidResults,

    // graph sampling
    #[error("graph has {available} nodes, sampling goal is {goal}")]
    InsufficientNodes { available: usize, goal: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // ingestion
    #[error("volume tracks are not aligned: {0}")]
    MisalignedTracks(String),
    #[error("volume threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("speaker {0:?} is not in the roster")]
    UnknownSpeaker(String),
    #[error("chat log needs at least 2 lines, got {0}")]
    TooFewLines(usize),
    #[error("edit records are not sorted by timestamp (record {0})")]
    UnsortedInput(usize),
    #[error("edit records mix articles {0:?} and {1:?}")]
    MixedArticles(String, String),
    #[error("window needs at least 2 edits, got {0}")]
    TooFewEdits(usize),
    #[error("node set is empty")]
    EmptyNodeSet,
    #[error("time step size must be positive, got {0} ms")]
    NonPositiveDelta(f64),
    #[error("unknown quality class {0:?}")]
    UnknownQuality(String),

    // statistics
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("sequence has zero variance")]
    ZeroVariance,
    #[error("sample is empty")]
    EmptySample,
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("break date lies outside the observed date range")]
    BreakOutOfRange,

    // i/o
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures reading or writing data, as opposed to computation errors.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::File { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_)
        )
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RaggedRows { .. } => "RaggedRows",
            Error::NonBinaryValue { .. } => "NonBinaryValue",
            Error::DuplicateLabel(_) => "DuplicateLabel",
            Error::LabelCountMismatch { .. } => "LabelCountMismatch",
            Error::TooFewSteps(_) => "TooFewSteps",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::TauOutOfRange { .. } => "TauOutOfRange",
            Error::EmptySubset => "EmptySubset",
            Error::SubsetTooLarge(_) => "SubsetTooLarge",
            Error::UnnormalizedDistribution(_) => "UnnormalizedDistribution",
            Error::NodeCapExceeded { .. } => "NodeCapExceeded",
            Error::AllBipartitionsDegenerate => "AllBipartitionsDegenerate",
            Error::SingularCovariance => "SingularCovariance",
            Error::ExhaustedNodes => "ExhaustedNodes",
            Error::NoValidResults => "NoValidResults",
            Error::InsufficientNodes { .. } => "InsufficientNodes",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::MisalignedTracks(_) => "MisalignedTracks",
            Error::NonPositiveThreshold(_) => "NonPositiveThreshold",
            Error::UnknownSpeaker(_) => "UnknownSpeaker",
            Error::TooFewLines(_) => "TooFewLines",
            Error::UnsortedInput(_) => "UnsortedInput",
            Error::MixedArticles(..) => "MixedArticles",
            Error::TooFewEdits(_) => "TooFewEdits",
            Error::EmptyNodeSet => "EmptyNodeSet",
            Error::NonPositiveDelta(_) => "NonPositiveDelta",
            Error::UnknownQuality(_) => "UnknownQuality",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::TooFewObservations { .. } => "TooFewObservations",
            Error::ZeroVariance => "ZeroVariance",
            Error::EmptySample => "EmptySample",
            Error::RankDeficientDesign => "RankDeficientDesign",
            Error::BreakOutOfRange => "BreakOutOfRange",
            Error::Parse { .. } => "Parse",
            Error::File { .. } => "File",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
