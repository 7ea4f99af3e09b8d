use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input contains no samples")]
    EmptyInput,

    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRows { line: usize, expected: usize, found: usize },

    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("class {0} has a single sample and cannot be stratified")]
    SingletonClass(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),

    #[error("tree {tree} has an empty out-of-bag set; try reduced bagging or more data")]
    EmptyOob { tree: usize },

    #[error(
        "trees {first} and {second} share no out-of-bag samples; \
         use reduced bagging or data splits with larger validation sets"
    )]
    EmptyOverlap { first: usize, second: usize },

    #[error("labels are required for this computation")]
    MissingLabels,

    #[error("{0} is only defined for binary classification")]
    RequiresBinary(&'static str),

    #[error("tree exceeded {0} nodes")]
    TooManyNodes(usize),

    #[error("inconsistent oracle statistics: {0}")]
    InconsistentOracle(String),

    #[error("unsupported document version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
