use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in sample `{sample}` at index {index}")]
    NonFiniteValue { sample: String, index: usize },

    #[error("sample `{0}` has zero l2 norm and cannot be normalized")]
    ZeroNormSample(String),

    #[error("class {0} has no enrolment samples")]
    MissingClass(usize),

    #[error("insufficient samples: need at least {needed}, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("requested {requested} principal components but at most {max} are available ({reason})")]
    KTooLarge {
        requested: usize,
        max: usize,
        reason: &'static str,
    },

    #[error("degenerate data: no eigenvalue above the numerical floor")]
    DegenerateData,

    #[error("singular system: the regularized Gram matrix is not positive definite (lambda = {lambda})")]
    SingularSystem { lambda: f64 },

    #[error("degenerate augmentation: both collaborative and sparse codes vanish")]
    DegenerateAugmentation,

    #[error("unknown class {class} (dictionary has {num_classes} classes)")]
    UnknownClass { class: usize, num_classes: usize },

    #[error("score set needs at least one genuine and one impostor record (genuine: {genuine}, impostor: {impostor})")]
    DegenerateScoreSet { genuine: usize, impostor: usize },

    #[error("non-finite score for probe `{0}`")]
    NonFiniteScore(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}
