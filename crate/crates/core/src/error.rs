use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("token {token} is outside the vocabulary of size {vocab_size}")]
    TokenOutOfVocabulary { token: u32, vocab_size: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("at least two classes are required, got {0}")]
    TooFewClasses(usize),

    #[error("feature matrix has no sequence view")]
    MissingSequenceView,

    #[error("z-score normalization requested without per-class statistics")]
    MissingNormalization,

    #[error("row {row} is not stochastic (sums to {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("class {0} has too few samples to split")]
    FamilyTooSmall(usize),

    #[error("weak learner error {error} is no better than chance for {classes} classes")]
    NoWeakLearnability { error: f64, classes: usize },

    #[error("members disagree on the number of classes ({expected} vs {found})")]
    InconsistentClasses { expected: usize, found: usize },

    #[error("component {index} failed: {source}")]
    Component { index: usize, source: Box<Error> },

    #[error("unsupported ensemble: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_component(index: usize) -> impl FnOnce(Error) -> Error {
        move |source| Error::Component {
            index,
            source: Box::new(source),
        }
    }
}
