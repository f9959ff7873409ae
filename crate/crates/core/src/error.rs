use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedColumns {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),

    #[error("spans ({a_start}, {a_end}) and ({b_start}, {b_end}) overlap")]
    OverlappingSpans {
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },

    #[error("span ({start}, {end}) out of bounds for length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("length mismatch in sentence {sentence}: {left} vs {right}")]
    LengthMismatch {
        sentence: usize,
        left: usize,
        right: usize,
    },

    #[error("sentence {0} has no gold labels")]
    MissingGold(usize),

    #[error("no prediction for span ({start}, {end}) of sentence {sentence}")]
    MissingPrediction {
        sentence: usize,
        start: usize,
        end: usize,
    },

    #[error("{name} must be in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in {tensor} at index {index}: {value}")]
    NonFiniteGradient {
        tensor: &'static str,
        index: usize,
        value: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error("no noisy positives to calibrate against")]
    NoNoisyPositives,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::TrainingAborted(_) | Error::NonFiniteGradient { .. })
    }
}
