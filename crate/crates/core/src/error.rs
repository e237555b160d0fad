use thiserror::Error;

use crate::domain::ChatMessage;

/// Crate-wide error type. Variants map onto the CLI exit-code classes:
/// validation (1), provider (2), missing artifact (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("unknown attachment style {input:?}; valid variants: avoidant, secure, preoccupied")]
    UnknownStyle { input: String },

    #[error("missing profile key `{0}`")]
    MissingKey(String),

    #[error("bad value for `{key}`: {detail}")]
    FieldType { key: String, detail: String },

    #[error("no JSON object found in provider output")]
    NoObjectFound,

    #[error("malformed JSON object: {0}")]
    MalformedObject(String),

    #[error("generation failed after {attempts} attempts: {detail}")]
    GenerationFailed { attempts: u32, detail: String },

    #[error("provider authentication failed: {0}")]
    Auth(String),

    #[error("provider rate limit persisted after retries: {0}")]
    RateLimited(String),

    #[error("provider request timed out: {0}")]
    Timeout(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("zero-norm vector encountered ({0})")]
    ZeroNorm(String),

    #[error("schema error in {file} line {line}: {detail}")]
    Schema {
        file: String,
        line: usize,
        detail: String,
    },

    #[error("interview failed at turn {turn}: {source}")]
    InterviewTurn {
        turn: usize,
        #[source]
        source: Box<Error>,
    },

    /// Mid-interview failure; carries the turns completed so far.
    #[error("interview aborted after {} turns: {source}", completed.len())]
    PartialTranscript {
        completed: Vec<ChatMessage>,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact: {0} (run the `{1}` stage first)")]
    MissingArtifact(String, String),

    #[error("optimizer diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code class for the CLI: 1 validation, 2 provider, 3 missing artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Auth(_)
            | Error::RateLimited(_)
            | Error::Timeout(_)
            | Error::Provider(_) => 2,
            Error::MissingArtifact(..) => 3,
            Error::InterviewTurn { source, .. } | Error::PartialTranscript { source, .. } => {
                source.exit_code()
            }
            _ => 1,
        }
    }

    /// Transient provider failures worth retrying (timeouts, 429s, 5xx-class).
    pub fn is_transient(&self) -> bool {
        matches!(self, Error::Timeout(_) | Error::RateLimited(_) | Error::Provider(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
