use thiserror::Error;

/// Errors reported by lattice, loss, serialization, and scoring operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("label sequence is empty")]
    EmptyLabels,

    #[error("blank id {blank} must not appear in the label sequence (position {position})")]
    BlankInLabels { blank: usize, position: usize },

    #[error("token id {token} out of range for vocabulary size {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },

    #[error("grid entry at frame {frame}, token {token} is not finite")]
    NonFiniteValue { frame: usize, token: usize },

    #[error("frame {frame}: log-probabilities sum to {total:e} instead of 1")]
    UnnormalizedFrame { frame: usize, total: f64 },

    #[error("no alignment fits: {frames} frames < minimum {required} for this label sequence")]
    InfeasibleAlignment { frames: usize, required: usize },

    #[error(
        "revised backward variable at frame {frame}, position {position} is negative \
         (relative excess {excess:e}); forward/backward tables are inconsistent"
    )]
    NegativeProbability {
        frame: usize,
        position: usize,
        excess: f64,
    },

    #[error("speaker list is empty")]
    NoSpeakers,

    #[error("speaker {speaker} has an empty transcript")]
    EmptyTranscript { speaker: usize },

    #[error("speaker-change id {sc} appears inside speaker {speaker}'s transcript")]
    ScInTranscript { sc: usize, speaker: usize },

    #[error("operation requires exactly 2 speakers, got {count}")]
    UnsupportedSpeakerCount { count: usize },

    #[error("risk weight {weight} for token {token} at frame {frame} is outside [0, 1]")]
    InvalidRiskWeight {
        token: usize,
        frame: usize,
        weight: f64,
    },

    #[error("risk weights assign zero total mass to token {token}")]
    DegenerateRisk { token: usize },

    #[error("enumeration budget exceeded: {paths} candidate paths > budget {budget}")]
    BudgetExceeded { paths: f64, budget: f64 },

    #[error("permutation budget exceeded: {speakers} speakers > limit {limit}")]
    PermutationBudget { speakers: usize, limit: usize },

    #[error("missing overlap bin {bin} in per-bin WER map")]
    MissingBin { bin: String },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("label file: {0}")]
    LabelFile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
