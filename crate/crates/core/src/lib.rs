//! Speaker-aware CTC training objectives for multi-talker speech recognition.
//!
//! This crate implements the CTC family of sequence training criteria over a
//! blank-augmented alignment lattice, together with a Bayes-risk extension
//! whose risk function pushes each speaker's token emissions into a designated
//! temporal region of the input. Everything is computed in the log domain with
//! exact analytic gradients with respect to frame logits.
//!
//! Module map:
//!
//! - [`lattice`]: extended label construction and the forward, backward, and
//!   revised-backward dynamic programs over the CTC lattice.
//! - [`serialize`]: SOT-style serialized labels (`<sc>`-joined multi-speaker
//!   transcripts) and the speaker-conditional sigmoid risk weights.
//! - [`loss`]: vanilla CTC, generic Bayes-risk CTC, and speaker-aware CTC
//!   losses with gradients.
//! - [`oracle`]: brute-force path enumeration and finite-difference gradients
//!   for small instances; the independent reference the fast path is checked
//!   against.
//! - [`decode`]: the collapse function and greedy best-path decoding.
//! - [`metrics`]: WER, permutation-invariant WER, overlap-ratio binning, and
//!   overlap-aware WER.
//! - [`toylab`]: synthetic two-speaker mixtures, a tiny frame-local model, a
//!   deterministic trainer, and emission-occupancy statistics.
//! - [`verify`]: randomized oracle-equivalence, gradient, and lattice-invariant
//!   suites shared by the CLI and the acceptance tests.

pub mod arith;
pub mod decode;
mod error;
pub mod lattice;
pub mod loss;
pub mod metrics;
pub mod oracle;
pub mod serialize;
pub mod tape;
pub mod toylab;
pub mod verify;

pub use error::Error;

/// Token identifier: an index into the vocabulary, `0 <= id < V`.
pub type TokenId = usize;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
