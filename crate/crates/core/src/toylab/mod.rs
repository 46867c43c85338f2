//! Desk-scale harness for the temporal speaker-disentanglement effect.
//!
//! Pieces: a synthetic two-speaker mixture generator (token embeddings
//! rendered over frame spans, summed where speakers overlap), a frame-local
//! linear model standing in for an acoustic encoder, a deterministic
//! gradient-descent trainer over the CTC or speaker-aware objective, and
//! emission-occupancy statistics. The headline statistic is the compliance
//! rate: the fraction of token end-frame mass that falls on the risk-preferred
//! side of the speaker boundary. Training with a sharp risk factor should
//! raise it well above the vanilla-CTC baseline.

mod experiment;
mod generator;
mod model;
mod stats;
mod train;

pub use experiment::{
    run_experiment, ExperimentConfig, ExperimentResult, ModeSummary, RunResult, RunSpec,
};
pub use generator::{mixture_stream, synth_mixture, GeneratorConfig, SyntheticMixture};
pub use model::{ModelConfig, ParamGrad, ToyModel};
pub use stats::{emission_stats, EmissionStats};
pub use train::{train, OptimizerConfig, TrainOutcome};
