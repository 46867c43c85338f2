//! Experiment driver: train per (seed, objective) and score compliance on
//! held-out mixtures.

use serde::{Deserialize, Serialize};

use super::generator::{mixture_stream, synth_mixture, GeneratorConfig, SyntheticMixture};
use super::model::{ModelConfig, ToyModel};
use super::stats::emission_stats;
use super::train::{train, OptimizerConfig};
use crate::loss::LossMode;
use crate::serialize::RiskSpec;
use crate::{Error, Result};

/// One objective to train: the loss mode and its risk factor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RunSpec {
    pub mode: LossMode,
    #[serde(default)]
    pub lambda: f64,
}

/// Full experiment description; the JSON config file deserializes into this.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub runs: Vec<RunSpec>,
    pub seeds: Vec<u64>,
    /// Held-out mixtures scored after training.
    pub eval_mixtures: usize,
    pub eval_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            model: ModelConfig::default(),
            optimizer: OptimizerConfig::default(),
            runs: vec![
                RunSpec {
                    mode: LossMode::Ctc,
                    lambda: 0.0,
                },
                RunSpec {
                    mode: LossMode::Sactc,
                    lambda: 15.0,
                },
            ],
            seeds: vec![1, 2, 3, 4, 5],
            eval_mixtures: 16,
            eval_seed: 900_000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.optimizer.validate()?;
        if self.runs.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "experiment needs at least one run and one seed".into(),
            ));
        }
        if self.eval_mixtures == 0 {
            return Err(Error::InvalidConfig(
                "experiment needs at least one held-out mixture".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one (seed, objective) training run.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub mode: LossMode,
    pub lambda: f64,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Mean compliance over the held-out mixtures.
    pub compliance: f64,
    /// Mean per-speaker center of mass over the held-out mixtures.
    pub center_of_mass: [f64; 2],
    /// Per-step training losses.
    pub curve: Vec<f64>,
}

/// Per-objective aggregate over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSummary {
    pub mode: LossMode,
    pub lambda: f64,
    pub mean_compliance: f64,
    pub mean_center_of_mass: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub summary: Vec<ModeSummary>,
}

impl ExperimentResult {
    /// Mean compliance of the run matching `mode` and `lambda`, if present.
    pub fn mean_compliance(&self, mode: LossMode, lambda: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.mode == mode && s.lambda == lambda)
            .map(|s| s.mean_compliance)
    }
}

/// Train every configured objective from the same per-seed initialization
/// and score all of them on the same held-out mixtures.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let held_out: Vec<SyntheticMixture> = (0..cfg.eval_mixtures as u64)
        .map(|j| synth_mixture(&cfg.generator, cfg.eval_seed.wrapping_add(j)))
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(cfg.runs.len() * cfg.seeds.len());
    for &seed in &cfg.seeds {
        let init = ToyModel::new(
            cfg.generator.vocab_size(),
            cfg.generator.frame_dim(),
            cfg.model.window,
            seed,
        )?;
        // Training mixtures are seeded far away from the held-out range.
        let data_seed = seed.wrapping_mul(1_000_003).wrapping_add(1);
        for run in &cfg.runs {
            let outcome = train(
                init.clone(),
                mixture_stream(cfg.generator.clone(), data_seed),
                run.mode,
                run.lambda,
                &cfg.optimizer,
            )?;
            let mut compliance = 0.0;
            let mut com = [0.0; 2];
            for mix in &held_out {
                let spec = RiskSpec::for_label(&mix.label, run.lambda)?;
                let stats = emission_stats(&outcome.model, mix, &spec)?;
                compliance += stats.compliance;
                com[0] += stats.center_of_mass[0];
                com[1] += stats.center_of_mass[1];
            }
            let n = held_out.len() as f64;
            runs.push(RunResult {
                mode: run.mode,
                lambda: run.lambda,
                seed,
                initial_loss: outcome.curve.first().copied().unwrap_or(f64::NAN),
                final_loss: outcome.curve.last().copied().unwrap_or(f64::NAN),
                compliance: compliance / n,
                center_of_mass: [com[0] / n, com[1] / n],
                curve: outcome.curve,
            });
        }
    }

    let summary = cfg
        .runs
        .iter()
        .map(|run| {
            let matching: Vec<&RunResult> = runs
                .iter()
                .filter(|r| r.mode == run.mode && r.lambda == run.lambda)
                .collect();
            let n = matching.len() as f64;
            ModeSummary {
                mode: run.mode,
                lambda: run.lambda,
                mean_compliance: matching.iter().map(|r| r.compliance).sum::<f64>() / n,
                mean_center_of_mass: [
                    matching.iter().map(|r| r.center_of_mass[0]).sum::<f64>() / n,
                    matching.iter().map(|r| r.center_of_mass[1]).sum::<f64>() / n,
                ],
            }
        })
        .collect();

    Ok(ExperimentResult { runs, summary })
}
