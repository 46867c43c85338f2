//! Deterministic single-sample gradient-descent training loop.

use serde::{Deserialize, Serialize};

use super::generator::SyntheticMixture;
use super::model::{ParamGrad, ToyModel};
use crate::loss::{ctc_loss, sactc_loss, LossMode};
use crate::serialize::RiskSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Number of parameter updates.
    pub steps: usize,
    /// Mixtures averaged into each update.
    pub batch_size: usize,
    /// Clip the parameter gradient to this L2 norm, if set.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            steps: 1000,
            batch_size: 8,
            clip_norm: Some(2.0),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Trained model plus the per-step loss curve.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ToyModel,
    pub curve: Vec<f64>,
    /// Mixtures skipped because no alignment fit.
    pub skipped: usize,
}

/// Run `opt.steps` gradient-descent updates of the selected objective over
/// the mixture stream, each averaging `opt.batch_size` samples. The curve
/// records the mean loss of every batch over its feasible samples.
/// Infeasible samples are skipped; a non-finite loss on a feasible sample is
/// reported as divergence with its step index.
pub fn train(
    model: ToyModel,
    data: impl IntoIterator<Item = Result<SyntheticMixture>>,
    mode: LossMode,
    lambda: f64,
    opt: &OptimizerConfig,
) -> Result<TrainOutcome> {
    opt.validate()?;
    let mut model = model;
    let mut curve = Vec::with_capacity(opt.steps);
    let mut skipped = 0;
    let mut grad = ParamGrad::zeros_like(&model);
    let mut stream = data.into_iter();
    for step in 0..opt.steps {
        grad.clear();
        let mut batch_loss = 0.0;
        let mut used = 0usize;
        for _ in 0..opt.batch_size {
            let Some(mix) = stream.next() else { break };
            let mix = mix?;
            let logits = model.forward(&mix.frames);
            let result = match mode {
                LossMode::Ctc => ctc_loss(&logits, &mix.label.label_seq(), mix.blank_id)?,
                LossMode::Sactc => {
                    let spec = RiskSpec::for_label(&mix.label, lambda)?;
                    sactc_loss(&logits, &mix.label, &spec, mix.blank_id)?
                }
            };
            if !result.feasible {
                skipped += 1;
                continue;
            }
            if !result.loss.is_finite() {
                return Err(Error::Divergence { step });
            }
            batch_loss += result.loss;
            used += 1;
            model.backprop(&mix.frames, &result.grad, &mut grad);
        }
        if used == 0 {
            curve.push(f64::INFINITY);
            continue;
        }
        curve.push(batch_loss / used as f64);
        grad.scale(1.0 / used as f64);
        if !grad.is_finite() {
            return Err(Error::Divergence { step });
        }
        if let Some(clip) = opt.clip_norm {
            let norm = grad.l2_norm();
            if norm > clip {
                grad.scale(clip / norm);
            }
        }
        model.apply(&grad, opt.learning_rate);
    }
    Ok(TrainOutcome {
        model,
        curve,
        skipped,
    })
}
