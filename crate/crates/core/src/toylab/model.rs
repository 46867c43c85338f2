//! Frame-local linear model: a stand-in encoder mapping a symmetric window
//! of feature frames to per-frame logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::lattice::LogitGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Symmetric context window in frames; must be odd.
    pub window: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { window: 5 }
    }
}

/// Linear map from a `window x feature_dim` context to `vocab` logits.
/// Deterministic given parameters and input.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    vocab: usize,
    feature_dim: usize,
    window: usize,
    weights: Vec<f64>, // vocab x (window * feature_dim), row-major
    bias: Vec<f64>,
}

/// Parameter-space gradient accumulator matching a [`ToyModel`]'s shape.
#[derive(Debug, Clone)]
pub struct ParamGrad {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ParamGrad {
    pub fn zeros_like(model: &ToyModel) -> Self {
        Self {
            weights: vec![0.0; model.weights.len()],
            bias: vec![0.0; model.bias.len()],
        }
    }

    pub fn clear(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self
            .weights
            .iter()
            .chain(&self.bias)
            .map(|&g| g * g)
            .sum();
        sq.sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.bias.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|g| g.is_finite())
    }
}

impl ToyModel {
    /// Random initialization scaled by `1/sqrt(window * feature_dim)`.
    pub fn new(vocab: usize, feature_dim: usize, window: usize, seed: u64) -> Result<Self> {
        if window % 2 == 0 || window == 0 {
            return Err(Error::InvalidConfig(format!(
                "context window must be odd, got {window}"
            )));
        }
        if vocab < 2 || feature_dim == 0 {
            return Err(Error::InvalidConfig(
                "model needs vocab >= 2 and feature_dim >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_in = window * feature_dim;
        let scale = 1.0 / (fan_in as f64).sqrt();
        let weights = (0..vocab * fan_in)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let bias = vec![0.0; vocab];
        Ok(Self {
            vocab,
            feature_dim,
            window,
            weights,
            bias,
        })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Zero-padded context vector around frame `t`.
    fn context(&self, frames: &[Vec<f64>], t: usize) -> Vec<f64> {
        let half = (self.window / 2) as isize;
        let mut ctx = Vec::with_capacity(self.window * self.feature_dim);
        for dt in -half..=half {
            let idx = t as isize + dt;
            if idx >= 0 && (idx as usize) < frames.len() {
                ctx.extend_from_slice(&frames[idx as usize]);
            } else {
                ctx.extend(std::iter::repeat(0.0).take(self.feature_dim));
            }
        }
        ctx
    }

    /// Per-frame logits for the given feature frames.
    pub fn forward(&self, frames: &[Vec<f64>]) -> LogitGrid {
        let fan_in = self.window * self.feature_dim;
        let mut values = Vec::with_capacity(frames.len() * self.vocab);
        for t in 0..frames.len() {
            let ctx = self.context(frames, t);
            for k in 0..self.vocab {
                let row = &self.weights[k * fan_in..(k + 1) * fan_in];
                let dot: f64 = row.iter().zip(&ctx).map(|(w, x)| w * x).sum();
                values.push(dot + self.bias[k]);
            }
        }
        LogitGrid::new(frames.len(), self.vocab, values).expect("finite model output")
    }

    /// Accumulate parameter gradients from per-logit gradients.
    pub fn backprop(&self, frames: &[Vec<f64>], dlogits: &LogitGrid, into: &mut ParamGrad) {
        debug_assert_eq!(dlogits.frames(), frames.len());
        debug_assert_eq!(dlogits.vocab(), self.vocab);
        let fan_in = self.window * self.feature_dim;
        for t in 0..frames.len() {
            let ctx = self.context(frames, t);
            for k in 0..self.vocab {
                let d = dlogits.get(t, k);
                if d == 0.0 {
                    continue;
                }
                let row = &mut into.weights[k * fan_in..(k + 1) * fan_in];
                for (w, x) in row.iter_mut().zip(&ctx) {
                    *w += d * x;
                }
                into.bias[k] += d;
            }
        }
    }

    /// Gradient-descent update `p -= lr * g`.
    pub fn apply(&mut self, grad: &ParamGrad, learning_rate: f64) {
        for (p, g) in self.weights.iter_mut().zip(&grad.weights) {
            *p -= learning_rate * g;
        }
        for (p, g) in self.bias.iter_mut().zip(&grad.bias) {
            *p -= learning_rate * g;
        }
    }
}
