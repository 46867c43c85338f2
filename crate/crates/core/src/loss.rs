//! Training objectives with analytic gradients: vanilla CTC, Bayes-risk CTC
//! over end-frame groups, and the speaker-aware instance.
//!
//! All losses take raw logits, apply a log-softmax, and differentiate the
//! objective back to the logits by recording the lattice recursions on a
//! [`Tape`]. The value path and the gradient path therefore share one
//! recursion body each (see [`crate::lattice`]).
//!
//! Per-token Bayes-risk objective: group alignment paths by the frame where
//! token `u`'s emission ends, weight the group masses `g_u(t)` by a risk
//! weight `w_u(t)` in `(0, 1]`, and minimize `-log sum_t w_u(t) g_u(t)`.
//! With uniform weights this is vanilla CTC up to a `log 2` constant.

use crate::arith::{log_sum_exp, LOG_ZERO};
use crate::lattice::{
    backward_kernel, beta_hat_kernel, extend_labels, forward_kernel, grouped_kernel,
    ExtendedLabelSeq, LabelSeq, LatticeTables, LogitGrid, PosteriorGrid,
};
use crate::serialize::{risk_weight_at, RiskSpec, SerializedLabel};
use crate::tape::{Tape, Var};
use crate::{Error, Result, TokenId};

/// Scalar loss plus its gradient with respect to every logit.
///
/// An infeasible alignment yields `loss = +inf`, an all-zero gradient, and
/// `feasible = false` instead of an error, so batched callers can skip bad
/// samples.
#[derive(Debug, Clone)]
pub struct LossResult {
    pub loss: f64,
    /// `d loss / d logit`, same `T x V` layout as the input grid.
    pub grad: LogitGrid,
    pub feasible: bool,
    /// Per-token objectives `L_u` for the risk-based losses; empty for
    /// vanilla CTC.
    pub per_token: Vec<f64>,
}

impl LossResult {
    fn infeasible(frames: usize, vocab: usize) -> Self {
        Self {
            loss: f64::INFINITY,
            grad: LogitGrid::new(frames, vocab, vec![0.0; frames * vocab])
                .expect("zero gradient grid is valid"),
            feasible: false,
            per_token: Vec::new(),
        }
    }
}

/// End-frame mass vectors `g_u(t)` in the log domain, one per label token.
#[derive(Debug, Clone)]
pub struct GroupedPosterior {
    per_token_end: Vec<Vec<f64>>,
    total_log_prob: f64,
}

impl GroupedPosterior {
    /// Log-domain end-frame masses for token `u` (0-based).
    pub fn log_mass(&self, u: usize) -> &[f64] {
        &self.per_token_end[u]
    }

    pub fn token_count(&self) -> usize {
        self.per_token_end.len()
    }

    pub fn frames(&self) -> usize {
        self.per_token_end.first().map_or(0, Vec::len)
    }

    /// `log P(l|x)`.
    pub fn total_log_prob(&self) -> f64 {
        self.total_log_prob
    }

    /// Probability-domain end-frame distribution of token `u`, normalized to
    /// sum 1.
    pub fn normalized(&self, u: usize) -> Vec<f64> {
        self.per_token_end[u]
            .iter()
            .map(|&g| (g - self.total_log_prob).exp())
            .collect()
    }
}

/// Options for the speaker-aware objective. Defaults follow the printed
/// formulas with per-speaker normalization.
#[derive(Debug, Clone, Copy, Default)]
pub struct SactcOptions {
    /// Normalize frame positions as `(t - 0.5) / T` (frame centers) instead
    /// of the printed `t / T`.
    pub frame_center: bool,
    /// Divide every token's objective by the total serialized token count
    /// (the literal `1/U` reading) instead of each speaker's own count.
    pub literal_normalization: bool,
    /// Constrain `<sc>` tokens too, with the risk of the speaker they
    /// terminate. By default `<sc>` participates in the lattice but not in
    /// the risk.
    pub risk_on_sc: bool,
}

/// Per-frame log-softmax of the logits. Shift-invariant per frame.
pub fn softmax_log(logits: &LogitGrid) -> PosteriorGrid {
    let (frames, vocab) = (logits.frames(), logits.vocab());
    let mut log_values = Vec::with_capacity(frames * vocab);
    for t in 0..frames {
        let row = logits.row(t);
        let norm = log_sum_exp(row);
        log_values.extend(row.iter().map(|&x| x - norm));
    }
    PosteriorGrid::trusted(frames, vocab, log_values)
}

/// Vanilla CTC: `-log P(l|x)` with gradient.
pub fn ctc_loss(logits: &LogitGrid, labels: &LabelSeq, blank_id: TokenId) -> Result<LossResult> {
    let ext = extend_labels(labels, blank_id)?;
    check_vocab(&ext, logits.vocab())?;
    if logits.frames() < ext.min_frames() {
        return Ok(LossResult::infeasible(logits.frames(), logits.vocab()));
    }
    let (frames, vocab) = (logits.frames(), logits.vocab());
    let mut tape = Tape::new();
    let (logit_vars, node_post) = tape_posteriors(&mut tape, logits, &ext);
    let alpha = forward_kernel(&mut tape, &ext, frames, &node_post);
    let w = ext.len();
    let total = if w > 1 {
        let (a, b) = (alpha[(frames - 1) * w + w - 1], alpha[(frames - 1) * w + w - 2]);
        tape.log_add2(a, b)
    } else {
        alpha[(frames - 1) * w]
    };
    let loss = -tape.value(total);
    let grad = extract_grad(&tape.gradient(&[(total, -1.0)]), &logit_vars, frames, vocab)?;
    Ok(LossResult {
        loss,
        grad,
        feasible: true,
        per_token: Vec::new(),
    })
}

/// End-frame mass vectors `g_u(t) = alpha(t,2u) * beta_hat(t,2u) / y^t` for
/// every token of the serialized label, computed from a posterior grid.
pub fn grouped_posteriors(
    post: &PosteriorGrid,
    label: &SerializedLabel,
    blank_id: TokenId,
) -> Result<GroupedPosterior> {
    let labels = label.label_seq();
    let ext = extend_labels(&labels, blank_id)?;
    let tables = LatticeTables::compute(post, &ext)?;
    let mut ar = crate::arith::F64Arith::default();
    let node_post = node_posteriors(post, &ext);
    let frames = post.frames();
    let w = ext.len();
    let alpha_flat: Vec<f64> = flatten(&tables.alpha, frames, w);
    let bh_flat: Vec<f64> = flatten(&tables.beta_hat, frames, w);
    let per_token_end = grouped_kernel(&mut ar, &ext, frames, &node_post, &alpha_flat, &bh_flat);
    Ok(GroupedPosterior {
        per_token_end,
        total_log_prob: tables.total_log_prob(),
    })
}

/// Bayes-risk CTC with a caller-supplied weight function over
/// `(token index, 1-based frame)`; the loss is the mean of the per-token
/// objectives over all tokens of the serialized label.
pub fn brctc_loss(
    logits: &LogitGrid,
    label: &SerializedLabel,
    risk_fn: impl Fn(usize, usize) -> f64,
    blank_id: TokenId,
) -> Result<LossResult> {
    let frames = logits.frames();
    let token_count = label.len();
    let mut weights = Vec::with_capacity(token_count);
    for u in 0..token_count {
        let row: Vec<f64> = (1..=frames).map(|t| risk_fn(u, t)).collect();
        validate_weights(u, &row)?;
        weights.push(row);
    }
    let coeff = vec![1.0 / token_count as f64; token_count];
    risk_loss(logits, label, &weights, &coeff, blank_id)
}

/// Speaker-aware CTC with default options; see [`sactc_loss_with`].
pub fn sactc_loss(
    logits: &LogitGrid,
    label: &SerializedLabel,
    spec: &RiskSpec,
    blank_id: TokenId,
) -> Result<LossResult> {
    sactc_loss_with(logits, label, spec, blank_id, &SactcOptions::default())
}

/// Speaker-aware CTC: every constrained token `u` contributes
/// `-log sum_t w(s_u, t) g_u(t)`, aggregated as
/// `(1/S) sum_s (1/U_s) sum_{u in s} L_u`.
///
/// Defined for exactly two speakers. `<sc>` tokens stay in the lattice but
/// are excluded from the risk unless [`SactcOptions::risk_on_sc`] is set.
pub fn sactc_loss_with(
    logits: &LogitGrid,
    label: &SerializedLabel,
    spec: &RiskSpec,
    blank_id: TokenId,
    opts: &SactcOptions,
) -> Result<LossResult> {
    if label.speaker_count() != 2 {
        return Err(Error::UnsupportedSpeakerCount {
            count: label.speaker_count(),
        });
    }
    let frames = logits.frames();
    let token_count = label.len();
    let speakers = label.speaker_count();

    let constrained: Vec<bool> = (0..token_count)
        .map(|u| !label.is_sc(u) || opts.risk_on_sc)
        .collect();
    // Tokens each speaker contributes to the objective, for normalization.
    let mut per_speaker: Vec<usize> = vec![0; speakers];
    for u in 0..token_count {
        if constrained[u] {
            per_speaker[label.speaker_of(u) - 1] += 1;
        }
    }

    let mut weights = Vec::with_capacity(token_count);
    let mut coeff = Vec::with_capacity(token_count);
    for u in 0..token_count {
        if !constrained[u] {
            weights.push(Vec::new());
            coeff.push(0.0);
            continue;
        }
        let s = label.speaker_of(u);
        let row: Vec<f64> = (1..=frames)
            .map(|t| {
                let pos = if opts.frame_center {
                    (t as f64 - 0.5) / frames as f64
                } else {
                    t as f64 / frames as f64
                };
                risk_weight_at(spec, s, pos)
            })
            .collect();
        weights.push(row);
        let norm = if opts.literal_normalization {
            token_count as f64
        } else {
            per_speaker[s - 1] as f64
        };
        coeff.push(1.0 / (speakers as f64 * norm));
    }
    risk_loss(logits, label, &weights, &coeff, blank_id)
}

/// Which objective drives [`combined_loss`] and the toy trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    Ctc,
    Sactc,
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossMode::Ctc => f.write_str("ctc"),
            LossMode::Sactc => f.write_str("sactc"),
        }
    }
}

/// Main objective selected by `mode` plus `aux_weight` times vanilla CTC,
/// with summed gradients.
pub fn combined_loss(
    logits: &LogitGrid,
    label: &SerializedLabel,
    spec: &RiskSpec,
    mode: LossMode,
    aux_weight: f64,
    blank_id: TokenId,
) -> Result<LossResult> {
    if !(aux_weight >= 0.0) || !aux_weight.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "aux weight must be finite and nonnegative, got {aux_weight}"
        )));
    }
    let labels = label.label_seq();
    let mut main = match mode {
        LossMode::Ctc => ctc_loss(logits, &labels, blank_id)?,
        LossMode::Sactc => sactc_loss(logits, label, spec, blank_id)?,
    };
    if aux_weight == 0.0 {
        return Ok(main);
    }
    let aux = ctc_loss(logits, &labels, blank_id)?;
    if !main.feasible || !aux.feasible {
        return Ok(LossResult::infeasible(logits.frames(), logits.vocab()));
    }
    main.loss += aux_weight * aux.loss;
    for t in 0..logits.frames() {
        for k in 0..logits.vocab() {
            let v = main.grad.get(t, k) + aux_weight * aux.grad.get(t, k);
            main.grad.set(t, k, v);
        }
    }
    Ok(main)
}

/// Shared risk-loss body: per-token weighted end-frame objectives with
/// aggregation coefficients (`coeff[u] == 0` skips a token entirely).
fn risk_loss(
    logits: &LogitGrid,
    label: &SerializedLabel,
    weights: &[Vec<f64>],
    coeff: &[f64],
    blank_id: TokenId,
) -> Result<LossResult> {
    let labels = label.label_seq();
    let ext = extend_labels(&labels, blank_id)?;
    check_vocab(&ext, logits.vocab())?;
    let (frames, vocab) = (logits.frames(), logits.vocab());
    if frames < ext.min_frames() {
        return Ok(LossResult::infeasible(frames, vocab));
    }

    let mut tape = Tape::new();
    let (logit_vars, node_post) = tape_posteriors(&mut tape, logits, &ext);
    let alpha = forward_kernel(&mut tape, &ext, frames, &node_post);
    let beta = backward_kernel(&mut tape, &ext, frames, &node_post);
    let beta_hat = beta_hat_kernel(&mut tape, &ext, frames, &node_post, &beta);
    let grouped = grouped_kernel(&mut tape, &ext, frames, &node_post, &alpha, &beta_hat);

    let token_count = label.len();
    let mut per_token = vec![0.0; token_count];
    let mut loss = 0.0;
    let mut seeds: Vec<(Var, f64)> = Vec::new();
    for u in 0..token_count {
        if coeff[u] == 0.0 {
            per_token[u] = f64::NAN;
            continue;
        }
        let objective = tape.log_sum_weighted(&grouped[u], &weights[u]);
        if tape.value(objective) == LOG_ZERO {
            return Err(Error::DegenerateRisk { token: u });
        }
        per_token[u] = -tape.value(objective);
        loss += coeff[u] * per_token[u];
        seeds.push((objective, -coeff[u]));
    }
    let grad = extract_grad(&tape.gradient(&seeds), &logit_vars, frames, vocab)?;
    Ok(LossResult {
        loss,
        grad,
        feasible: true,
        per_token,
    })
}

/// Log-softmax on the tape; returns the logit leaves and the gathered
/// per-node posteriors for the extended label sequence.
fn tape_posteriors(
    tape: &mut Tape,
    logits: &LogitGrid,
    ext: &ExtendedLabelSeq,
) -> (Vec<Var>, Vec<Var>) {
    let (frames, vocab) = (logits.frames(), logits.vocab());
    let mut logit_vars = Vec::with_capacity(frames * vocab);
    for t in 0..frames {
        for k in 0..vocab {
            logit_vars.push(tape.input(logits.get(t, k)));
        }
    }
    let mut log_post = Vec::with_capacity(frames * vocab);
    for t in 0..frames {
        let row = &logit_vars[t * vocab..(t + 1) * vocab];
        let norm = tape.log_sum(row);
        for k in 0..vocab {
            log_post.push(tape.sub(row[k], norm));
        }
    }
    let mut node_post = Vec::with_capacity(frames * ext.len());
    for t in 0..frames {
        for &tok in ext.tokens() {
            node_post.push(log_post[t * vocab + tok]);
        }
    }
    (logit_vars, node_post)
}

fn extract_grad(
    adjoints: &crate::tape::Adjoints,
    logit_vars: &[Var],
    frames: usize,
    vocab: usize,
) -> Result<LogitGrid> {
    let values: Vec<f64> = logit_vars.iter().map(|&v| adjoints.get(v)).collect();
    LogitGrid::new(frames, vocab, values)
}

fn validate_weights(u: usize, row: &[f64]) -> Result<()> {
    for (i, &w) in row.iter().enumerate() {
        if !(0.0..=1.0).contains(&w) || w.is_nan() {
            return Err(Error::InvalidRiskWeight {
                token: u,
                frame: i + 1,
                weight: w,
            });
        }
    }
    Ok(())
}

fn check_vocab(ext: &ExtendedLabelSeq, vocab: usize) -> Result<()> {
    for &t in ext.tokens() {
        if t >= vocab {
            return Err(Error::TokenOutOfRange { token: t, vocab });
        }
    }
    Ok(())
}

fn node_posteriors(post: &PosteriorGrid, ext: &ExtendedLabelSeq) -> Vec<f64> {
    let mut out = Vec::with_capacity(post.frames() * ext.len());
    for t in 0..post.frames() {
        for &tok in ext.tokens() {
            out.push(post.get(t, tok));
        }
    }
    out
}

fn flatten(table: &crate::lattice::LatticeTable, frames: usize, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(frames * width);
    for t in 0..frames {
        out.extend_from_slice(table.row(t));
    }
    debug_assert_eq!(out.len(), frames * width);
    out
}
