//! CTC alignment lattice: extended labels and forward/backward recursions.
//!
//! The lattice has `T x (2U+1)` nodes: one column per frame, one row per
//! position in the blank-extended label sequence `[∅, l_1, ∅, ..., ∅, l_U, ∅]`.
//! Three dynamic programs are computed over it, all in the log domain:
//!
//! - `alpha(t, v)`: total posterior of path prefixes ending at node `(t, v)`.
//! - `beta(t, v)`: total posterior of path suffixes starting at `(t, v)`,
//!   inclusive of the frame-`t` factor.
//! - `beta_hat(t, 2u)`: `beta` restricted to paths whose emission of the
//!   non-blank token at position `2u` ends exactly at frame `t`, obtained by
//!   subtracting the mass of paths that keep emitting it at `t + 1`.
//!
//! The recursion bodies are generic over [`LogArith`] so the same code runs in
//! immediate mode (producing tables) and on the differentiation tape
//! (producing gradients).

use crate::arith::{log_add, log_sum_exp, F64Arith, LogArith, LOG_ZERO};
use crate::{Error, Result, TokenId};

/// Relative negativity tolerated in the revised-backward subtraction before
/// the inputs are declared inconsistent.
pub const NEGATIVE_MASS_TOLERANCE: f64 = 1e-12;

/// A non-empty target label sequence; the blank id never appears in it
/// (checked when the sequence is extended against a concrete blank id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSeq {
    tokens: Vec<TokenId>,
}

impl LabelSeq {
    pub fn new(tokens: Vec<TokenId>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyLabels);
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Blank-extended label sequence `[∅, l_1, ∅, l_2, ..., ∅, l_U, ∅]`.
///
/// Length is exactly `2U+1`; even 0-based indices hold the blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedLabelSeq {
    tokens: Vec<TokenId>,
    blank_id: TokenId,
}

/// Insert the blank id before, between, and after the labels.
pub fn extend_labels(labels: &LabelSeq, blank_id: TokenId) -> Result<ExtendedLabelSeq> {
    if let Some(position) = labels.tokens().iter().position(|&t| t == blank_id) {
        return Err(Error::BlankInLabels {
            blank: blank_id,
            position,
        });
    }
    let mut tokens = Vec::with_capacity(2 * labels.len() + 1);
    tokens.push(blank_id);
    for &l in labels.tokens() {
        tokens.push(l);
        tokens.push(blank_id);
    }
    Ok(ExtendedLabelSeq { tokens, blank_id })
}

impl ExtendedLabelSeq {
    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn blank_id(&self) -> TokenId {
        self.blank_id
    }

    /// `2U + 1`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of original (non-blank) labels `U`.
    pub fn label_count(&self) -> usize {
        self.tokens.len() / 2
    }

    /// Original label at 0-based index `u`.
    pub fn label(&self, u: usize) -> TokenId {
        self.tokens[2 * u + 1]
    }

    /// Whether the `v-2 -> v` skip transition is allowed into 0-based
    /// position `v`: the target must be non-blank and differ from the token
    /// two positions back.
    fn skip_into(&self, v: usize) -> bool {
        v >= 2 && v % 2 == 1 && self.tokens[v] != self.tokens[v - 2]
    }

    /// Minimum number of frames admitting any valid alignment:
    /// `U` plus the count of adjacent repeated labels.
    pub fn min_frames(&self) -> usize {
        let u = self.label_count();
        let repeats = (1..u).filter(|&i| self.label(i) == self.label(i - 1)).count();
        u + repeats
    }

    fn check_vocab(&self, vocab: usize) -> Result<()> {
        for &t in &self.tokens {
            if t >= vocab {
                return Err(Error::TokenOutOfRange { token: t, vocab });
            }
        }
        Ok(())
    }
}

/// Per-frame unnormalized scores over the vocabulary, row-major `T x V`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitGrid {
    frames: usize,
    vocab: usize,
    values: Vec<f64>,
}

impl LogitGrid {
    pub fn new(frames: usize, vocab: usize, values: Vec<f64>) -> Result<Self> {
        if frames == 0 || vocab < 2 {
            return Err(Error::InvalidConfig(format!(
                "logit grid needs T >= 1 and V >= 2, got T={frames}, V={vocab}"
            )));
        }
        if values.len() != frames * vocab {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "logit payload has {} values, expected {}x{}",
                    values.len(),
                    frames,
                    vocab
                ),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                frame: bad / vocab,
                token: bad % vocab,
            });
        }
        Ok(Self {
            frames,
            vocab,
            values,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn get(&self, frame: usize, token: TokenId) -> f64 {
        self.values[frame * self.vocab + token]
    }

    pub fn set(&mut self, frame: usize, token: TokenId, value: f64) {
        self.values[frame * self.vocab + token] = value;
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.vocab..(frame + 1) * self.vocab]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per-frame log-probabilities over the vocabulary, row-major `T x V`.
/// Every frame is normalized: its log-sum-exp is 0 within 1e-9.
/// Individual entries may be exactly log-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    frames: usize,
    vocab: usize,
    log_values: Vec<f64>,
}

impl PosteriorGrid {
    pub fn from_log_values(frames: usize, vocab: usize, log_values: Vec<f64>) -> Result<Self> {
        if frames == 0 || vocab < 2 {
            return Err(Error::InvalidConfig(format!(
                "posterior grid needs T >= 1 and V >= 2, got T={frames}, V={vocab}"
            )));
        }
        if log_values.len() != frames * vocab {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "posterior payload has {} values, expected {}x{}",
                    log_values.len(),
                    frames,
                    vocab
                ),
            });
        }
        for (i, &v) in log_values.iter().enumerate() {
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::NonFiniteValue {
                    frame: i / vocab,
                    token: i % vocab,
                });
            }
        }
        for t in 0..frames {
            let total = log_sum_exp(&log_values[t * vocab..(t + 1) * vocab]);
            if total.abs() > 1e-9 {
                return Err(Error::UnnormalizedFrame { frame: t, total });
            }
        }
        Ok(Self {
            frames,
            vocab,
            log_values,
        })
    }

    /// Build from probability-domain rows (zeros allowed).
    pub fn from_probs(rows: &[Vec<f64>]) -> Result<Self> {
        let frames = rows.len();
        let vocab = rows.first().map_or(0, Vec::len);
        let log_values = rows
            .iter()
            .flat_map(|r| r.iter().map(|&p| p.ln()))
            .collect();
        Self::from_log_values(frames, vocab, log_values)
    }

    /// Uniform distribution over the vocabulary at every frame.
    pub fn uniform(frames: usize, vocab: usize) -> Self {
        let p = -(vocab as f64).ln();
        Self {
            frames,
            vocab,
            log_values: vec![p; frames * vocab],
        }
    }

    pub(crate) fn trusted(frames: usize, vocab: usize, log_values: Vec<f64>) -> Self {
        Self {
            frames,
            vocab,
            log_values,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn get(&self, frame: usize, token: TokenId) -> f64 {
        self.log_values[frame * self.vocab + token]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.log_values[frame * self.vocab..(frame + 1) * self.vocab]
    }
}

/// A `T x (2U+1)` table of log-domain values over lattice nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeTable {
    frames: usize,
    width: usize,
    values: Vec<f64>,
}

impl LatticeTable {
    fn from_flat(frames: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), frames * width);
        Self {
            frames,
            width,
            values,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Log value at frame `t`, extended-label position `v` (both 0-based).
    pub fn get(&self, t: usize, v: usize) -> f64 {
        self.values[t * self.width + v]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.width..(t + 1) * self.width]
    }
}

/// Forward, backward, and revised-backward tables for one instance.
#[derive(Debug, Clone)]
pub struct LatticeTables {
    pub alpha: LatticeTable,
    pub beta: LatticeTable,
    pub beta_hat: LatticeTable,
}

impl LatticeTables {
    /// Run all three dynamic programs for one instance.
    pub fn compute(post: &PosteriorGrid, ext: &ExtendedLabelSeq) -> Result<Self> {
        let alpha = forward(post, ext)?;
        let beta = backward(post, ext)?;
        let beta_hat = backward_revised(&beta, post, ext)?;
        Ok(Self {
            alpha,
            beta,
            beta_hat,
        })
    }

    /// `log P(l|x)` from the forward table's two admissible end nodes.
    pub fn total_log_prob(&self) -> f64 {
        total_log_prob(&self.alpha)
    }
}

/// `log P(l|x)`: sum of the forward table's final-frame mass at the last
/// blank and last label positions.
pub fn total_log_prob(alpha: &LatticeTable) -> f64 {
    let t = alpha.frames() - 1;
    let w = alpha.width();
    if w == 1 {
        return alpha.get(t, 0);
    }
    log_add(alpha.get(t, w - 1), alpha.get(t, w - 2))
}

/// Total label posterior reconstructed at a single frame `t`:
/// `sum_v alpha(t,v) * beta(t,v) / y^t_{l'_v}`. Identical for every `t`.
pub fn frame_total_log_prob(
    alpha: &LatticeTable,
    beta: &LatticeTable,
    post: &PosteriorGrid,
    ext: &ExtendedLabelSeq,
    t: usize,
) -> f64 {
    let mut terms = Vec::with_capacity(ext.len());
    for v in 0..ext.len() {
        let ab = alpha.get(t, v) + beta.get(t, v);
        if ab == LOG_ZERO {
            continue;
        }
        terms.push(ab - post.get(t, ext.tokens()[v]));
    }
    log_sum_exp(&terms)
}

fn feasibility(post: &PosteriorGrid, ext: &ExtendedLabelSeq) -> Result<()> {
    ext.check_vocab(post.vocab())?;
    let required = ext.min_frames();
    if post.frames() < required {
        return Err(Error::InfeasibleAlignment {
            frames: post.frames(),
            required,
        });
    }
    Ok(())
}

/// Forward variables `alpha(t, v)` in the log domain.
pub fn forward(post: &PosteriorGrid, ext: &ExtendedLabelSeq) -> Result<LatticeTable> {
    feasibility(post, ext)?;
    let mut ar = F64Arith::default();
    let node_post = node_posteriors_f64(post, ext);
    let values = forward_kernel(&mut ar, ext, post.frames(), &node_post);
    Ok(LatticeTable::from_flat(post.frames(), ext.len(), values))
}

/// Backward variables `beta(t, v)` in the log domain, inclusive of the
/// frame-`t` posterior factor.
pub fn backward(post: &PosteriorGrid, ext: &ExtendedLabelSeq) -> Result<LatticeTable> {
    feasibility(post, ext)?;
    let mut ar = F64Arith::default();
    let node_post = node_posteriors_f64(post, ext);
    let values = backward_kernel(&mut ar, ext, post.frames(), &node_post);
    Ok(LatticeTable::from_flat(post.frames(), ext.len(), values))
}

/// Revised backward variables `beta_hat(t, 2u)`: the portion of `beta(t, 2u)`
/// from paths whose emission of label `u` ends at `t`. Defined at non-blank
/// positions; blank positions hold log-zero.
///
/// Fails with [`Error::NegativeProbability`] if the subtraction goes negative
/// beyond [`NEGATIVE_MASS_TOLERANCE`], which indicates the `beta` table does
/// not belong to this posterior grid.
pub fn backward_revised(
    beta: &LatticeTable,
    post: &PosteriorGrid,
    ext: &ExtendedLabelSeq,
) -> Result<LatticeTable> {
    feasibility(post, ext)?;
    if beta.frames() != post.frames() || beta.width() != ext.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "beta table is {}x{}, instance is {}x{}",
                beta.frames(),
                beta.width(),
                post.frames(),
                ext.len()
            ),
        });
    }
    let mut ar = F64Arith::default();
    let node_post = node_posteriors_f64(post, ext);
    let values = beta_hat_kernel(&mut ar, ext, post.frames(), &node_post, &beta.values);
    if ar.worst_excess > NEGATIVE_MASS_TOLERANCE {
        let (frame, position) = ar.worst_excess_at.unwrap_or((0, 0));
        return Err(Error::NegativeProbability {
            frame,
            position,
            excess: ar.worst_excess,
        });
    }
    Ok(LatticeTable::from_flat(post.frames(), ext.len(), values))
}

/// Posterior of the extended-label token at every lattice node, `T x (2U+1)`.
fn node_posteriors_f64(post: &PosteriorGrid, ext: &ExtendedLabelSeq) -> Vec<f64> {
    let w = ext.len();
    let mut out = Vec::with_capacity(post.frames() * w);
    for t in 0..post.frames() {
        for &tok in ext.tokens() {
            out.push(post.get(t, tok));
        }
    }
    debug_assert_eq!(out.len(), post.frames() * w);
    out
}

/// Forward recursion body, generic over the arithmetic context.
pub(crate) fn forward_kernel<A: LogArith>(
    ar: &mut A,
    ext: &ExtendedLabelSeq,
    frames: usize,
    node_post: &[A::Val],
) -> Vec<A::Val> {
    let w = ext.len();
    let zero = ar.zero();
    let mut alpha = vec![zero; frames * w];
    alpha[0] = node_post[0];
    if w > 1 {
        alpha[1] = node_post[1];
    }
    for t in 1..frames {
        for v in 0..w {
            let stay = alpha[(t - 1) * w + v];
            let step = if v >= 1 {
                Some(alpha[(t - 1) * w + v - 1])
            } else {
                None
            };
            let reach = match (step, ext.skip_into(v)) {
                (Some(s), true) => {
                    let skip = alpha[(t - 1) * w + v - 2];
                    ar.sum3(stay, s, skip)
                }
                (Some(s), false) => ar.sum2(stay, s),
                (None, _) => stay,
            };
            alpha[t * w + v] = ar.mul(reach, node_post[t * w + v]);
        }
    }
    alpha
}

/// Backward recursion body (inclusive of the frame-`t` factor).
pub(crate) fn backward_kernel<A: LogArith>(
    ar: &mut A,
    ext: &ExtendedLabelSeq,
    frames: usize,
    node_post: &[A::Val],
) -> Vec<A::Val> {
    let w = ext.len();
    let zero = ar.zero();
    let mut beta = vec![zero; frames * w];
    let last = frames - 1;
    beta[last * w + w - 1] = node_post[last * w + w - 1];
    if w > 1 {
        beta[last * w + w - 2] = node_post[last * w + w - 2];
    }
    for t in (0..last).rev() {
        for v in 0..w {
            let stay = beta[(t + 1) * w + v];
            let step = if v + 1 < w {
                Some(beta[(t + 1) * w + v + 1])
            } else {
                None
            };
            let reach = match (step, v + 2 < w && ext.skip_into(v + 2)) {
                (Some(s), true) => {
                    let skip = beta[(t + 1) * w + v + 2];
                    ar.sum3(stay, s, skip)
                }
                (Some(s), false) => ar.sum2(stay, s),
                (None, _) => stay,
            };
            beta[t * w + v] = ar.mul(reach, node_post[t * w + v]);
        }
    }
    beta
}

/// Revised-backward body: `beta_hat(t, 2u) = beta(t, 2u) - beta(t+1, 2u) *
/// y^t` for `t < T`, `beta(T, 2u)` at the last frame.
pub(crate) fn beta_hat_kernel<A: LogArith>(
    ar: &mut A,
    ext: &ExtendedLabelSeq,
    frames: usize,
    node_post: &[A::Val],
    beta: &[A::Val],
) -> Vec<A::Val> {
    let w = ext.len();
    let zero = ar.zero();
    let mut beta_hat = vec![zero; frames * w];
    for u in 0..ext.label_count() {
        let v = 2 * u + 1;
        for t in 0..frames - 1 {
            ar.at(t, v);
            let continuing = ar.mul(beta[(t + 1) * w + v], node_post[t * w + v]);
            beta_hat[t * w + v] = ar.sub(beta[t * w + v], continuing);
        }
        beta_hat[(frames - 1) * w + v] = beta[(frames - 1) * w + v];
    }
    beta_hat
}

/// Per-label end-frame mass: `g_u(t) = alpha(t, 2u) * beta_hat(t, 2u) / y^t`,
/// one length-`T` vector per original label.
pub(crate) fn grouped_kernel<A: LogArith>(
    ar: &mut A,
    ext: &ExtendedLabelSeq,
    frames: usize,
    node_post: &[A::Val],
    alpha: &[A::Val],
    beta_hat: &[A::Val],
) -> Vec<Vec<A::Val>> {
    let w = ext.len();
    (0..ext.label_count())
        .map(|u| {
            let v = 2 * u + 1;
            (0..frames)
                .map(|t| {
                    let mass = ar.mul(alpha[t * w + v], beta_hat[t * w + v]);
                    ar.div(mass, node_post[t * w + v])
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[TokenId]) -> LabelSeq {
        LabelSeq::new(tokens.to_vec()).unwrap()
    }

    #[test]
    fn extend_single_token() {
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        assert_eq!(ext.tokens(), &[0, 1, 0]);
    }

    #[test]
    fn extend_with_repeat() {
        let ext = extend_labels(&seq(&[1, 1, 2]), 0).unwrap();
        assert_eq!(ext.tokens(), &[0, 1, 0, 1, 0, 2, 0]);
        assert_eq!(ext.min_frames(), 4);
    }

    #[test]
    fn extend_two_tokens() {
        let ext = extend_labels(&seq(&[1, 2]), 0).unwrap();
        assert_eq!(ext.tokens(), &[0, 1, 0, 2, 0]);
        assert_eq!(ext.min_frames(), 2);
    }

    #[test]
    fn extend_rejects_blank_in_labels() {
        let err = extend_labels(&seq(&[1, 0, 2]), 0).unwrap_err();
        assert!(matches!(err, Error::BlankInLabels { position: 1, .. }));
    }

    #[test]
    fn empty_labels_rejected() {
        assert!(matches!(LabelSeq::new(vec![]), Err(Error::EmptyLabels)));
    }

    #[test]
    fn forward_single_frame() {
        // T=1, l=[a]: the only path is (a), so alpha(1,2) = y^1_a.
        let post = PosteriorGrid::from_probs(&[vec![0.3, 0.7]]).unwrap();
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let alpha = forward(&post, &ext).unwrap();
        assert!((alpha.get(0, 1) - 0.7_f64.ln()).abs() < 1e-12);
        assert!((total_log_prob(&alpha) - 0.7_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_uniform_two_frames() {
        // Three valid paths (a,a), (a,∅), (∅,a), each 0.25.
        let post = PosteriorGrid::uniform(2, 2);
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let alpha = forward(&post, &ext).unwrap();
        assert!((total_log_prob(&alpha).exp() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn forward_start_states_only() {
        let post = PosteriorGrid::uniform(3, 3);
        let ext = extend_labels(&seq(&[1, 2]), 0).unwrap();
        let alpha = forward(&post, &ext).unwrap();
        for v in 2..ext.len() {
            assert_eq!(alpha.get(0, v), LOG_ZERO);
        }
    }

    #[test]
    fn backward_single_frame() {
        let post = PosteriorGrid::from_probs(&[vec![0.3, 0.7]]).unwrap();
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let beta = backward(&post, &ext).unwrap();
        assert!((beta.get(0, 1) - 0.7_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn backward_uniform_two_frames() {
        // beta(1,1) covers only the path ∅ -> a: 0.25.
        let post = PosteriorGrid::uniform(2, 2);
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let beta = backward(&post, &ext).unwrap();
        assert!((beta.get(0, 0).exp() - 0.25).abs() < 1e-12);
        // End states at the last frame only.
        for v in 0..ext.len() - 2 {
            assert_eq!(beta.get(1, v), LOG_ZERO);
        }
    }

    #[test]
    fn frame_totals_agree_across_time() {
        let post = PosteriorGrid::from_probs(&[
            vec![0.5, 0.2, 0.3],
            vec![0.1, 0.6, 0.3],
            vec![0.25, 0.25, 0.5],
            vec![0.4, 0.4, 0.2],
        ])
        .unwrap();
        let ext = extend_labels(&seq(&[1, 2]), 0).unwrap();
        let alpha = forward(&post, &ext).unwrap();
        let beta = backward(&post, &ext).unwrap();
        let reference = total_log_prob(&alpha);
        for t in 0..4 {
            let total = frame_total_log_prob(&alpha, &beta, &post, &ext, t);
            assert!(
                (total - reference).abs() < 1e-12,
                "frame {t}: {total} vs {reference}"
            );
        }
    }

    #[test]
    fn beta_hat_single_frame_is_beta() {
        let post = PosteriorGrid::from_probs(&[vec![0.3, 0.7]]).unwrap();
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let beta = backward(&post, &ext).unwrap();
        let bh = backward_revised(&beta, &post, &ext).unwrap();
        assert_eq!(bh.get(0, 1), beta.get(0, 1));
    }

    #[test]
    fn beta_hat_zero_on_blank_positions() {
        let post = PosteriorGrid::uniform(3, 2);
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let beta = backward(&post, &ext).unwrap();
        let bh = backward_revised(&beta, &post, &ext).unwrap();
        for t in 0..3 {
            assert_eq!(bh.get(t, 0), LOG_ZERO);
            assert_eq!(bh.get(t, 2), LOG_ZERO);
        }
    }

    #[test]
    fn end_frame_partition_uniform() {
        // T=2, l=[a], uniform: end-frame masses 0.25 (t=1) and 0.50 (t=2).
        let post = PosteriorGrid::uniform(2, 2);
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let tables = LatticeTables::compute(&post, &ext).unwrap();
        let g1 = (tables.alpha.get(0, 1) + tables.beta_hat.get(0, 1) - post.get(0, 1)).exp();
        let g2 = (tables.alpha.get(1, 1) + tables.beta_hat.get(1, 1) - post.get(1, 1)).exp();
        assert!((g1 - 0.25).abs() < 1e-12);
        assert!((g2 - 0.50).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_frames_too_short() {
        let post = PosteriorGrid::uniform(2, 2);
        let ext = extend_labels(&seq(&[1, 1]), 0).unwrap();
        let err = forward(&post, &ext).unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasibleAlignment {
                frames: 2,
                required: 3
            }
        ));
    }

    #[test]
    fn feasibility_is_monotone_in_frames() {
        let ext = extend_labels(&seq(&[1, 1, 2]), 0).unwrap();
        let required = ext.min_frames();
        for extra in 0..4 {
            let post = PosteriorGrid::uniform(required + extra, 3);
            assert!(forward(&post, &ext).is_ok());
        }
    }

    #[test]
    fn out_of_vocab_token_rejected() {
        let post = PosteriorGrid::uniform(3, 2);
        let ext = extend_labels(&seq(&[5]), 0).unwrap();
        assert!(matches!(
            forward(&post, &ext),
            Err(Error::TokenOutOfRange { token: 5, vocab: 2 })
        ));
    }

    #[test]
    fn zero_posteriors_produce_no_nan() {
        // Token 1 is impossible at frame 0; all tables must stay NaN-free.
        let post = PosteriorGrid::from_probs(&[
            vec![1.0, 0.0, 0.0],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let ext = extend_labels(&seq(&[1, 2]), 0).unwrap();
        let tables = LatticeTables::compute(&post, &ext).unwrap();
        for t in 0..3 {
            for v in 0..ext.len() {
                assert!(!tables.alpha.get(t, v).is_nan());
                assert!(!tables.beta.get(t, v).is_nan());
                assert!(!tables.beta_hat.get(t, v).is_nan());
            }
        }
        assert!(tables.total_log_prob().is_finite());
    }

    #[test]
    fn alpha_beta_stay_within_unit_interval() {
        let post = PosteriorGrid::uniform(4, 3);
        let ext = extend_labels(&seq(&[1, 2, 1]), 0).unwrap();
        let tables = LatticeTables::compute(&post, &ext).unwrap();
        for t in 0..4 {
            for v in 0..ext.len() {
                assert!(tables.alpha.get(t, v) <= 1e-12);
                assert!(tables.beta.get(t, v) <= 1e-12);
                assert!(tables.beta_hat.get(t, v) <= 1e-12);
            }
        }
    }

    #[test]
    fn inconsistent_beta_detected() {
        // A beta table from a different posterior grid makes the Eq. 8
        // subtraction go negative beyond tolerance.
        let post_a = PosteriorGrid::from_probs(&[
            vec![0.9, 0.1],
            vec![0.1, 0.9],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let post_b = PosteriorGrid::from_probs(&[
            vec![0.1, 0.9],
            vec![0.9, 0.1],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let ext = extend_labels(&seq(&[1]), 0).unwrap();
        let beta_b = backward(&post_b, &ext).unwrap();
        assert!(matches!(
            backward_revised(&beta_b, &post_a, &ext),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn posterior_grid_rejects_unnormalized() {
        let err = PosteriorGrid::from_probs(&[vec![0.5, 0.4]]).unwrap_err();
        assert!(matches!(err, Error::UnnormalizedFrame { frame: 0, .. }));
    }
}
