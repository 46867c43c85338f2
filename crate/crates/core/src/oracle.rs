//! Brute-force reference implementations for small instances.
//!
//! Everything here is deliberately independent of the lattice module: paths
//! are enumerated exhaustively, collapsed with a local copy of the collapse
//! rule, and summed in the plain probability domain with compensated
//! accumulation. The risk weights are evaluated from their closed form
//! rather than through `serialize::risk_weight`. That keeps the oracle a
//! genuine second route for every quantity the dynamic programs produce.
//!
//! Not a performance path: the enumeration budget caps instances at roughly
//! `V^T <= 10^7`.

use crate::lattice::{LabelSeq, LogitGrid, PosteriorGrid};
use crate::loss::SactcOptions;
use crate::serialize::{RiskSpec, SerializedLabel};
use crate::{Error, Result, TokenId};

/// Default cap on `V^T` candidate sequences.
pub const DEFAULT_ENUM_BUDGET: f64 = 1e7;

/// A length-`T` frame-level token sequence.
pub type AlignmentPath = Vec<TokenId>;

/// Compensated (Kahan) accumulator.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum
    }
}

/// Local collapse rule: merge repeated consecutive tokens, then drop blanks.
fn collapse_local(path: &[TokenId], blank_id: TokenId) -> Vec<TokenId> {
    let mut out = Vec::new();
    let mut prev: Option<TokenId> = None;
    for &tok in path {
        if prev != Some(tok) && tok != blank_id {
            out.push(tok);
        }
        prev = Some(tok);
    }
    out
}

fn check_budget(frames: usize, vocab: usize, budget: f64) -> Result<f64> {
    let candidates = (vocab as f64).powi(frames as i32);
    if candidates > budget {
        return Err(Error::BudgetExceeded {
            paths: candidates,
            budget,
        });
    }
    Ok(candidates)
}

/// All alignment paths of length `frames` over `[0, vocab)` whose collapse
/// equals `labels`, by exhaustive enumeration.
pub fn enumerate_paths(
    labels: &LabelSeq,
    frames: usize,
    vocab: usize,
    blank_id: TokenId,
) -> Result<Vec<AlignmentPath>> {
    enumerate_paths_with_budget(labels, frames, vocab, blank_id, DEFAULT_ENUM_BUDGET)
}

/// [`enumerate_paths`] with an explicit budget on `V^T`.
pub fn enumerate_paths_with_budget(
    labels: &LabelSeq,
    frames: usize,
    vocab: usize,
    blank_id: TokenId,
    budget: f64,
) -> Result<Vec<AlignmentPath>> {
    check_budget(frames, vocab, budget)?;
    let mut out = Vec::new();
    let mut path = vec![0 as TokenId; frames];
    loop {
        if collapse_local(&path, blank_id) == labels.tokens() {
            out.push(path.clone());
        }
        // Odometer increment over [0, vocab)^frames.
        let mut i = frames;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            path[i] += 1;
            if path[i] < vocab {
                break;
            }
            path[i] = 0;
        }
    }
}

fn path_prob(post: &PosteriorGrid, path: &[TokenId]) -> f64 {
    let mut p = 1.0;
    for (t, &tok) in path.iter().enumerate() {
        p *= post.get(t, tok).exp();
    }
    p
}

/// `P(l|x)` by summing the probability of every valid alignment path.
pub fn brute_force_ctc(
    post: &PosteriorGrid,
    labels: &LabelSeq,
    blank_id: TokenId,
) -> Result<f64> {
    let paths = enumerate_paths(labels, post.frames(), post.vocab(), blank_id)?;
    let mut total = Kahan::default();
    for path in &paths {
        total.add(path_prob(post, path));
    }
    Ok(total.total())
}

/// 1-based end frames of every non-blank run of `path`, in order. For a
/// valid path these correspond one-to-one to the label positions.
fn run_end_frames(path: &[TokenId], blank_id: TokenId) -> Vec<usize> {
    let mut ends = Vec::new();
    for (t, &tok) in path.iter().enumerate() {
        if tok == blank_id {
            continue;
        }
        let run_continues = path.get(t + 1) == Some(&tok);
        if !run_continues {
            ends.push(t + 1);
        }
    }
    ends
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Reference speaker-aware loss by path-wise end-frame bookkeeping.
///
/// For every token `u`, partitions the valid paths by the frame where that
/// token's emission run ends, applies the closed-form sigmoid weight, and
/// aggregates the per-token negative logs exactly like the fast path does.
pub fn brute_force_sactc(
    post: &PosteriorGrid,
    label: &SerializedLabel,
    spec: &RiskSpec,
    blank_id: TokenId,
    opts: &SactcOptions,
) -> Result<f64> {
    if label.speaker_count() != 2 {
        return Err(Error::UnsupportedSpeakerCount {
            count: label.speaker_count(),
        });
    }
    let labels = label.label_seq();
    let paths = enumerate_paths(&labels, post.frames(), post.vocab(), blank_id)?;
    let frames = post.frames();
    let token_count = label.len();

    let constrained: Vec<bool> = (0..token_count)
        .map(|u| !label.is_sc(u) || opts.risk_on_sc)
        .collect();
    let mut per_speaker = [0usize; 2];
    for u in 0..token_count {
        if constrained[u] {
            per_speaker[label.speaker_of(u) - 1] += 1;
        }
    }

    let weight = |s: usize, t: usize| -> f64 {
        let pos = if opts.frame_center {
            (t as f64 - 0.5) / frames as f64
        } else {
            t as f64 / frames as f64
        };
        let z = spec.lambda * (pos - spec.boundary_b);
        if s == 1 {
            sigmoid(-z)
        } else {
            sigmoid(z)
        }
    };

    let mut groups = vec![Kahan::default(); token_count];
    for path in &paths {
        let p = path_prob(post, path);
        let ends = run_end_frames(path, blank_id);
        debug_assert_eq!(ends.len(), token_count);
        for u in 0..token_count {
            if constrained[u] {
                groups[u].add(weight(label.speaker_of(u), ends[u]) * p);
            }
        }
    }

    let mut loss = 0.0;
    for u in 0..token_count {
        if !constrained[u] {
            continue;
        }
        let norm = if opts.literal_normalization {
            token_count as f64
        } else {
            per_speaker[label.speaker_of(u) - 1] as f64
        };
        loss += -(groups[u].total().ln()) / (2.0 * norm);
    }
    Ok(loss)
}

/// Central finite differences `(f(x + h e) - f(x - h e)) / 2h` per logit.
pub fn finite_diff_grad(
    f: impl Fn(&LogitGrid) -> f64,
    logits: &LogitGrid,
    h: f64,
) -> Result<LogitGrid> {
    let (frames, vocab) = (logits.frames(), logits.vocab());
    let mut grad = vec![0.0; frames * vocab];
    let mut work = logits.clone();
    for t in 0..frames {
        for k in 0..vocab {
            let base = logits.get(t, k);
            work.set(t, k, base + h);
            let up = f(&work);
            work.set(t, k, base - h);
            let down = f(&work);
            work.set(t, k, base);
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "loss not finite at perturbed logit ({t}, {k})"
                )));
            }
            grad[t * vocab + k] = (up - down) / (2.0 * h);
        }
    }
    LogitGrid::new(frames, vocab, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{extend_labels, forward, total_log_prob};
    use crate::loss::{ctc_loss, sactc_loss, softmax_log};
    use crate::serialize::{serialize_sot, SpeakerTranscripts};

    fn seq(tokens: &[TokenId]) -> LabelSeq {
        LabelSeq::new(tokens.to_vec()).unwrap()
    }

    #[test]
    fn enumerate_three_paths() {
        let paths = enumerate_paths(&seq(&[1]), 2, 2, 0).unwrap();
        let mut got = paths.clone();
        got.sort();
        assert_eq!(got, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn enumerate_repeat_needs_separator() {
        assert!(enumerate_paths(&seq(&[1, 1]), 2, 2, 0).unwrap().is_empty());
        assert_eq!(enumerate_paths(&seq(&[1, 1]), 3, 2, 0).unwrap().len(), 1);
    }

    #[test]
    fn enumerate_forced_path() {
        let paths = enumerate_paths(&seq(&[1, 2]), 2, 3, 0).unwrap();
        assert_eq!(paths, vec![vec![1, 2]]);
    }

    #[test]
    fn budget_guard() {
        let err = enumerate_paths_with_budget(&seq(&[1]), 10, 10, 0, 1e6).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn brute_force_uniform() {
        let post = PosteriorGrid::uniform(2, 2);
        let p = brute_force_ctc(&post, &seq(&[1]), 0).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn brute_force_zero_posterior() {
        let post = PosteriorGrid::from_probs(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let p = brute_force_ctc(&post, &seq(&[1]), 0).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn brute_force_matches_lattice() {
        let post = PosteriorGrid::from_probs(&[
            vec![0.6, 0.1, 0.3],
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.2, 0.7],
            vec![0.3, 0.4, 0.3],
        ])
        .unwrap();
        for labels in [seq(&[1]), seq(&[1, 2]), seq(&[2, 2]), seq(&[1, 2, 1])] {
            let ext = extend_labels(&labels, 0).unwrap();
            if post.frames() < ext.min_frames() {
                continue;
            }
            let dp = total_log_prob(&forward(&post, &ext).unwrap());
            let bf = brute_force_ctc(&post, &labels, 0).unwrap().ln();
            assert!((dp - bf).abs() < 1e-12, "{labels:?}: {dp} vs {bf}");
        }
    }

    #[test]
    fn run_ends_identify_last_emission_frames() {
        // Path ∅ a a ∅ b b: token a ends at frame 3, b at frame 6.
        assert_eq!(run_end_frames(&[0, 1, 1, 0, 2, 2], 0), vec![3, 6]);
        // a ∅ a: two separate runs of the same token.
        assert_eq!(run_end_frames(&[1, 0, 1], 0), vec![1, 3]);
    }

    fn two_speaker_label(a: &[TokenId], b: &[TokenId], sc: TokenId) -> SerializedLabel {
        let tr = SpeakerTranscripts::new(vec![seq(a), seq(b)], None).unwrap();
        serialize_sot(&tr, sc).unwrap()
    }

    #[test]
    fn sactc_oracle_lambda_zero_is_ctc_plus_log2() {
        let post = PosteriorGrid::uniform(4, 4);
        let label = two_speaker_label(&[1], &[2], 3);
        let spec = RiskSpec::for_label(&label, 0.0).unwrap();
        let loss = brute_force_sactc(&post, &label, &spec, 0, &SactcOptions::default()).unwrap();
        let ctc = -brute_force_ctc(&post, &label.label_seq(), 0).unwrap().ln();
        assert!((loss - ctc - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sactc_oracle_single_path_closed_form() {
        // T equals the minimum alignment length, so exactly one path exists
        // and every end frame is forced.
        let post = PosteriorGrid::from_probs(&[
            vec![0.2, 0.5, 0.1, 0.2],
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.3, 0.1, 0.4, 0.2],
        ])
        .unwrap();
        let label = two_speaker_label(&[1], &[2], 3);
        let spec = RiskSpec::for_label(&label, 15.0).unwrap();
        let loss = brute_force_sactc(&post, &label, &spec, 0, &SactcOptions::default()).unwrap();

        let p: f64 = 0.5 * 0.4 * 0.4; // path (1, sc, 2)
        let w1 = 1.0 / (1.0 + (15.0_f64 * (1.0 / 3.0 - 0.5)).exp());
        let w2 = 1.0 / (1.0 + (-15.0_f64 * (3.0 / 3.0 - 0.5)).exp());
        let expect = 0.5 * (-(w1 * p).ln()) + 0.5 * (-(w2 * p).ln());
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn sactc_oracle_agrees_with_fast_path() {
        let logits = LogitGrid::new(
            4,
            4,
            (0..16).map(|i| ((i * 5) % 7) as f64 * 0.3 - 0.9).collect(),
        )
        .unwrap();
        let label = two_speaker_label(&[1], &[2], 3);
        for lambda in [0.0, 5.0, 15.0] {
            let spec = RiskSpec::for_label(&label, lambda).unwrap();
            let fast = sactc_loss(&logits, &label, &spec, 0).unwrap().loss;
            let post = softmax_log(&logits);
            let slow =
                brute_force_sactc(&post, &label, &spec, 0, &SactcOptions::default()).unwrap();
            assert!(
                (fast - slow).abs() < 1e-9,
                "lambda {lambda}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn finite_diff_quadratic() {
        let logits = LogitGrid::new(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let f = |g: &LogitGrid| -> f64 { g.values().iter().map(|&x| x * x).sum() };
        let grad = finite_diff_grad(f, &logits, 1e-5).unwrap();
        for t in 0..2 {
            for k in 0..2 {
                assert!((grad.get(t, k) - 2.0 * logits.get(t, k)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn finite_diff_agrees_with_ctc_grad() {
        let logits = LogitGrid::new(3, 3, vec![0.4, -0.2, 0.7, 0.1, 0.9, -0.5, 0.0, 0.3, 0.6])
            .unwrap();
        let labels = seq(&[1, 2]);
        let analytic = ctc_loss(&logits, &labels, 0).unwrap();
        let fd = finite_diff_grad(
            |g| ctc_loss(g, &labels, 0).unwrap().loss,
            &logits,
            1e-5,
        )
        .unwrap();
        for t in 0..3 {
            for k in 0..3 {
                let (a, b) = (analytic.grad.get(t, k), fd.get(t, k));
                assert!(
                    (a - b).abs() / a.abs().max(b.abs()).max(1.0) < 1e-6,
                    "({t},{k}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn finite_diff_shift_direction_is_flat() {
        // Per-frame shift invariance: the FD gradient rows sum to zero.
        let logits = LogitGrid::new(2, 3, vec![0.2, -0.8, 0.5, 1.0, 0.0, -0.3]).unwrap();
        let labels = seq(&[1]);
        let fd = finite_diff_grad(
            |g| ctc_loss(g, &labels, 0).unwrap().loss,
            &logits,
            1e-5,
        )
        .unwrap();
        for t in 0..2 {
            let sum: f64 = (0..3).map(|k| fd.get(t, k)).sum();
            assert!(sum.abs() < 1e-7);
        }
    }
}
