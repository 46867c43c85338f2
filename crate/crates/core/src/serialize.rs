//! Serialized output training labels and the speaker-aware risk weights.
//!
//! Multi-speaker transcripts are concatenated into a single token stream,
//! ordered first-in-first-out by utterance start time and joined by a
//! speaker-change token `<sc>`. The serialized label carries per-token
//! speaker assignments and per-speaker counts; from those the boundary ratio
//! `b = M / (M + N)` anchors a conditional sigmoid that weighs token
//! end-frames by how well they respect the speaker boundary.
//!
//! Sign convention: the risk is carried as a positive weight
//! `w(s, t) = -r_sa(s, t)` in `(0, 1)`, so the per-token objective stays a
//! negative log of a positive quantity. At `lambda = 0` every weight is
//! exactly 1/2 and the speaker-aware objective reduces to vanilla CTC plus
//! `log 2` per token.

use serde::Deserialize;
use std::collections::HashMap;

use crate::lattice::LabelSeq;
use crate::{Error, Result, TokenId};

/// Per-speaker transcripts ordered first-in-first-out by start time.
/// Ties keep the original speaker list order.
#[derive(Debug, Clone)]
pub struct SpeakerTranscripts {
    transcripts: Vec<LabelSeq>,
    start_times: Option<Vec<f64>>,
}

impl SpeakerTranscripts {
    /// Build from per-speaker label sequences, sorting by start time when
    /// times are given (stable, so equal times preserve list order).
    pub fn new(per_speaker: Vec<LabelSeq>, start_times: Option<Vec<f64>>) -> Result<Self> {
        if per_speaker.is_empty() {
            return Err(Error::NoSpeakers);
        }
        if let Some(times) = &start_times {
            if times.len() != per_speaker.len() {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "{} start times for {} speakers",
                        times.len(),
                        per_speaker.len()
                    ),
                });
            }
            if times.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidConfig("start times must be finite".into()));
            }
            let mut order: Vec<usize> = (0..per_speaker.len()).collect();
            order.sort_by(|&i, &j| times[i].partial_cmp(&times[j]).unwrap());
            let transcripts = order.iter().map(|&i| per_speaker[i].clone()).collect();
            let sorted_times = order.iter().map(|&i| times[i]).collect();
            return Ok(Self {
                transcripts,
                start_times: Some(sorted_times),
            });
        }
        Ok(Self {
            transcripts: per_speaker,
            start_times: None,
        })
    }

    pub fn speaker_count(&self) -> usize {
        self.transcripts.len()
    }

    pub fn transcripts(&self) -> &[LabelSeq] {
        &self.transcripts
    }

    pub fn start_times(&self) -> Option<&[f64]> {
        self.start_times.as_deref()
    }
}

/// SOT token stream with speaker metadata.
///
/// `speaker_of_token` is 1-based and nondecreasing; an `<sc>` token carries
/// the index of the speaker it terminates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedLabel {
    tokens: Vec<TokenId>,
    speaker_of_token: Vec<usize>,
    per_speaker_counts: Vec<usize>,
    speaker_count: usize,
    sc_id: TokenId,
}

/// Concatenate per-speaker transcripts with single `<sc>` separators.
pub fn serialize_sot(tr: &SpeakerTranscripts, sc_id: TokenId) -> Result<SerializedLabel> {
    for (speaker, labels) in tr.transcripts().iter().enumerate() {
        if labels.tokens().contains(&sc_id) {
            return Err(Error::ScInTranscript { sc: sc_id, speaker });
        }
    }
    let speaker_count = tr.speaker_count();
    let mut tokens = Vec::new();
    let mut speaker_of_token = Vec::new();
    let mut per_speaker_counts = Vec::with_capacity(speaker_count);
    for (i, labels) in tr.transcripts().iter().enumerate() {
        let s = i + 1;
        tokens.extend_from_slice(labels.tokens());
        speaker_of_token.extend(std::iter::repeat(s).take(labels.len()));
        per_speaker_counts.push(labels.len());
        if i + 1 < speaker_count {
            tokens.push(sc_id);
            speaker_of_token.push(s);
        }
    }
    Ok(SerializedLabel {
        tokens,
        speaker_of_token,
        per_speaker_counts,
        speaker_count,
        sc_id,
    })
}

impl SerializedLabel {
    /// Wrap a plain single-speaker label sequence (no `<sc>` present).
    pub fn single_speaker(labels: &LabelSeq, sc_id: TokenId) -> Result<Self> {
        let tr = SpeakerTranscripts::new(vec![labels.clone()], None)?;
        serialize_sot(&tr, sc_id)
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn speaker_count(&self) -> usize {
        self.speaker_count
    }

    pub fn sc_id(&self) -> TokenId {
        self.sc_id
    }

    /// 1-based speaker index of the token at position `u` (0-based).
    pub fn speaker_of(&self, u: usize) -> usize {
        self.speaker_of_token[u]
    }

    pub fn is_sc(&self, u: usize) -> bool {
        self.tokens[u] == self.sc_id
    }

    /// Non-`<sc>` token counts per speaker, e.g. `(M, N)` for two speakers.
    pub fn per_speaker_counts(&self) -> &[usize] {
        &self.per_speaker_counts
    }

    /// The serialized stream as a lattice label sequence.
    pub fn label_seq(&self) -> LabelSeq {
        LabelSeq::new(self.tokens.clone()).expect("serialized label is never empty")
    }
}

/// Parameters of the speaker-aware risk: sharpness `lambda`, boundary ratio
/// `b`, and the number of speakers the risk is defined for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSpec {
    pub lambda: f64,
    pub boundary_b: f64,
    pub speaker_count: usize,
}

impl RiskSpec {
    pub fn new(lambda: f64, boundary_b: f64, speaker_count: usize) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "risk factor must be finite and nonnegative, got {lambda}"
            )));
        }
        if !(boundary_b > 0.0 && boundary_b < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "speaker boundary must lie strictly inside (0, 1), got {boundary_b}"
            )));
        }
        Ok(Self {
            lambda,
            boundary_b,
            speaker_count,
        })
    }

    /// RiskSpec whose boundary is taken from the label's token counts.
    pub fn for_label(label: &SerializedLabel, lambda: f64) -> Result<Self> {
        Self::new(lambda, boundary_ratio(label)?, label.speaker_count())
    }
}

/// Boundary ratio `b = M / (M + N)` from non-`<sc>` token counts.
/// Defined for exactly two speakers.
pub fn boundary_ratio(label: &SerializedLabel) -> Result<f64> {
    if label.speaker_count() != 2 {
        return Err(Error::UnsupportedSpeakerCount {
            count: label.speaker_count(),
        });
    }
    let m = label.per_speaker_counts()[0] as f64;
    let n = label.per_speaker_counts()[1] as f64;
    Ok(m / (m + n))
}

/// Risk weight for speaker `s` at the normalized frame position `pos`
/// (`= t/T`): `w(1) = sigmoid(-lambda (pos - b))`, `w(2)` its complement.
pub fn risk_weight_at(spec: &RiskSpec, s: usize, pos: f64) -> f64 {
    debug_assert!(s == 1 || s == 2, "risk is defined for speakers 1 and 2");
    let z = spec.lambda * (pos - spec.boundary_b);
    if s == 1 {
        sigmoid(-z)
    } else {
        sigmoid(z)
    }
}

/// Risk weight for speaker `s` at 1-based frame `t` of `frames` total,
/// using the printed `t/T` frame-position convention.
pub fn risk_weight(spec: &RiskSpec, s: usize, t: usize, frames: usize) -> f64 {
    debug_assert!(t >= 1 && t <= frames);
    risk_weight_at(spec, s, t as f64 / frames as f64)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// JSON label file: vocabulary, special ids, per-speaker transcripts as
/// token strings, and optional start times.
#[derive(Debug, Deserialize)]
struct LabelFileJson {
    vocab: Vec<String>,
    blank_id: usize,
    sc_id: usize,
    speakers: Vec<Vec<String>>,
    #[serde(default)]
    start_times: Option<Vec<f64>>,
}

/// Parsed and validated label file.
#[derive(Debug, Clone)]
pub struct LabelFile {
    pub vocab: Vec<String>,
    pub blank_id: TokenId,
    pub sc_id: TokenId,
    pub transcripts: SpeakerTranscripts,
    pub label: SerializedLabel,
}

/// Parse the JSON label file format and build the serialized label.
pub fn parse_label_file(json: &str) -> Result<LabelFile> {
    let raw: LabelFileJson = serde_json::from_str(json)?;
    let vocab_size = raw.vocab.len();
    if raw.blank_id >= vocab_size {
        return Err(Error::LabelFile(format!(
            "blank_id {} out of range for vocab of size {vocab_size}",
            raw.blank_id
        )));
    }
    if raw.sc_id >= vocab_size {
        return Err(Error::LabelFile(format!(
            "sc_id {} out of range for vocab of size {vocab_size}",
            raw.sc_id
        )));
    }
    if raw.sc_id == raw.blank_id {
        return Err(Error::LabelFile("sc_id and blank_id must differ".into()));
    }
    let index: HashMap<&str, usize> = raw
        .vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let mut per_speaker = Vec::with_capacity(raw.speakers.len());
    for (speaker, words) in raw.speakers.iter().enumerate() {
        let mut ids = Vec::with_capacity(words.len());
        for w in words {
            let &id = index.get(w.as_str()).ok_or_else(|| {
                Error::LabelFile(format!("token {w:?} of speaker {speaker} not in vocab"))
            })?;
            if id == raw.blank_id || id == raw.sc_id {
                return Err(Error::LabelFile(format!(
                    "token {w:?} of speaker {speaker} is a reserved id"
                )));
            }
            ids.push(id);
        }
        per_speaker.push(LabelSeq::new(ids).map_err(|_| Error::EmptyTranscript { speaker })?);
    }
    let transcripts = SpeakerTranscripts::new(per_speaker, raw.start_times)?;
    let label = serialize_sot(&transcripts, raw.sc_id)?;
    Ok(LabelFile {
        vocab: raw.vocab,
        blank_id: raw.blank_id,
        sc_id: raw.sc_id,
        transcripts,
        label,
    })
}
