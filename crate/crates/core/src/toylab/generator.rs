//! Synthetic two-speaker mixture generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::lattice::{extend_labels, LabelSeq};
use crate::metrics::{overlap_ratio, Timing};
use crate::serialize::{serialize_sot, SerializedLabel, SpeakerTranscripts};
use crate::{Error, Result, TokenId};

/// Mixture generator parameters. Token ids are laid out as
/// `blank = 0`, content tokens `1..=content_vocab`, `<sc> = content_vocab+1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Number of distinct content tokens.
    pub content_vocab: usize,
    /// Feature dimension of the rendered frames.
    pub feature_dim: usize,
    /// First speaker's token count range and speaking rate.
    pub speaker_a: SpeakerProfile,
    /// Second speaker's token count range and speaking rate.
    pub speaker_b: SpeakerProfile,
    /// Speaker B starts at a uniform offset in
    /// `[0, offset_max_frac * len(A)]` frames; 0 means full overlap.
    pub offset_max_frac: f64,
    /// Standard deviation of the additive frame noise.
    pub noise_level: f64,
    /// Extra feature channels encoding the normalized frame position
    /// (a `t/T` ramp, then sinusoids), the frame-local stand-in for an
    /// encoder's positional information. A position-blind model cannot
    /// place emissions relative to the speaker boundary at all.
    pub position_channels: usize,
    /// Size of speaker A's private token pool (ids `1..=speaker_a_vocab`);
    /// speaker B draws from the rest. 0 shares the whole pool. Disjoint
    /// pools are the toy analogue of two recognizable voices: with one
    /// shared pool a token's speaker is not decodable from the features,
    /// so no emission-placement rule can generalize across mixtures.
    pub speaker_a_vocab: usize,
    /// Allow adjacent repeated tokens within a speaker (raises the minimum
    /// feasible frame count).
    pub allow_repeats: bool,
    /// Seed of the fixed token embedding table.
    pub embed_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            content_vocab: 8,
            feature_dim: 16,
            token_span_a: 6,
            token_span_b: 3,
            tokens_min: 2,
            tokens_max: 4,
            offset_max_frac: 0.25,
            noise_level: 0.05,
            position_channels: 2,
            speaker_a_vocab: 2,
            allow_repeats: false,
            embed_seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn blank_id(&self) -> TokenId {
        0
    }

    pub fn sc_id(&self) -> TokenId {
        self.content_vocab + 1
    }

    /// Total vocabulary size including blank and `<sc>`.
    pub fn vocab_size(&self) -> usize {
        self.content_vocab + 2
    }

    /// Width of a rendered frame: embedding dim plus position channels.
    pub fn frame_dim(&self) -> usize {
        self.feature_dim + self.position_channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.content_vocab < 2 {
            return Err(Error::InvalidConfig(
                "generator needs at least 2 content tokens".into(),
            ));
        }
        if self.feature_dim == 0 || self.token_span_a == 0 || self.token_span_b == 0 {
            return Err(Error::InvalidConfig(
                "feature_dim and token spans must be positive".into(),
            ));
        }
        if self.tokens_min == 0 || self.tokens_max < self.tokens_min {
            return Err(Error::InvalidConfig(
                "token count range must be nonempty and positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.offset_max_frac) {
            return Err(Error::InvalidConfig(
                "offset_max_frac must lie in [0, 1]".into(),
            ));
        }
        if self.speaker_a_vocab >= self.content_vocab {
            return Err(Error::InvalidConfig(
                "speaker_a_vocab must leave tokens for speaker B".into(),
            ));
        }
        if self.noise_level < 0.0 {
            return Err(Error::InvalidConfig("noise_level must be >= 0".into()));
        }
        Ok(())
    }

    /// The fixed per-token embedding table, `content_vocab x feature_dim`.
    pub fn embeddings(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.embed_seed);
        (0..self.content_vocab)
            .map(|_| {
                (0..self.feature_dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    }
}

/// One rendered mixture: frames, serialized label, and ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticMixture {
    /// `T x D` feature matrix.
    pub frames: Vec<Vec<f64>>,
    pub label: SerializedLabel,
    pub blank_id: TokenId,
    /// Ground-truth `[start, end)` frame span per speaker.
    pub spans: [(usize, usize); 2],
    pub overlap_ratio: f64,
}

impl SyntheticMixture {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

fn sample_tokens(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, speaker: usize) -> Vec<TokenId> {
    let (lo, hi) = if cfg.speaker_a_vocab > 0 {
        if speaker == 0 {
            (1, cfg.speaker_a_vocab)
        } else {
            (cfg.speaker_a_vocab + 1, cfg.content_vocab)
        }
    } else {
        (1, cfg.content_vocab)
    };
    let count = rng.gen_range(cfg.tokens_min..=cfg.tokens_max);
    let mut tokens: Vec<TokenId> = Vec::with_capacity(count);
    for _ in 0..count {
        loop {
            let tok = rng.gen_range(lo..=hi);
            if cfg.allow_repeats || tokens.last() != Some(&tok) || lo == hi {
                tokens.push(tok);
                break;
            }
        }
    }
    tokens
}

/// Render one two-speaker mixture from the per-mixture `seed`.
///
/// Speaker A starts at frame 0; speaker B at a sampled offset. Overlapped
/// frames hold the elementwise sum of both speakers' token embeddings, and
/// Gaussian noise is added everywhere.
pub fn synth_mixture(cfg: &GeneratorConfig, seed: u64) -> Result<SyntheticMixture> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embeddings = cfg.embeddings();

    let tokens_a = sample_tokens(&mut rng, cfg, 0);
    let tokens_b = sample_tokens(&mut rng, cfg, 1);
    let len_a = tokens_a.len() * cfg.token_span_a;
    let len_b = tokens_b.len() * cfg.token_span_b;
    let offset = (rng.gen_range(0.0..=cfg.offset_max_frac) * len_a as f64).round() as usize;
    let frames_total = len_a.max(offset + len_b);

    let tr = SpeakerTranscripts::new(
        vec![
            LabelSeq::new(tokens_a.clone())?,
            LabelSeq::new(tokens_b.clone())?,
        ],
        Some(vec![0.0, offset as f64]),
    )?;
    let label = serialize_sot(&tr, cfg.sc_id())?;

    let ext = extend_labels(&label.label_seq(), cfg.blank_id())?;
    if frames_total < ext.min_frames() {
        return Err(Error::InfeasibleAlignment {
            frames: frames_total,
            required: ext.min_frames(),
        });
    }

    let mut frames = vec![vec![0.0; cfg.feature_dim]; frames_total];
    for (t, frame) in frames.iter_mut().enumerate().take(len_a) {
        let emb = &embeddings[tokens_a[t / cfg.token_span_a] - 1];
        for (f, e) in frame.iter_mut().zip(emb) {
            *f += e;
        }
    }
    for t in offset..offset + len_b {
        let emb = &embeddings[tokens_b[(t - offset) / cfg.token_span_b] - 1];
        for (f, e) in frames[t].iter_mut().zip(emb) {
            *f += e;
        }
    }
    for frame in &mut frames {
        for f in frame.iter_mut() {
            *f += cfg.noise_level * rng.sample::<f64, _>(StandardNormal);
        }
    }
    // Noise-free position encodings: a ramp over [-1, 1], then sinusoids.
    for (t, frame) in frames.iter_mut().enumerate() {
        let p = (t as f64 + 0.5) / frames_total as f64;
        for c in 0..cfg.position_channels {
            if c == 0 {
                frame.push(2.0 * p - 1.0);
            } else {
                frame.push((std::f64::consts::PI * c as f64 * p).sin());
            }
        }
    }

    let ratio = overlap_ratio(&[
        Timing {
            start: 0.0,
            duration: len_a as f64,
        },
        Timing {
            start: offset as f64,
            duration: len_b as f64,
        },
    ]);

    Ok(SyntheticMixture {
        frames,
        label,
        blank_id: cfg.blank_id(),
        spans: [(0, len_a), (offset, offset + len_b)],
        overlap_ratio: ratio,
    })
}

/// Endless deterministic stream of mixtures seeded `seed, seed+1, ...`.
pub fn mixture_stream(
    cfg: GeneratorConfig,
    seed: u64,
) -> impl Iterator<Item = Result<SyntheticMixture>> {
    (0u64..).map(move |i| synth_mixture(&cfg, seed.wrapping_add(i)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let cfg = GeneratorConfig::default();
        let a = synth_mixture(&cfg, 42).unwrap();
        let b = synth_mixture(&cfg, 42).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.label, b.label);
        assert_eq!(a.spans, b.spans);
    }

    #[test]
    fn recorded_ratio_matches_recomputation() {
        let cfg = GeneratorConfig::default();
        for seed in 0..20 {
            let mix = synth_mixture(&cfg, seed).unwrap();
            let timings: Vec<Timing> = mix
                .spans
                .iter()
                .map(|&(s, e)| Timing {
                    start: s as f64,
                    duration: (e - s) as f64,
                })
                .collect();
            assert!((overlap_ratio(&timings) - mix.overlap_ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_offset_equal_lengths_fully_overlap() {
        let cfg = GeneratorConfig {
            token_span_a: 3,
            token_span_b: 3,
            tokens_min: 3,
            tokens_max: 3,
            offset_max_frac: 0.0,
            ..Default::default()
        };
        let mix = synth_mixture(&cfg, 5).unwrap();
        assert!((mix.overlap_ratio - 1.0).abs() < 1e-12);
        assert_eq!(mix.spans[0], mix.spans[1]);
    }

    #[test]
    fn disjoint_speakers_have_zero_overlap() {
        // token_span large enough that B fits after A when the offset
        // lands at len(A); force it with offset_max_frac = 1 and a seed
        // search is avoided by checking the recorded spans instead.
        let cfg = GeneratorConfig::default();
        for seed in 0..50 {
            let mix = synth_mixture(&cfg, seed).unwrap();
            let (a, b) = (mix.spans[0], mix.spans[1]);
            let overlap = a.1.min(b.1).saturating_sub(b.0.max(a.0));
            if overlap == 0 {
                assert_eq!(mix.overlap_ratio, 0.0);
            } else {
                assert!(mix.overlap_ratio > 0.0);
            }
        }
    }

    #[test]
    fn infeasible_config_rejected() {
        // One frame per token with full overlap cannot fit the serialized
        // label plus separators.
        let cfg = GeneratorConfig {
            token_span_a: 1,
            token_span_b: 1,
            offset_max_frac: 0.0,
            ..Default::default()
        };
        let mut saw_error = false;
        for seed in 0..10 {
            if matches!(
                synth_mixture(&cfg, seed),
                Err(Error::InfeasibleAlignment { .. })
            ) {
                saw_error = true;
            }
        }
        assert!(saw_error);
    }

    #[test]
    fn label_is_fifo_serialized() {
        let cfg = GeneratorConfig::default();
        let mix = synth_mixture(&cfg, 11).unwrap();
        assert_eq!(mix.label.speaker_count(), 2);
        let sc_count = mix
            .label
            .tokens()
            .iter()
            .filter(|&&t| t == cfg.sc_id())
            .count();
        assert_eq!(sc_count, 1);
        // Speaker A starts at 0 <= offset, so its tokens come first.
        assert_eq!(mix.label.speaker_of(0), 1);
    }
}
