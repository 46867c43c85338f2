//! Multi-talker ASR metrics: WER, permutation-invariant WER, overlap-ratio
//! binning, and overlap-aware WER.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::{Error, Result};

/// Largest speaker count scored by permutation search.
pub const PERMUTATION_LIMIT: usize = 6;

/// Edit-error counts against a reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WerCounts {
    pub errors: usize,
    pub ref_len: usize,
    /// The reference was empty, so every hypothesis word counted as an
    /// insertion and the rate divides by 1 instead of 0.
    pub empty_ref: bool,
}

impl WerCounts {
    pub fn wer(&self) -> f64 {
        self.errors as f64 / self.ref_len.max(1) as f64
    }

    fn merge(&mut self, other: WerCounts) {
        self.errors += other.errors;
        self.ref_len += other.ref_len;
        self.empty_ref |= other.empty_ref;
    }
}

/// Levenshtein distance between two sequences.
fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Word errors (substitutions + insertions + deletions) of `hyp` against
/// `reference`.
pub fn edit_distance_wer<T: PartialEq>(reference: &[T], hyp: &[T]) -> WerCounts {
    WerCounts {
        errors: edit_distance(reference, hyp),
        ref_len: reference.len(),
        empty_ref: reference.is_empty(),
    }
}

/// Minimum total edit errors over all assignments of hypothesis streams to
/// reference streams, with the shorter side padded by empty streams.
pub fn pi_wer_counts<T: PartialEq>(refs: &[Vec<T>], hyps: &[Vec<T>]) -> Result<WerCounts> {
    let n = refs.len().max(hyps.len());
    if n > PERMUTATION_LIMIT {
        return Err(Error::PermutationBudget {
            speakers: n,
            limit: PERMUTATION_LIMIT,
        });
    }
    let empty: Vec<T> = Vec::new();
    let ref_padded: Vec<&[T]> = (0..n)
        .map(|i| refs.get(i).map_or(empty.as_slice(), Vec::as_slice))
        .collect();
    let hyp_padded: Vec<&[T]> = (0..n)
        .map(|i| hyps.get(i).map_or(empty.as_slice(), Vec::as_slice))
        .collect();
    let ref_len: usize = ref_padded.iter().map(|r| r.len()).sum();
    let errors = (0..n)
        .permutations(n)
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(i, &j)| edit_distance(ref_padded[i], hyp_padded[j]))
                .sum::<usize>()
        })
        .min()
        .unwrap_or(0);
    Ok(WerCounts {
        errors,
        ref_len,
        empty_ref: ref_len == 0,
    })
}

/// Permutation-invariant WER: minimum total errors over speaker-order
/// permutations, divided by total reference words.
pub fn pi_wer<T: PartialEq>(refs: &[Vec<T>], hyps: &[Vec<T>]) -> Result<f64> {
    Ok(pi_wer_counts(refs, hyps)?.wer())
}

/// Start/duration of one utterance, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub start: f64,
    pub duration: f64,
}

/// One utterance of a mixture: its words and where it lies in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub words: Vec<String>,
    pub start: f64,
    pub duration: f64,
}

impl Utterance {
    pub fn timing(&self) -> Timing {
        Timing {
            start: self.start,
            duration: self.duration,
        }
    }
}

/// Fraction of the covered time span where two or more utterances overlap:
/// time covered by >= 2 utterances over time covered by >= 1.
pub fn overlap_ratio(timings: &[Timing]) -> f64 {
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(timings.len() * 2);
    for t in timings {
        events.push((t.start, 1));
        events.push((t.start + t.duration, -1));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(b.1.cmp(&a.1)));
    let mut coverage = 0i32;
    let mut covered = 0.0;
    let mut overlapped = 0.0;
    let mut prev = f64::NAN;
    for (at, delta) in events {
        if coverage >= 1 {
            covered += at - prev;
        }
        if coverage >= 2 {
            overlapped += at - prev;
        }
        coverage += delta;
        prev = at;
    }
    if covered <= 0.0 {
        0.0
    } else {
        overlapped / covered
    }
}

/// Overlap-ratio bin with the printed half-open boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum OverlapBin {
    Single,
    Low,
    Mid,
    High,
}

impl fmt::Display for OverlapBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            OverlapBin::Single => "single",
            OverlapBin::Low => "low",
            OverlapBin::Mid => "mid",
            OverlapBin::High => "high",
        };
        f.write_str(name)
    }
}

/// Bin an overlap ratio: 0 is single-talker, then (0, 0.2], (0.2, 0.5],
/// (0.5, 1.0].
pub fn bin_overlap(ratio: f64) -> OverlapBin {
    debug_assert!((0.0..=1.0).contains(&ratio));
    if ratio <= 0.0 {
        OverlapBin::Single
    } else if ratio <= 0.2 {
        OverlapBin::Low
    } else if ratio <= 0.5 {
        OverlapBin::Mid
    } else {
        OverlapBin::High
    }
}

/// Unweighted mean of the low, mid, and high bin WERs. The single-talker
/// bin does not participate.
pub fn oa_wer(per_bin: &BTreeMap<OverlapBin, f64>) -> Result<f64> {
    let mut total = 0.0;
    for bin in [OverlapBin::Low, OverlapBin::Mid, OverlapBin::High] {
        total += per_bin.get(&bin).copied().ok_or(Error::MissingBin {
            bin: bin.to_string(),
        })?;
    }
    Ok(total / 3.0)
}

/// One scored mixture as stored in the JSON-lines reference/hypothesis
/// files. Reference files carry `refs` and `timings`; hypothesis files
/// carry `hyps`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub id: String,
    #[serde(default)]
    pub refs: Vec<Vec<String>>,
    #[serde(default)]
    pub hyps: Vec<Vec<String>>,
    #[serde(default)]
    pub timings: Vec<Timing>,
}

/// Pooled scores for one overlap bin.
#[derive(Debug, Clone, Serialize)]
pub struct BinScore {
    pub bin: OverlapBin,
    pub mixtures: usize,
    pub errors: usize,
    pub ref_words: usize,
    pub wer: f64,
}

/// Aggregate scoring output over a set of mixtures.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub per_bin: Vec<BinScore>,
    /// Pooled WER with speakers matched in file order.
    pub overall_wer: f64,
    /// Pooled WER with the best speaker permutation per mixture.
    pub pi_wer: f64,
    /// Macro average of the permutation-invariant low/mid/high bin WERs;
    /// absent when a multi-talker bin has no mixtures.
    pub oa_wer: Option<f64>,
}

/// Score a set of mixtures: permutation-invariant counts pooled per overlap
/// bin (micro within a bin), OA-WER macro-averaged across the multi-talker
/// bins.
pub fn score_records(records: &[MixtureRecord]) -> Result<ScoreReport> {
    let mut per_bin: BTreeMap<OverlapBin, (usize, WerCounts)> = BTreeMap::new();
    let mut identity = WerCounts::default();
    let mut permuted = WerCounts::default();
    for record in records {
        let bin = bin_overlap(overlap_ratio(&record.timings));
        let pi = pi_wer_counts(&record.refs, &record.hyps)?;
        let n = record.refs.len().max(record.hyps.len());
        let empty: Vec<String> = Vec::new();
        for i in 0..n {
            let r = record.refs.get(i).unwrap_or(&empty);
            let h = record.hyps.get(i).unwrap_or(&empty);
            identity.merge(edit_distance_wer(r, h));
        }
        permuted.merge(pi);
        let slot = per_bin.entry(bin).or_insert((0, WerCounts::default()));
        slot.0 += 1;
        slot.1.merge(pi);
    }
    let per_bin: Vec<BinScore> = per_bin
        .into_iter()
        .map(|(bin, (mixtures, counts))| BinScore {
            bin,
            mixtures,
            errors: counts.errors,
            ref_words: counts.ref_len,
            wer: counts.wer(),
        })
        .collect();
    let bins: BTreeMap<OverlapBin, f64> = per_bin.iter().map(|b| (b.bin, b.wer)).collect();
    let oa = oa_wer(&bins).ok();
    Ok(ScoreReport {
        per_bin,
        overall_wer: identity.wer(),
        pi_wer: permuted.wer(),
        oa_wer: oa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn wer_single_deletion() {
        let counts = edit_distance_wer(&words("a b c"), &words("a c"));
        assert_eq!(counts.errors, 1);
        assert_eq!(counts.ref_len, 3);
        assert!((counts.wer() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn wer_identical() {
        let counts = edit_distance_wer(&words("x y"), &words("x y"));
        assert_eq!(counts.errors, 0);
        assert_eq!(counts.wer(), 0.0);
    }

    #[test]
    fn wer_sub_plus_insert() {
        let counts = edit_distance_wer(&words("a"), &words("b c"));
        assert_eq!(counts.errors, 2);
        assert_eq!(counts.wer(), 2.0);
    }

    #[test]
    fn wer_empty_reference_flagged() {
        let counts = edit_distance_wer(&words(""), &words("a b"));
        assert!(counts.empty_ref);
        assert_eq!(counts.errors, 2);
        assert_eq!(counts.wer(), 2.0);
    }

    #[test]
    fn edit_distance_triangle_inequality() {
        let seqs = [words("a b c"), words("a c"), words("b c d"), words("")];
        for x in &seqs {
            for y in &seqs {
                for z in &seqs {
                    let xz = edit_distance(x, z);
                    let xy = edit_distance(x, y);
                    let yz = edit_distance(y, z);
                    assert!(xz <= xy + yz);
                }
            }
        }
    }

    #[test]
    fn pi_wer_swapped_speakers() {
        let refs = vec![words("a b"), words("c")];
        let hyps = vec![words("c"), words("a b")];
        assert_eq!(pi_wer(&refs, &hyps).unwrap(), 0.0);
    }

    #[test]
    fn pi_wer_pads_missing_streams() {
        let refs = vec![words("a")];
        let hyps = vec![words("a"), words("b")];
        assert!((pi_wer(&refs, &hyps).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pi_wer_identity_assignment() {
        let refs = vec![words("a b"), words("c d")];
        let hyps = vec![words("a x"), words("c d")];
        let pi = pi_wer(&refs, &hyps).unwrap();
        assert!((pi - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pi_never_exceeds_identity() {
        let refs = vec![words("a b"), words("c"), words("d e f")];
        let hyps = vec![words("d e"), words("a b"), words("c")];
        let pi = pi_wer_counts(&refs, &hyps).unwrap();
        let identity: usize = refs
            .iter()
            .zip(&hyps)
            .map(|(r, h)| edit_distance(r, h))
            .sum();
        assert!(pi.errors <= identity);
    }

    #[test]
    fn pi_wer_budget() {
        let refs: Vec<Vec<String>> = (0..7).map(|_| words("a")).collect();
        assert!(matches!(
            pi_wer(&refs, &refs),
            Err(Error::PermutationBudget { speakers: 7, .. })
        ));
    }

    #[test]
    fn overlap_ratio_offset_utterances() {
        let t = [
            Timing {
                start: 0.0,
                duration: 10.0,
            },
            Timing {
                start: 5.0,
                duration: 10.0,
            },
        ];
        assert!((overlap_ratio(&t) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_ratio_disjoint_and_identical() {
        let disjoint = [
            Timing {
                start: 0.0,
                duration: 1.0,
            },
            Timing {
                start: 2.0,
                duration: 1.0,
            },
        ];
        assert_eq!(overlap_ratio(&disjoint), 0.0);
        let identical = [
            Timing {
                start: 1.0,
                duration: 4.0,
            },
            Timing {
                start: 1.0,
                duration: 4.0,
            },
        ];
        assert!((overlap_ratio(&identical) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bin_boundaries_as_printed() {
        assert_eq!(bin_overlap(0.0), OverlapBin::Single);
        assert_eq!(bin_overlap(0.2), OverlapBin::Low);
        assert_eq!(bin_overlap(0.5), OverlapBin::Mid);
        assert_eq!(bin_overlap(1.0), OverlapBin::High);
        assert_eq!(bin_overlap(0.2 + 1e-12), OverlapBin::Mid);
        assert_eq!(bin_overlap(0.5 + 1e-12), OverlapBin::High);
        assert_eq!(bin_overlap(1e-12), OverlapBin::Low);
    }

    #[test]
    fn oa_wer_mean_of_three_bins() {
        let mut bins = BTreeMap::new();
        bins.insert(OverlapBin::Low, 10.0);
        bins.insert(OverlapBin::Mid, 20.0);
        bins.insert(OverlapBin::High, 30.0);
        assert!((oa_wer(&bins).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn oa_wer_published_row() {
        let mut bins = BTreeMap::new();
        bins.insert(OverlapBin::Low, 6.0);
        bins.insert(OverlapBin::Mid, 8.4);
        bins.insert(OverlapBin::High, 12.8);
        let oa = oa_wer(&bins).unwrap();
        assert!((oa - 9.066666666666666).abs() < 1e-12);
        assert!((oa - 9.1).abs() <= 0.05);
    }

    #[test]
    fn oa_wer_missing_bin() {
        let mut bins = BTreeMap::new();
        bins.insert(OverlapBin::Low, 6.0);
        bins.insert(OverlapBin::Mid, 8.4);
        assert!(matches!(oa_wer(&bins), Err(Error::MissingBin { .. })));
    }

    #[test]
    fn score_records_end_to_end() {
        let record = |id: &str, offset: f64, hyps: Vec<Vec<String>>| MixtureRecord {
            id: id.into(),
            refs: vec![words("a b"), words("c")],
            hyps,
            timings: vec![
                Timing {
                    start: 0.0,
                    duration: 10.0,
                },
                Timing {
                    start: offset,
                    duration: 10.0,
                },
            ],
        };
        let records = vec![
            // Swapped speakers, heavy overlap: identity errs, permutation fixes.
            record("m1", 1.0, vec![words("c"), words("a b")]),
            // Exact, moderate overlap.
            record("m2", 5.0, vec![words("a b"), words("c")]),
            // One substitution, light overlap.
            record("m3", 8.0, vec![words("a x"), words("c")]),
        ];
        let report = score_records(&records).unwrap();
        assert_eq!(report.pi_wer, 1.0 / 9.0);
        assert!(report.overall_wer > report.pi_wer);
        assert_eq!(report.per_bin.len(), 3);
        assert!(report.oa_wer.is_some());
    }
}
