//! Collapse function and greedy best-path decoding.

use crate::lattice::PosteriorGrid;
use crate::TokenId;

/// Best-path decoding result: the collapsed token sequence plus the raw
/// per-frame argmax trace it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub trace: Vec<TokenId>,
}

/// Collapse a frame-level path: merge repeated consecutive tokens into one,
/// then remove all blanks.
pub fn collapse(path: &[TokenId], blank_id: TokenId) -> Vec<TokenId> {
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

/// Per-frame argmax followed by collapse. Ties break toward the lowest
/// token id.
pub fn greedy_decode(post: &PosteriorGrid, blank_id: TokenId) -> Hypothesis {
    let trace: Vec<TokenId> = (0..post.frames())
        .map(|t| {
            let row = post.row(t);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    let tokens = collapse(&trace, blank_id);
    Hypothesis { tokens, trace }
}

/// Split a token sequence at `<sc>` occurrences. Empty segments are kept, so
/// the segments always rejoin with `<sc>` to the original sequence.
pub fn split_by_sc(tokens: &[TokenId], sc_id: TokenId) -> Vec<Vec<TokenId>> {
    let mut out = vec![Vec::new()];
    for &tok in tokens {
        if tok == sc_id {
            out.push(Vec::new());
        } else {
            out.last_mut().expect("never empty").push(tok);
        }
    }
    out
}
