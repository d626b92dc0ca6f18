//! Draft extraction from suffix automatons.
//!
//! Linear drafts copy the reference right after the earliest occurrence of
//! the matched suffix. Tree drafts grow a maximum-probability tree over the
//! static automaton's top-k successors, always expanding the pending node
//! with the highest path probability next.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::prob::Probability;
use crate::sam::{MatchCursor, NodeId, SuffixAutomaton, TokenId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftSource {
    DynamicSam,
    StaticSam,
    Auxiliary,
}

impl DraftSource {
    pub const ALL: [DraftSource; 3] = [
        DraftSource::DynamicSam,
        DraftSource::StaticSam,
        DraftSource::Auxiliary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DraftSource::DynamicSam => "dynamic_sam",
            DraftSource::StaticSam => "static_sam",
            DraftSource::Auxiliary => "auxiliary",
        }
    }
}

/// A candidate continuation: a token run or a token tree.
///
/// Node `i` hangs off `parents[i]`, or off the implicit root (the last
/// accepted token) when that is `None`. Parents always precede children.
#[derive(Clone, Debug, PartialEq)]
pub struct Draft<P = f64> {
    pub tokens: Vec<TokenId>,
    pub parents: Vec<Option<usize>>,
    /// Path probabilities in node order; empty for drafts that carry none.
    pub path_probs: Vec<P>,
    pub source: DraftSource,
    /// Match length (or virtual match length) that justified this draft.
    pub score: i64,
}

impl<P> Draft<P> {
    pub fn linear(tokens: Vec<TokenId>, source: DraftSource, score: i64) -> Self {
        let parents = (0..tokens.len()).map(|i| i.checked_sub(1)).collect();
        Self {
            tokens,
            parents,
            path_probs: Vec::new(),
            source,
            score,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_chain(&self) -> bool {
        self.parents
            .iter()
            .enumerate()
            .all(|(i, p)| *p == i.checked_sub(1))
    }

    /// Nonempty, parent indices point backwards and lengths agree.
    pub fn is_valid_tree(&self) -> bool {
        !self.tokens.is_empty()
            && self.parents.len() == self.tokens.len()
            && self
                .parents
                .iter()
                .enumerate()
                .all(|(i, p)| p.is_none_or(|p| p < i))
    }

    /// Tokens from the implicit root down to node `i`, inclusive.
    pub fn path_to(&self, mut i: usize) -> Vec<TokenId> {
        let mut path = vec![self.tokens[i]];
        while let Some(p) = self.parents[i] {
            path.push(self.tokens[p]);
            i = p;
        }
        path.reverse();
        path
    }

    /// Depth of each node; children of the implicit root have depth 0.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = Vec::with_capacity(self.parents.len());
        for p in &self.parents {
            depth.push(p.map_or(0, |p| depth[p] + 1));
        }
        depth
    }
}

/// Up to `n` reference tokens following the matched suffix's earliest
/// occurrence, stopping before the reference end or a separator.
///
/// Returns `None` at the root or when nothing can be extracted.
pub fn draft_linear<P: Probability>(
    sam: &SuffixAutomaton<P>,
    cursor: MatchCursor,
    n: usize,
) -> Option<Draft<P>> {
    if cursor.match_len == 0 || n == 0 {
        return None;
    }
    let reference = sam.reference();
    // 1-indexed end position == 0-indexed start of the continuation.
    let start = sam.node(cursor.state).min_endpos() as usize;
    let end = reference.len().min(start + n);
    let mut slice = &reference[start..end];
    if let Some(sep) = sam.separator() {
        if let Some(cut) = slice.iter().position(|&t| t == sep) {
            slice = &slice[..cut];
        }
    }
    if slice.is_empty() {
        return None;
    }
    Some(Draft::linear(
        slice.to_vec(),
        DraftSource::DynamicSam,
        cursor.match_len as i64,
    ))
}

/// Pending expansion in the tree-drafting queue.
#[derive(Clone, Copy, Debug)]
pub struct PrimItem<P> {
    pub path_prob: P,
    pub state: NodeId,
    pub token: TokenId,
    pub parent_slot: Option<usize>,
    seq: u64,
}

impl<P: Probability> PartialEq for PrimItem<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P: Probability> Eq for PrimItem<P> {}

impl<P: Probability> PartialOrd for PrimItem<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P: Probability> Ord for PrimItem<P> {
    /// Greater pops first: higher probability, then smaller token, then
    /// earlier insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        self.path_prob
            .partial_cmp(&other.path_prob)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.token.cmp(&self.token))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Tree draft grown from `cursor.state` over top-k successors.
///
/// `anchor` is the token that led to `cursor` (already generated); it is the
/// tree root and counts toward `max_size`, but is not part of the returned
/// draft, which therefore has at most `max_size - 1` tokens. Successors that
/// are the separator token are pruned.
pub fn draft_tree<P: Probability>(
    sam: &SuffixAutomaton<P>,
    cursor: MatchCursor,
    anchor: TokenId,
    max_size: usize,
) -> Option<Draft<P>> {
    if cursor.match_len == 0 {
        return None;
    }
    debug_assert_eq!(
        sam.reference()[sam.node(cursor.state).min_endpos() as usize - 1],
        anchor,
        "cursor must end with the anchor token"
    );
    let sep = sam.separator();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push_children = |heap: &mut BinaryHeap<PrimItem<P>>, state: NodeId, prob: P, slot| {
        for s in sam.node(state).topk() {
            if Some(s.token) == sep {
                continue;
            }
            heap.push(PrimItem {
                path_prob: prob * s.prob,
                state: s.node,
                token: s.token,
                parent_slot: slot,
                seq,
            });
            seq += 1;
        }
    };

    push_children(&mut heap, cursor.state, P::one(), None);
    let mut tokens = Vec::new();
    let mut parents = Vec::new();
    let mut path_probs = Vec::new();
    // The anchor occupies one slot of the size budget.
    while tokens.len() + 1 < max_size {
        let Some(item) = heap.pop() else { break };
        let slot = tokens.len();
        tokens.push(item.token);
        parents.push(item.parent_slot);
        path_probs.push(item.path_prob);
        push_children(&mut heap, item.state, item.path_prob, Some(slot));
    }
    if tokens.is_empty() {
        return None;
    }
    Some(Draft {
        tokens,
        parents,
        path_probs,
        source: DraftSource::StaticSam,
        score: cursor.match_len as i64,
    })
}
