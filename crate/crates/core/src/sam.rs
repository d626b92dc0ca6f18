//! Suffix automaton over token sequences.
//!
//! Every state groups the substrings of the reference that share one set of
//! end positions. Besides the classical `link`/`next`/`length` triple each
//! state records `min_endpos`, the earliest (1-indexed) end position of its
//! substrings, which is what lets a match be turned into a draft by slicing
//! the reference right after that position.
//!
//! Two flavors exist. A *dynamic* automaton grows one token at a time while
//! decoding. A *static* automaton is built once over a corpus, annotated with
//! occurrence counts and top-k successors by [`SuffixAutomaton::init_topk`],
//! and then frozen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::Probability;

/// Index into an externally defined vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl From<u32> for TokenId {
    fn from(v: u32) -> Self {
        TokenId(v)
    }
}

impl std::fmt::Display for TokenId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Index of a state in the automaton's node pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Static,
    Dynamic,
}

/// One entry of a state's top-k successor list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Successor<P> {
    pub token: TokenId,
    pub node: NodeId,
    /// `freq(node) / freq(parent)`.
    pub prob: P,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamNode<P> {
    pub(crate) link: Option<NodeId>,
    /// Sorted by token.
    pub(crate) next: Vec<(TokenId, NodeId)>,
    pub(crate) length: u32,
    pub(crate) min_endpos: u32,
    pub(crate) freq: u64,
    pub(crate) topk: Vec<Successor<P>>,
}

impl<P> SamNode<P> {
    fn new(link: Option<NodeId>, length: u32, min_endpos: u32, freq: u64) -> Self {
        Self {
            link,
            next: Vec::new(),
            length,
            min_endpos,
            freq,
            topk: Vec::new(),
        }
    }

    pub fn link(&self) -> Option<NodeId> {
        self.link
    }

    pub fn next(&self) -> &[(TokenId, NodeId)] {
        &self.next
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    pub fn min_endpos(&self) -> u32 {
        self.min_endpos
    }

    /// Occurrence count. Exact only after `init_topk`; before that it holds
    /// the construction seed (1 for primary states, 0 for clones).
    pub fn freq(&self) -> u64 {
        self.freq
    }

    pub fn topk(&self) -> &[Successor<P>] {
        &self.topk
    }

    #[inline]
    pub fn edge(&self, t: TokenId) -> Option<NodeId> {
        if self.next.len() <= 8 {
            self.next.iter().find(|(k, _)| *k == t).map(|(_, v)| *v)
        } else {
            self.next
                .binary_search_by_key(&t, |(k, _)| *k)
                .ok()
                .map(|i| self.next[i].1)
        }
    }

    fn set_edge(&mut self, t: TokenId, to: NodeId) {
        match self.next.binary_search_by_key(&t, |(k, _)| *k) {
            Ok(i) => self.next[i].1 = to,
            Err(i) => self.next.insert(i, (t, to)),
        }
    }
}

/// Position of the matcher inside an automaton: the state holding the
/// longest matched suffix and that suffix's exact length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchCursor {
    pub state: NodeId,
    pub match_len: u32,
}

impl MatchCursor {
    pub const ROOT: MatchCursor = MatchCursor {
        state: NodeId::ROOT,
        match_len: 0,
    };
}

/// Work counters for [`SuffixAutomaton::transfer_counted`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TransferStats {
    pub transfers: u64,
    pub link_hops: u64,
    pub next_moves: u64,
}

impl TransferStats {
    /// Suffix-link hops plus next-edge moves.
    pub fn steps(&self) -> u64 {
        self.link_hops + self.next_moves
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuffixAutomaton<P> {
    pub(crate) nodes: Vec<SamNode<P>>,
    pub(crate) last: NodeId,
    pub(crate) flavor: Flavor,
    pub(crate) frozen: bool,
    pub(crate) reference: Vec<TokenId>,
    /// Zero when no vocabulary is declared.
    pub(crate) vocab_size: u32,
    pub(crate) separator: Option<TokenId>,
}

impl<P: Probability> SuffixAutomaton<P> {
    pub fn new(flavor: Flavor) -> Self {
        Self {
            nodes: vec![SamNode::new(None, 0, 0, 0)],
            last: NodeId::ROOT,
            flavor,
            frozen: false,
            reference: Vec::new(),
            vocab_size: 0,
            separator: None,
        }
    }

    pub fn dynamic() -> Self {
        Self::new(Flavor::Dynamic)
    }

    /// Builds a static, not yet frozen, automaton over `tokens`.
    pub fn build(tokens: &[TokenId]) -> Self {
        let mut sam = Self::new(Flavor::Static);
        sam.nodes.reserve(tokens.len() * 2);
        sam.reference.reserve(tokens.len());
        for &t in tokens {
            sam.push_token(t);
        }
        sam
    }

    /// Builds a static automaton over the documents joined by `sep`, with a
    /// separator after every document including the last one.
    pub fn build_corpus<D: AsRef<[TokenId]>>(docs: &[D], sep: TokenId) -> Result<Self> {
        let mut joined = Vec::with_capacity(docs.iter().map(|d| d.as_ref().len() + 1).sum());
        for (doc, tokens) in docs.iter().enumerate() {
            let tokens = tokens.as_ref();
            if let Some(offset) = tokens.iter().position(|&t| t == sep) {
                return Err(Error::SeparatorCollision { sep, doc, offset });
            }
            joined.extend_from_slice(tokens);
            joined.push(sep);
        }
        let mut sam = Self::build(&joined);
        sam.separator = Some(sep);
        Ok(sam)
    }

    pub fn with_vocab_size(mut self, vocab_size: u32) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    pub fn set_separator(&mut self, sep: Option<TokenId>) {
        self.separator = sep;
    }

    /// Appends `t` to the reference and updates the automaton in place.
    pub fn expand(&mut self, t: TokenId) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        self.push_token(t);
        Ok(())
    }

    fn push_token(&mut self, t: TokenId) {
        self.reference.push(t);
        let len = self.reference.len() as u32;
        let cur = self.alloc(SamNode::new(None, len, len, 1));

        let mut p = Some(self.last);
        while let Some(pv) = p {
            let node = &mut self.nodes[pv.index()];
            if node.edge(t).is_some() {
                break;
            }
            node.set_edge(t, cur);
            p = node.link;
        }

        let link = match p {
            None => NodeId::ROOT,
            Some(pv) => {
                let q = self.nodes[pv.index()].edge(t).expect("edge checked above");
                let p_len = self.nodes[pv.index()].length;
                if p_len + 1 == self.nodes[q.index()].length {
                    q
                } else {
                    let src = &self.nodes[q.index()];
                    let mut clone = SamNode::new(src.link, p_len + 1, src.min_endpos, 0);
                    clone.next = src.next.clone();
                    let clone = self.alloc(clone);
                    let mut p = Some(pv);
                    while let Some(pv) = p {
                        let node = &mut self.nodes[pv.index()];
                        if node.edge(t) != Some(q) {
                            break;
                        }
                        node.set_edge(t, clone);
                        p = node.link;
                    }
                    self.nodes[q.index()].link = Some(clone);
                    clone
                }
            }
        };
        self.nodes[cur.index()].link = Some(link);
        self.last = cur;
    }

    fn alloc(&mut self, node: SamNode<P>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    /// Computes exact occurrence counts and the top-`k` successor lists, then
    /// freezes the automaton.
    ///
    /// Counts are accumulated bottom-up over the suffix-link tree (states in
    /// decreasing `length` order), which yields the size of each state's
    /// end-position set.
    pub fn init_topk(&mut self, k: usize) -> Result<()> {
        if self.flavor != Flavor::Static {
            return Err(Error::NotStatic);
        }
        if self.frozen {
            return Err(Error::Frozen);
        }
        if k == 0 {
            return Err(Error::ZeroTopK);
        }

        for v in self.states_by_length_desc() {
            if v == NodeId::ROOT {
                continue;
            }
            let link = self.nodes[v.index()].link.expect("non-root state has a link");
            let f = self.nodes[v.index()].freq;
            self.nodes[link.index()].freq += f;
        }

        let mut succ: Vec<(TokenId, NodeId, u64)> = Vec::new();
        for i in 0..self.nodes.len() {
            succ.clear();
            succ.extend(
                self.nodes[i]
                    .next
                    .iter()
                    .map(|&(t, v)| (t, v, self.nodes[v.index()].freq)),
            );
            succ.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
            let parent = self.nodes[i].freq;
            let topk = succ
                .iter()
                .take(k)
                .map(|&(token, node, f)| Successor {
                    token,
                    node,
                    prob: P::from_counts(f, parent),
                })
                .collect();
            self.nodes[i].topk = topk;
        }
        self.frozen = true;
        Ok(())
    }

    /// States ordered by decreasing `length` (counting sort).
    fn states_by_length_desc(&self) -> Vec<NodeId> {
        let max = self.reference.len();
        let mut count = vec![0usize; max + 2];
        for n in &self.nodes {
            count[n.length as usize] += 1;
        }
        // Bucket starts for descending order.
        let mut start = vec![0usize; max + 2];
        let mut acc = 0;
        for len in (0..=max).rev() {
            start[len] = acc;
            acc += count[len];
        }
        let mut order = vec![NodeId::ROOT; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            let slot = &mut start[n.length as usize];
            order[*slot] = NodeId(i as u32);
            *slot += 1;
        }
        order
    }

    /// Advances `cursor` by one token: follows suffix links until `t` has an
    /// outgoing edge, then takes it. Falls back to `(root, 0)` when no suffix
    /// of the matched text extended by `t` occurs in the reference.
    #[inline]
    pub fn transfer(&self, cursor: MatchCursor, t: TokenId) -> MatchCursor {
        let mut stats = TransferStats::default();
        self.transfer_counted(cursor, t, &mut stats)
    }

    pub fn transfer_counted(
        &self,
        cursor: MatchCursor,
        t: TokenId,
        stats: &mut TransferStats,
    ) -> MatchCursor {
        stats.transfers += 1;
        let MatchCursor {
            mut state,
            mut match_len,
        } = cursor;
        loop {
            let node = &self.nodes[state.index()];
            if let Some(v) = node.edge(t) {
                stats.next_moves += 1;
                return MatchCursor {
                    state: v,
                    match_len: match_len + 1,
                };
            }
            match node.link {
                Some(link) => {
                    stats.link_hops += 1;
                    state = link;
                    match_len = self.nodes[link.index()].length;
                }
                None => return MatchCursor::ROOT,
            }
        }
    }

    /// Runs `transfer` over every token of `tokens` starting from `cursor`.
    pub fn transfer_all(&self, mut cursor: MatchCursor, tokens: &[TokenId]) -> MatchCursor {
        for &t in tokens {
            cursor = self.transfer(cursor, t);
        }
        cursor
    }

    /// Moves the cursor up the suffix-link tree until `match_len` lies in the
    /// state's own length range.
    ///
    /// Needed after `expand` on a dynamic automaton: a clone may take over
    /// the shorter half of the cursor's state, leaving the matched string
    /// owned by the clone.
    pub fn canonicalize(&self, mut cursor: MatchCursor) -> MatchCursor {
        while let Some(link) = self.nodes[cursor.state.index()].link {
            if cursor.match_len > self.nodes[link.index()].length {
                break;
            }
            cursor.state = link;
        }
        cursor
    }

    /// The occurrence of the matched suffix ending at the state's
    /// `min_endpos`, as a slice of the reference. Empty at the root.
    pub fn matched_span(&self, cursor: MatchCursor) -> &[TokenId] {
        let end = self.nodes[cursor.state.index()].min_endpos as usize;
        &self.reference[end - cursor.match_len as usize..end]
    }

    pub fn node(&self, id: NodeId) -> &SamNode<P> {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[SamNode<P>] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn last(&self) -> NodeId {
        self.last
    }

    pub fn max_length(&self) -> usize {
        self.reference.len()
    }

    pub fn reference(&self) -> &[TokenId] {
        &self.reference
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn separator(&self) -> Option<TokenId> {
        self.separator
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn transition_count(&self) -> usize {
        self.nodes.iter().map(|n| n.next.len()).sum()
    }

    /// Every expand creates exactly one primary state; the rest are clones.
    pub fn clone_count(&self) -> usize {
        self.nodes.len() - 1 - self.reference.len()
    }

    /// Longest prefix of `pattern` readable from the root, i.e. whether
    /// `pattern` is a substring of the reference when the result equals its
    /// length.
    pub fn walk(&self, pattern: &[TokenId]) -> Option<NodeId> {
        let mut state = NodeId::ROOT;
        for &t in pattern {
            state = self.nodes[state.index()].edge(t)?;
        }
        Some(state)
    }

    pub fn contains(&self, pattern: &[TokenId]) -> bool {
        self.walk(pattern).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{brute_count, brute_min_endpos, toks};
    use num_rational::Ratio;
    use std::collections::BTreeSet;

    type Sam = SuffixAutomaton<f64>;

    fn node_of<'a>(sam: &'a Sam, s: &str) -> &'a SamNode<f64> {
        sam.node(sam.walk(&toks(s)).unwrap())
    }

    #[test]
    fn abcbc_has_eight_states_two_clones() {
        let mut sam = Sam::dynamic();
        for t in toks("ABCBC") {
            sam.expand(t).unwrap();
        }
        assert_eq!(sam.node_count(), 8);
        assert_eq!(sam.clone_count(), 2);
        assert_eq!(sam.max_length(), 5);
        // "BC" and "C" share endpos {3, 5}.
        assert_eq!(sam.walk(&toks("BC")), sam.walk(&toks("C")));
        assert_eq!(node_of(&sam, "BC").min_endpos(), 3);
        assert_eq!(node_of(&sam, "BC").length(), 2);
    }

    #[test]
    fn single_token() {
        let mut sam = Sam::dynamic();
        sam.expand(TokenId(b'A' as u32)).unwrap();
        assert_eq!(sam.node_count(), 2);
        let a = node_of(&sam, "A");
        assert_eq!((a.length(), a.min_endpos(), a.link()), (1, 1, Some(NodeId::ROOT)));
    }

    #[test]
    fn substring_set_of_abcbc() {
        let sam = Sam::build(&toks("ABCBC"));
        let text = toks("ABCBC");
        let mut expected = BTreeSet::new();
        for i in 0..text.len() {
            for j in i + 1..=text.len() {
                expected.insert(text[i..j].to_vec());
            }
        }
        assert_eq!(expected.len(), 12);
        assert_eq!(crate::testutil::accepted_substrings(&sam), expected);
    }

    #[test]
    fn build_empty_and_aaaa() {
        let empty = Sam::build(&[]);
        assert_eq!(empty.node_count(), 1);
        assert_eq!(empty.max_length(), 0);

        let sam = Sam::build(&toks("AAAA"));
        assert_eq!(sam.node_count(), 5);
        assert_eq!(sam.clone_count(), 0);
        assert_eq!(node_of(&sam, "AA").min_endpos(), 2);
        assert_eq!(
            node_of(&sam, "AA").min_endpos() as usize,
            brute_min_endpos(&toks("AAAA"), &toks("AA")).unwrap()
        );
    }

    #[test]
    fn build_corpus_rejects_separator_in_doc() {
        let sep = TokenId(b'$' as u32);
        let err = Sam::build_corpus(&[toks("A$B")], sep).unwrap_err();
        assert!(matches!(err, Error::SeparatorCollision { doc: 0, offset: 1, .. }));

        let empty = Sam::build_corpus::<Vec<TokenId>>(&[], sep).unwrap();
        assert_eq!(empty.node_count(), 1);

        let sam = Sam::build_corpus(&[toks("AB"), toks("AB")], sep).unwrap();
        assert_eq!(sam.reference(), toks("AB$AB$").as_slice());
        assert_eq!(node_of(&sam, "AB").min_endpos(), 2);
        assert_eq!(sam.separator(), Some(sep));
    }

    #[test]
    fn init_topk_counts_occurrences() {
        let mut sam = Sam::build(&toks("AAAA"));
        sam.init_topk(1).unwrap();
        assert_eq!(node_of(&sam, "A").freq(), 4);
        let root = sam.node(NodeId::ROOT);
        assert_eq!(root.freq(), 4);
        assert_eq!(root.topk().len(), 1);
        assert_eq!(root.topk()[0].token, toks("A")[0]);
        assert_eq!(root.topk()[0].prob, 1.0);

        let text = toks("ABCBC");
        let mut sam = SuffixAutomaton::<Ratio<u64>>::build(&text);
        sam.init_topk(8).unwrap();
        let bc = sam.node(sam.walk(&toks("BC")).unwrap());
        assert_eq!(bc.freq(), 2);
        assert_eq!(bc.freq() as usize, brute_count(&text, &toks("BC")));
        assert_eq!(sam.node(sam.walk(&text).unwrap()).freq(), 1);
        assert_eq!(sam.node(NodeId::ROOT).freq(), 5);
        let probs: Vec<_> = sam.node(NodeId::ROOT).topk().iter().map(|s| s.prob).collect();
        assert_eq!(
            probs,
            vec![Ratio::new(2, 5), Ratio::new(2, 5), Ratio::new(1, 5)]
        );
    }

    #[test]
    fn init_topk_errors() {
        let mut dynamic = Sam::dynamic();
        assert!(matches!(dynamic.init_topk(4), Err(Error::NotStatic)));
        let mut sam = Sam::build(&toks("AB"));
        assert!(matches!(sam.init_topk(0), Err(Error::ZeroTopK)));
        sam.init_topk(4).unwrap();
        assert!(matches!(sam.init_topk(4), Err(Error::Frozen)));
        assert!(matches!(sam.expand(TokenId(1)), Err(Error::Frozen)));
    }

    #[test]
    fn transfer_examples() {
        let sam = Sam::build(&toks("ABCBC"));
        let c = sam.transfer(MatchCursor::ROOT, toks("Z")[0]);
        assert_eq!(c, MatchCursor::ROOT);

        let c = sam.transfer_all(MatchCursor::ROOT, &toks("XBC"));
        assert_eq!(c.match_len, 2);
        assert_eq!(sam.node(c.state).min_endpos(), 3);
        assert_eq!(sam.matched_span(c), toks("BC").as_slice());

        let c = sam.transfer_all(MatchCursor::ROOT, &toks("ABCBC"));
        assert_eq!(c.match_len, 5);
        assert_eq!(c.state, sam.last());
        assert_eq!(sam.node(c.state).min_endpos(), 5);
    }

    #[test]
    fn canonicalize_after_clone() {
        // In "AB" the state of "B" also holds "AB". Appending B splits it, so a
        // cursor matching "B" must move to the new clone.
        let mut sam = Sam::dynamic();
        let mut cursor = MatchCursor::ROOT;
        let text = toks("ABBAB");
        for (i, &t) in text.iter().enumerate() {
            cursor = sam.transfer(cursor, t);
            sam.expand(t).unwrap();
            let fixed = sam.canonicalize(cursor);
            if i == 2 {
                assert_ne!(fixed.state, cursor.state);
            }
            cursor = fixed;
            let node = sam.node(cursor.state);
            if cursor.state != NodeId::ROOT {
                assert!(cursor.match_len > sam.node(node.link().unwrap()).length());
                assert!(cursor.match_len <= node.length());
            }
            let (len, _) = crate::baselines::suffix_longest_match_brute(&text[..i], &text[..=i]);
            assert_eq!(cursor.match_len as usize, len);
        }
        assert_eq!(sam.matched_span(cursor), toks("AB").as_slice());
    }
}
