//! Brute-force oracles shared by unit tests.

use std::collections::BTreeSet;

use crate::prob::Probability;
use crate::sam::{NodeId, SuffixAutomaton, TokenId};

pub fn toks(s: &str) -> Vec<TokenId> {
    s.bytes().map(|b| TokenId(b as u32)).collect()
}

/// Number of (possibly overlapping) occurrences of `pat` in `text`.
pub fn brute_count(text: &[TokenId], pat: &[TokenId]) -> usize {
    if pat.is_empty() || pat.len() > text.len() {
        return 0;
    }
    text.windows(pat.len()).filter(|w| *w == pat).count()
}

/// Earliest 1-indexed end position of `pat` in `text`.
pub fn brute_min_endpos(text: &[TokenId], pat: &[TokenId]) -> Option<usize> {
    text.windows(pat.len())
        .position(|w| w == pat)
        .map(|i| i + pat.len())
}

/// Every string spelled by a path from the root.
pub fn accepted_substrings<P: Probability>(sam: &SuffixAutomaton<P>) -> BTreeSet<Vec<TokenId>> {
    let mut out = BTreeSet::new();
    let mut stack = vec![(NodeId::ROOT, Vec::new())];
    while let Some((v, path)) = stack.pop() {
        for &(t, w) in sam.node(v).next() {
            let mut p = path.clone();
            p.push(t);
            out.insert(p.clone());
            stack.push((w, p));
        }
    }
    out
}
