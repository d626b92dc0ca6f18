//! Reference matchers: a prompt-lookup style brute-force n-gram search and a
//! suffix-array longest-suffix search. They double as correctness oracles
//! for the automaton and as the comparison points in the benchmarks.
//!
//! All matchers pick the earliest occurrence on ties, like `min_endpos`.

use crate::sam::TokenId;

/// Result of a brute-force n-gram lookup with its work counter.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NgramLookup {
    pub draft: Option<Vec<TokenId>>,
    /// Matched n-gram length (0 when nothing matched).
    pub n: usize,
    /// Token comparisons performed.
    pub comparisons: u64,
}

/// Tries n = `max_n` down to 1: finds the earliest earlier occurrence of the
/// last `n` tokens of `text` and returns up to `draft_len` tokens that
/// follow it.
pub fn ngram_match_brute(text: &[TokenId], max_n: usize, draft_len: usize) -> Option<Vec<TokenId>> {
    ngram_match_brute_counted(text, max_n, draft_len).draft
}

pub fn ngram_match_brute_counted(text: &[TokenId], max_n: usize, draft_len: usize) -> NgramLookup {
    let mut comparisons = 0u64;
    let len = text.len();
    for n in (1..=max_n.min(len.saturating_sub(1))).rev() {
        let suffix = &text[len - n..];
        // Candidate starts strictly before the suffix itself.
        for start in 0..len - n {
            let mut hit = true;
            for k in 0..n {
                comparisons += 1;
                if text[start + k] != suffix[k] {
                    hit = false;
                    break;
                }
            }
            if hit {
                let from = start + n;
                let to = len.min(from + draft_len);
                return NgramLookup {
                    draft: Some(text[from..to].to_vec()).filter(|d| !d.is_empty()),
                    n,
                    comparisons,
                };
            }
        }
    }
    NgramLookup {
        draft: None,
        n: 0,
        comparisons,
    }
}

/// Longest suffix of `query` occurring in `reference`, with its earliest
/// 1-indexed end position. `(0, 0)` when nothing matches.
///
/// Deliberately naive: O(|reference| * |query|^2).
pub fn suffix_longest_match_brute(reference: &[TokenId], query: &[TokenId]) -> (usize, usize) {
    for len in (1..=query.len().min(reference.len())).rev() {
        let suffix = &query[query.len() - len..];
        if let Some(start) = reference.windows(len).position(|w| w == suffix) {
            return (len, start + len);
        }
    }
    (0, 0)
}

/// Sorted suffixes of a reference sequence.
#[derive(Clone, Debug)]
pub struct SuffixArray {
    reference: Vec<TokenId>,
    sa: Vec<u32>,
}

/// A suffix-array hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SaMatch {
    pub len: usize,
    /// Earliest 1-indexed end position.
    pub end: usize,
}

impl SuffixArray {
    /// Prefix doubling, O(n log^2 n).
    pub fn build(reference: &[TokenId]) -> Self {
        let n = reference.len();
        let mut sa: Vec<u32> = (0..n as u32).collect();
        let mut rank: Vec<u64> = reference.iter().map(|t| t.0 as u64 + 1).collect();
        let mut tmp = vec![0u64; n];
        let mut gap = 1usize;
        if n < 2 {
            return Self {
                reference: reference.to_vec(),
                sa,
            };
        }
        loop {
            let key = |i: u32| {
                let i = i as usize;
                (rank[i], if i + gap < n { rank[i + gap] } else { 0 })
            };
            sa.sort_unstable_by_key(|&i| key(i));
            tmp[sa[0] as usize] = 1;
            for w in 1..n {
                let bump = (key(sa[w - 1]) != key(sa[w])) as u64;
                tmp[sa[w] as usize] = tmp[sa[w - 1] as usize] + bump;
            }
            std::mem::swap(&mut rank, &mut tmp);
            if rank[sa[n - 1] as usize] as usize == n || gap >= n {
                break;
            }
            gap *= 2;
        }
        Self {
            reference: reference.to_vec(),
            sa,
        }
    }

    pub fn len(&self) -> usize {
        self.sa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sa.is_empty()
    }

    pub fn suffixes(&self) -> &[u32] {
        &self.sa
    }

    /// Half-open range of suffix-array slots whose suffix starts with
    /// `pattern`. Adds token comparisons to `comparisons`.
    fn range(&self, pattern: &[TokenId], comparisons: &mut u64) -> (usize, usize) {
        let mut cmp = |pos: u32| {
            let suffix = &self.reference[pos as usize..];
            for (k, &p) in pattern.iter().enumerate() {
                *comparisons += 1;
                match suffix.get(k) {
                    None => return std::cmp::Ordering::Less,
                    Some(s) if *s != p => return s.cmp(&p),
                    _ => {}
                }
            }
            std::cmp::Ordering::Equal
        };
        let lo = self.sa.partition_point(|&pos| cmp(pos) == std::cmp::Ordering::Less);
        let hi = lo + self.sa[lo..].partition_point(|&pos| cmp(pos) != std::cmp::Ordering::Greater);
        (lo, hi)
    }

    /// Longest suffix of `query`, at most `max_n` tokens, that occurs in the
    /// reference; earliest occurrence on ties.
    pub fn longest_suffix_match(&self, query: &[TokenId], max_n: usize) -> Option<SaMatch> {
        let mut comparisons = 0;
        self.longest_suffix_match_counted(query, max_n, &mut comparisons)
    }

    pub fn longest_suffix_match_counted(
        &self,
        query: &[TokenId],
        max_n: usize,
        comparisons: &mut u64,
    ) -> Option<SaMatch> {
        for n in (1..=max_n.min(query.len())).rev() {
            let (lo, hi) = self.range(&query[query.len() - n..], comparisons);
            if lo < hi {
                let start = self.sa[lo..hi].iter().min().copied().unwrap() as usize;
                return Some(SaMatch {
                    len: n,
                    end: start + n,
                });
            }
        }
        None
    }
}

/// Builds a suffix array over `reference` and queries it once.
pub fn suffix_array_match(reference: &[TokenId], query: &[TokenId], max_n: usize) -> Option<SaMatch> {
    SuffixArray::build(reference).longest_suffix_match(query, max_n)
}
