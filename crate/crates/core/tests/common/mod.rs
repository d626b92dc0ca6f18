//! Brute-force oracles shared by the integration tests. Nothing here uses
//! the automaton to compute an expected value.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Ratio;
use rand::Rng;
use samspec_core::{NodeId, Probability, SuffixAutomaton, TokenId};

pub fn random_seq(rng: &mut impl Rng, alphabet: u32, len: usize) -> Vec<TokenId> {
    (0..len).map(|_| TokenId(rng.random_range(0..alphabet))).collect()
}

/// Every distinct substring mapped to its sorted 1-indexed end positions.
pub fn endpos_table(text: &[TokenId]) -> HashMap<&[TokenId], Vec<u32>> {
    let mut table: HashMap<&[TokenId], Vec<u32>> = HashMap::new();
    for end in 1..=text.len() {
        for start in 0..end {
            table.entry(&text[start..end]).or_default().push(end as u32);
        }
    }
    table
}

/// Naive longest suffix of `query` occurring in `text`, with the earliest
/// 1-indexed end position of that suffix. Starts from `hint` (an upper
/// bound on the answer) and counts down.
pub fn longest_suffix_in(text: &[TokenId], query: &[TokenId], hint: usize) -> (usize, usize) {
    let top = hint.min(query.len()).min(text.len());
    for len in (1..=top).rev() {
        let suffix = &query[query.len() - len..];
        if let Some(start) = text.windows(len).position(|w| w == suffix) {
            return (len, start + len);
        }
    }
    (0, 0)
}

/// Every string the automaton accepts, grouped by the state it leads to.
pub fn strings_by_state<P: Probability>(sam: &SuffixAutomaton<P>) -> BTreeMap<NodeId, Vec<Vec<TokenId>>> {
    let mut out: BTreeMap<NodeId, Vec<Vec<TokenId>>> = BTreeMap::new();
    let mut stack = vec![(sam.root(), Vec::new())];
    while let Some((v, s)) = stack.pop() {
        for &(t, w) in sam.node(v).next() {
            let mut s2 = s.clone();
            s2.push(t);
            out.entry(w).or_default().push(s2.clone());
            stack.push((w, s2));
        }
    }
    out
}

/// Checks the automaton against the brute-force end-position table of its
/// reference: accepted language, equivalence classes, lengths, suffix links
/// and earliest end positions. Returns a description of the first mismatch.
pub fn check_structure<P: Probability>(sam: &SuffixAutomaton<P>) -> Result<(), String> {
    let text = sam.reference();
    let table = endpos_table(text);
    let groups = strings_by_state(sam);

    let accepted: BTreeSet<&[TokenId]> = groups.values().flatten().map(Vec::as_slice).collect();
    let expected: BTreeSet<&[TokenId]> = table.keys().copied().collect();
    if accepted != expected {
        return Err(format!(
            "accepted {} strings, expected {}",
            accepted.len(),
            expected.len()
        ));
    }
    if groups.len() + 1 != sam.node_count() {
        return Err("unreachable states".into());
    }

    let mut seen_endpos = BTreeSet::new();
    for (&v, strings) in &groups {
        let node = sam.node(v);
        let endpos = &table[strings[0].as_slice()];
        if strings.iter().any(|s| &table[s.as_slice()] != endpos) {
            return Err(format!("state {v:?} mixes end-position classes"));
        }
        if !seen_endpos.insert(endpos.clone()) {
            return Err(format!("state {v:?} duplicates an end-position class"));
        }
        let lens: BTreeSet<usize> = strings.iter().map(Vec::len).collect();
        let (min, max) = (*lens.first().unwrap(), *lens.last().unwrap());
        if max != node.length() as usize || lens.len() != max - min + 1 || strings.len() != lens.len() {
            return Err(format!("state {v:?} lengths {lens:?} vs length {}", node.length()));
        }
        if node.min_endpos() != endpos[0] {
            return Err(format!(
                "state {v:?} min_endpos {} vs brute {}",
                node.min_endpos(),
                endpos[0]
            ));
        }
        let longest = strings.iter().find(|s| s.len() == max).unwrap();
        let link_target = if min == 1 {
            Some(sam.root())
        } else {
            sam.walk(&longest[max - (min - 1)..])
        };
        if node.link() != link_target {
            return Err(format!("state {v:?} link {:?} vs {link_target:?}", node.link()));
        }
    }
    Ok(())
}

/// Checks frozen counts and top-k successors exactly, against brute-force
/// occurrence counts. `k` is the top-k width used at freeze time.
pub fn check_topk(sam: &SuffixAutomaton<Ratio<u64>>, k: usize) -> Result<(), String> {
    let table = endpos_table(sam.reference());
    let groups = strings_by_state(sam);
    let count = |v: NodeId| -> u64 {
        if v == sam.root() {
            sam.max_length() as u64
        } else {
            table[groups[&v][0].as_slice()].len() as u64
        }
    };
    for (i, node) in sam.nodes().iter().enumerate() {
        let v = NodeId(i as u32);
        let f = count(v);
        if node.freq() != f {
            return Err(format!("state {i} freq {} vs brute {f}", node.freq()));
        }
        let topk = node.topk();
        if topk.len() != k.min(node.next().len()) {
            return Err(format!("state {i} keeps {} successors", topk.len()));
        }
        for s in topk {
            if node.edge(s.token) != Some(s.node) {
                return Err(format!("state {i} top-k edge {} is not a transition", s.token));
            }
            let want = Ratio::new(count(s.node), f);
            if s.prob != want {
                return Err(format!("state {i} prob {} vs {want}", s.prob));
            }
        }
        for w in topk.windows(2) {
            let ordered = w[0].prob > w[1].prob || (w[0].prob == w[1].prob && w[0].token < w[1].token);
            if !ordered {
                return Err(format!("state {i} top-k not ordered"));
            }
        }
        if let Some(weakest) = topk.last() {
            let kept: BTreeSet<TokenId> = topk.iter().map(|s| s.token).collect();
            for &(t, w) in node.next() {
                if kept.contains(&t) {
                    continue;
                }
                let c = count(w);
                let beats = c > count(weakest.node) || (c == count(weakest.node) && t < weakest.token);
                if beats {
                    return Err(format!("state {i} dropped a stronger successor {t}"));
                }
            }
        }
    }
    Ok(())
}
