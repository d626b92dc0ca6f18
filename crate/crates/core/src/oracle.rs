//! Deterministic stand-ins for the target model.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sam::TokenId;

/// Greedy next-token function. Must be deterministic in `context`.
/// `Ok(None)` marks end of sequence.
pub trait Oracle {
    fn next(&mut self, context: &[TokenId]) -> Result<Option<TokenId>>;
}

impl<F> Oracle for F
where
    F: FnMut(&[TokenId]) -> Result<Option<TokenId>>,
{
    fn next(&mut self, context: &[TokenId]) -> Result<Option<TokenId>> {
        self(context)
    }
}

/// Emits a fixed stream after a prompt of known length.
///
/// The answer depends only on how many tokens follow the prompt, which is
/// enough because greedy verification only ever queries contexts made of
/// the prompt and previously accepted tokens.
#[derive(Clone, Debug)]
pub struct ReplayOracle {
    prompt_len: usize,
    stream: Vec<TokenId>,
}

impl ReplayOracle {
    pub fn new(prompt_len: usize, stream: Vec<TokenId>) -> Self {
        Self { prompt_len, stream }
    }
}

impl Oracle for ReplayOracle {
    fn next(&mut self, context: &[TokenId]) -> Result<Option<TokenId>> {
        let pos = context.len().checked_sub(self.prompt_len).ok_or_else(|| {
            Error::Oracle(format!(
                "context of {} tokens is shorter than the prompt ({})",
                context.len(),
                self.prompt_len
            ))
        })?;
        Ok(self.stream.get(pos).copied())
    }
}

/// Argmax k-gram lookup model with back-off to shorter contexts.
///
/// Ties go to the smallest token id. Emitting `eos` ends the sequence.
#[derive(Clone, Debug)]
pub struct NgramOracle {
    order: usize,
    /// `tables[n]` maps an n-token context to its argmax successor.
    tables: Vec<HashMap<Vec<TokenId>, TokenId>>,
    eos: Option<TokenId>,
}

impl NgramOracle {
    /// Trains on `docs`; counts never cross document boundaries.
    pub fn train<D: AsRef<[TokenId]>>(order: usize, docs: &[D], eos: Option<TokenId>) -> Self {
        let mut counts: Vec<HashMap<Vec<TokenId>, HashMap<TokenId, u64>>> =
            vec![HashMap::new(); order + 1];
        for doc in docs {
            let doc = doc.as_ref();
            for i in 0..doc.len() {
                for (n, table) in counts.iter_mut().enumerate() {
                    if n > i {
                        break;
                    }
                    *table
                        .entry(doc[i - n..i].to_vec())
                        .or_default()
                        .entry(doc[i])
                        .or_default() += 1;
                }
            }
        }
        let tables = counts
            .into_iter()
            .map(|table| {
                table
                    .into_iter()
                    .map(|(ctx, next)| {
                        let best = next
                            .into_iter()
                            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                            .map(|(t, _)| t)
                            .expect("non-empty successor table");
                        (ctx, best)
                    })
                    .collect()
            })
            .collect();
        Self { order, tables, eos }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn predict(&self, context: &[TokenId]) -> Option<TokenId> {
        let longest = self.order.min(context.len());
        (0..=longest)
            .rev()
            .find_map(|n| self.tables[n].get(&context[context.len() - n..]).copied())
    }
}

impl Oracle for NgramOracle {
    fn next(&mut self, context: &[TokenId]) -> Result<Option<TokenId>> {
        Ok(self.predict(context).filter(|&t| Some(t) != self.eos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::toks;

    #[test]
    fn replay_indexes_past_prompt() {
        let mut o = ReplayOracle::new(2, toks("XY"));
        assert_eq!(o.next(&toks("AB")).unwrap(), Some(toks("X")[0]));
        assert_eq!(o.next(&toks("ABX")).unwrap(), Some(toks("Y")[0]));
        assert_eq!(o.next(&toks("ABXY")).unwrap(), None);
        assert!(o.next(&toks("A")).is_err());
    }

    #[test]
    fn ngram_argmax_and_backoff() {
        let o = NgramOracle::train(2, &[toks("ABCABD"), toks("ABC")], None);
        // "AB" -> C twice, D once.
        assert_eq!(o.predict(&toks("AB")), Some(toks("C")[0]));
        // Unseen bigram context backs off to unigram "B".
        assert_eq!(o.predict(&toks("ZB")), Some(toks("C")[0]));
        // Empty context: most frequent token, ties to the smallest id.
        assert_eq!(o.predict(&[]), Some(toks("A")[0]));
    }

    #[test]
    fn ngram_tie_goes_to_smallest_id() {
        let o = NgramOracle::train(1, &[toks("AC"), toks("AB")], None);
        assert_eq!(o.predict(&toks("A")), Some(toks("B")[0]));
    }

    #[test]
    fn ngram_eos_ends_sequence() {
        let eos = toks("$")[0];
        let mut o = NgramOracle::train(1, &[toks("AB$")], Some(eos));
        assert_eq!(o.next(&toks("A")).unwrap(), Some(toks("B")[0]));
        assert_eq!(o.next(&toks("B")).unwrap(), None);
    }
}
