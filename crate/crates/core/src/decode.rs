//! The decoding loop: pick a draft source by match length, verify the draft
//! greedily against an oracle, and feed the emitted tokens back into both
//! automatons and the auxiliary table.
//!
//! Every step emits the accepted draft prefix plus one token produced by the
//! oracle itself (the correction, or a bonus token after full acceptance),
//! so mean accepted tokens (MAT) is at least 1.0 even when nothing in the
//! draft is accepted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::draft::{draft_linear, draft_tree, Draft, DraftSource};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::prob::Probability;
use crate::recycle::{RecycleTable, DEFAULT_SHAPE};
use crate::sam::{MatchCursor, SuffixAutomaton, TokenId};

pub const DEFAULT_DRAFT_LEN: usize = 40;
pub const CODE_DRAFT_LEN: usize = 16;
pub const DEFAULT_L_BIAS: i64 = 5;
pub const DEFAULT_L_THRESHOLD: i64 = 5;
pub const DEFAULT_TOPK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxConfig {
    /// Row capacity of the recycle table.
    pub k: usize,
    /// Per-level branching of the draft tree template.
    pub shape: Vec<usize>,
}

impl Default for AuxConfig {
    fn default() -> Self {
        Self {
            k: 8,
            shape: DEFAULT_SHAPE.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Linear draft length `n`.
    pub draft_len: usize,
    /// Node budget for static tree drafts, counting the anchor.
    pub tree_size: usize,
    pub use_dynamic: bool,
    /// Ignored when no static automaton is supplied.
    pub use_static: bool,
    pub aux: Option<AuxConfig>,
    /// Margin the static match must beat the dynamic match by.
    pub l_bias: i64,
    /// Virtual match length of the auxiliary drafter.
    pub l_threshold: i64,
    pub max_new_tokens: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            draft_len: DEFAULT_DRAFT_LEN,
            tree_size: DEFAULT_DRAFT_LEN,
            use_dynamic: true,
            use_static: true,
            aux: Some(AuxConfig::default()),
            l_bias: DEFAULT_L_BIAS,
            l_threshold: DEFAULT_L_THRESHOLD,
            max_new_tokens: 512,
        }
    }
}

impl DecodeConfig {
    /// Shorter drafts for code-like data.
    pub fn code() -> Self {
        Self {
            draft_len: CODE_DRAFT_LEN,
            tree_size: CODE_DRAFT_LEN,
            ..Self::default()
        }
    }

    /// No auxiliary drafter; the static bias drops to 0 accordingly.
    pub fn without_aux(mut self) -> Self {
        self.aux = None;
        self.l_bias = 0;
        self
    }

    /// Every draft source disabled: plain one-token-per-step decoding.
    pub fn plain(max_new_tokens: usize) -> Self {
        Self {
            use_dynamic: false,
            use_static: false,
            aux: None,
            max_new_tokens,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draft_len == 0 {
            return Err(Error::Config("draft_len must be at least 1".into()));
        }
        if self.tree_size == 0 {
            return Err(Error::Config("tree_size must be at least 1".into()));
        }
        if let Some(aux) = &self.aux {
            if aux.k == 0 {
                return Err(Error::Config("auxiliary row capacity must be at least 1".into()));
            }
            if aux.shape.is_empty() || aux.shape.contains(&0) {
                return Err(Error::Config(
                    "auxiliary tree shape must be non-empty with positive branching".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Chooses among the sources that have a draft.
///
/// Scores are `l_dynamic` for the dynamic automaton, `l_static - l_bias` for
/// the static one and `l_threshold` for the auxiliary drafter. The highest
/// score wins; ties prefer dynamic, then static, then auxiliary.
pub fn select_draft(
    l_static: u32,
    l_dynamic: u32,
    available: &[DraftSource],
    l_bias: i64,
    l_threshold: i64,
) -> Option<DraftSource> {
    let mut best: Option<(DraftSource, i64)> = None;
    for source in DraftSource::ALL {
        if !available.contains(&source) {
            continue;
        }
        let score = match source {
            DraftSource::DynamicSam => l_dynamic as i64,
            DraftSource::StaticSam => l_static as i64 - l_bias,
            DraftSource::Auxiliary => l_threshold,
        };
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((source, score));
        }
    }
    best.map(|(s, _)| s)
}

/// Result of verifying one draft.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verification {
    /// Draft tokens accepted.
    pub accepted: usize,
    /// Accepted tokens plus the oracle's own next token, if it did not end.
    pub emitted: Vec<TokenId>,
    /// The oracle signalled end of sequence.
    pub done: bool,
}

/// Greedy verification of a token run. Emitted tokens are appended to
/// `context`.
pub fn verify_linear<O: Oracle + ?Sized>(
    oracle: &mut O,
    context: &mut Vec<TokenId>,
    draft: &[TokenId],
) -> Result<Verification> {
    let start = context.len();
    let mut accepted = 0;
    loop {
        let Some(next) = oracle.next(context)? else {
            return Ok(Verification {
                accepted,
                emitted: context[start..].to_vec(),
                done: true,
            });
        };
        context.push(next);
        if draft.get(accepted) == Some(&next) {
            accepted += 1;
        } else {
            return Ok(Verification {
                accepted,
                emitted: context[start..].to_vec(),
                done: false,
            });
        }
    }
}

/// Greedy verification of a token tree: descend into the child whose token
/// matches the oracle until none does. Emitted tokens are appended to
/// `context`.
pub fn verify_tree<O: Oracle + ?Sized, P>(
    oracle: &mut O,
    context: &mut Vec<TokenId>,
    draft: &Draft<P>,
) -> Result<Verification> {
    let mut roots = Vec::new();
    let mut children = vec![Vec::new(); draft.len()];
    for (i, p) in draft.parents.iter().enumerate() {
        match p {
            Some(p) => children[*p].push(i),
            None => roots.push(i),
        }
    }
    let start = context.len();
    let mut accepted = 0;
    let mut level = &roots;
    loop {
        let Some(next) = oracle.next(context)? else {
            return Ok(Verification {
                accepted,
                emitted: context[start..].to_vec(),
                done: true,
            });
        };
        context.push(next);
        match level.iter().find(|&&i| draft.tokens[i] == next) {
            Some(&i) => {
                accepted += 1;
                level = &children[i];
            }
            None => {
                return Ok(Verification {
                    accepted,
                    emitted: context[start..].to_vec(),
                    done: false,
                })
            }
        }
    }
}

/// One decoding step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepOutcome {
    /// `None` for a plain single-token step.
    pub source: Option<DraftSource>,
    pub draft_size: usize,
    pub accepted: usize,
    pub tokens_emitted: usize,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub steps: u64,
    pub tokens: u64,
    pub drafted: u64,
    pub accepted: u64,
}

impl SourceCounts {
    pub fn mat(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.tokens as f64 / self.steps as f64
        }
    }
}

pub const PLAIN: &str = "plain";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeMetrics {
    pub steps: u64,
    pub total_tokens: u64,
    /// Keyed by source name, plus `"plain"` for steps without a draft.
    pub per_source: BTreeMap<String, SourceCounts>,
}

impl DecodeMetrics {
    /// Mean tokens emitted per step, correction token included.
    pub fn mat(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_tokens as f64 / self.steps as f64
        }
    }

    pub fn source(&self, name: &str) -> SourceCounts {
        self.per_source.get(name).copied().unwrap_or_default()
    }

    /// Fraction of steps that used `name`.
    pub fn share(&self, name: &str) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.source(name).steps as f64 / self.steps as f64
        }
    }

    fn record(&mut self, step: &StepOutcome) {
        self.steps += 1;
        self.total_tokens += step.tokens_emitted as u64;
        let name = step.source.map_or(PLAIN, DraftSource::name);
        let entry = self.per_source.entry(name.to_string()).or_default();
        entry.steps += 1;
        entry.tokens += step.tokens_emitted as u64;
        entry.drafted += step.draft_size as u64;
        entry.accepted += step.accepted as u64;
    }

    /// JSON object with derived MAT and share columns alongside the counts.
    pub fn to_json(&self) -> serde_json::Value {
        let per_source: serde_json::Map<_, _> = self
            .per_source
            .iter()
            .map(|(name, c)| {
                (
                    name.clone(),
                    serde_json::json!({
                        "steps": c.steps,
                        "tokens": c.tokens,
                        "drafted": c.drafted,
                        "accepted": c.accepted,
                        "mat": c.mat(),
                        "share": self.share(name),
                    }),
                )
            })
            .collect();
        serde_json::json!({
            "steps": self.steps,
            "total_tokens": self.total_tokens,
            "mat": self.mat(),
            "per_source": per_source,
        })
    }
}

/// State of one decoding run: context, dynamic automaton, cursors into both
/// automatons, and the auxiliary table.
pub struct Session<'a, P: Probability> {
    config: DecodeConfig,
    static_sam: Option<&'a SuffixAutomaton<P>>,
    dynamic: SuffixAutomaton<P>,
    static_cursor: MatchCursor,
    dynamic_cursor: MatchCursor,
    table: Option<RecycleTable>,
    context: Vec<TokenId>,
    prompt_len: usize,
    done: bool,
    metrics: DecodeMetrics,
}

impl<'a, P: Probability> Session<'a, P> {
    pub fn new(static_sam: Option<&'a SuffixAutomaton<P>>, config: DecodeConfig) -> Result<Self> {
        config.validate()?;
        let table = config.aux.as_ref().map(|aux| RecycleTable::new(aux.k));
        Ok(Self {
            static_sam: static_sam.filter(|_| config.use_static),
            config,
            dynamic: SuffixAutomaton::dynamic(),
            static_cursor: MatchCursor::ROOT,
            dynamic_cursor: MatchCursor::ROOT,
            table,
            context: Vec::new(),
            prompt_len: 0,
            done: false,
            metrics: DecodeMetrics::default(),
        })
    }

    /// Feeds the prompt through both cursors, the dynamic automaton and the
    /// auxiliary table.
    pub fn prefill(&mut self, prompt: &[TokenId]) -> Result<()> {
        for &t in prompt {
            self.absorb(t)?;
        }
        if let Some(table) = &mut self.table {
            table.observe(prompt);
        }
        self.context.extend_from_slice(prompt);
        self.prompt_len = self.context.len();
        Ok(())
    }

    /// Static cursor transfers; the dynamic cursor transfers before the
    /// automaton is expanded with the same token, so the match never includes
    /// the token's own new position.
    fn absorb(&mut self, t: TokenId) -> Result<()> {
        if let Some(sam) = self.static_sam {
            self.static_cursor = sam.transfer(self.static_cursor, t);
        }
        if self.config.use_dynamic {
            self.dynamic_cursor = self.dynamic.transfer(self.dynamic_cursor, t);
            self.dynamic.expand(t)?;
            self.dynamic_cursor = self.dynamic.canonicalize(self.dynamic_cursor);
        }
        Ok(())
    }

    fn candidates(&self) -> Vec<Draft<P>> {
        let mut out = Vec::new();
        let Some(&last) = self.context.last() else {
            return out;
        };
        if self.config.use_dynamic {
            out.extend(draft_linear(&self.dynamic, self.dynamic_cursor, self.config.draft_len));
        }
        if let Some(sam) = self.static_sam {
            out.extend(draft_tree(sam, self.static_cursor, last, self.config.tree_size));
        }
        if let (Some(table), Some(aux)) = (&self.table, &self.config.aux) {
            if let Some(mut d) = table.draft_bfs(last, &aux.shape) {
                d.score = self.config.l_threshold;
                out.push(d);
            }
        }
        out
    }

    /// Runs one step. Returns `None` once decoding has finished.
    pub fn step<O: Oracle + ?Sized>(&mut self, oracle: &mut O) -> Result<Option<StepOutcome>> {
        let budget = self.config.max_new_tokens.saturating_sub(self.generated());
        if self.done || budget == 0 {
            self.done = true;
            return Ok(None);
        }
        let candidates = self.candidates();
        let available: Vec<_> = candidates.iter().map(|d| d.source).collect();
        let choice = select_draft(
            self.static_cursor.match_len,
            self.dynamic_cursor.match_len,
            &available,
            self.config.l_bias,
            self.config.l_threshold,
        );
        let draft = choice.and_then(|s| candidates.into_iter().find(|d| d.source == s));

        let start = self.context.len();
        let mut v = match &draft {
            Some(d) if d.is_chain() => verify_linear(oracle, &mut self.context, &d.tokens)?,
            Some(d) => verify_tree(oracle, &mut self.context, d)?,
            None => verify_linear(oracle, &mut self.context, &[])?,
        };
        if v.emitted.len() > budget {
            v.emitted.truncate(budget);
            v.accepted = v.accepted.min(budget);
            self.context.truncate(start + budget);
        }

        let prev = self.context[..start].last().copied();
        for &t in &v.emitted {
            self.absorb(t)?;
        }
        if let Some(table) = &mut self.table {
            match prev {
                Some(p) => {
                    let mut pairs = Vec::with_capacity(v.emitted.len() + 1);
                    pairs.push(p);
                    pairs.extend_from_slice(&v.emitted);
                    table.observe(&pairs);
                }
                None => table.observe(&v.emitted),
            }
        }

        self.done = v.done || self.generated() >= self.config.max_new_tokens;
        let outcome = StepOutcome {
            source: draft.as_ref().map(|d| d.source),
            draft_size: draft.as_ref().map_or(0, Draft::len),
            accepted: v.accepted,
            tokens_emitted: v.emitted.len(),
            done: self.done,
        };
        if outcome.tokens_emitted > 0 {
            self.metrics.record(&outcome);
        }
        Ok(Some(outcome))
    }

    /// Steps until the oracle ends or the token budget is spent.
    pub fn run<O: Oracle + ?Sized>(&mut self, oracle: &mut O) -> Result<()> {
        while self.step(oracle)?.is_some() {}
        Ok(())
    }

    pub fn generated(&self) -> usize {
        self.context.len() - self.prompt_len
    }

    pub fn output(&self) -> &[TokenId] {
        &self.context[self.prompt_len..]
    }

    pub fn context(&self) -> &[TokenId] {
        &self.context
    }

    pub fn metrics(&self) -> &DecodeMetrics {
        &self.metrics
    }

    pub fn dynamic_sam(&self) -> &SuffixAutomaton<P> {
        &self.dynamic
    }

    pub fn dynamic_cursor(&self) -> MatchCursor {
        self.dynamic_cursor
    }

    pub fn static_cursor(&self) -> MatchCursor {
        self.static_cursor
    }

    pub fn recycle_table(&self) -> Option<&RecycleTable> {
        self.table.as_ref()
    }
}

/// Decodes after `prompt` and returns the generated tokens with metrics.
pub fn decode<P: Probability, O: Oracle + ?Sized>(
    prompt: &[TokenId],
    oracle: &mut O,
    static_sam: Option<&SuffixAutomaton<P>>,
    config: &DecodeConfig,
) -> Result<(Vec<TokenId>, DecodeMetrics)> {
    let mut session = Session::new(static_sam, config.clone())?;
    session.prefill(prompt)?;
    session.run(oracle)?;
    Ok((session.output().to_vec(), session.metrics))
}

/// Token-by-token oracle decoding, the reference output for losslessness.
pub fn plain_decode<O: Oracle + ?Sized>(
    prompt: &[TokenId],
    oracle: &mut O,
    max_new_tokens: usize,
) -> Result<Vec<TokenId>> {
    let mut context = prompt.to_vec();
    while context.len() - prompt.len() < max_new_tokens {
        match oracle.next(&context)? {
            Some(t) => context.push(t),
            None => break,
        }
    }
    Ok(context.split_off(prompt.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ReplayOracle;
    use crate::testutil::toks;
    use crate::Sam;

    #[test]
    fn selection_rule() {
        use DraftSource::*;
        let all = [DynamicSam, StaticSam, Auxiliary];
        assert_eq!(select_draft(10, 4, &all, 5, 5), Some(StaticSam));
        assert_eq!(select_draft(0, 8, &all, 5, 5), Some(DynamicSam));
        assert_eq!(select_draft(2, 1, &all, 5, 5), Some(Auxiliary));
        assert_eq!(select_draft(10, 5, &all, 5, 5), Some(DynamicSam));
        assert_eq!(select_draft(10, 4, &[DynamicSam, Auxiliary], 5, 5), Some(Auxiliary));
        assert_eq!(select_draft(0, 0, &[StaticSam], 5, 5), Some(StaticSam));
        assert_eq!(select_draft(3, 3, &[], 0, 0), None);
    }

    #[test]
    fn linear_verification_cases() {
        let mut oracle = ReplayOracle::new(1, toks("BCDEFG"));
        let mut ctx = toks("A");
        let v = verify_linear(&mut oracle, &mut ctx, &toks("BCDEF")).unwrap();
        assert_eq!((v.accepted, v.emitted.len(), v.done), (5, 6, false));
        assert_eq!(ctx, toks("ABCDEFG"));

        let mut ctx = toks("A");
        let v = verify_linear(&mut oracle, &mut ctx, &toks("XCD")).unwrap();
        assert_eq!((v.accepted, v.emitted.clone(), v.done), (0, toks("B"), false));

        let mut oracle = ReplayOracle::new(1, toks("BC"));
        let mut ctx = toks("A");
        let v = verify_linear(&mut oracle, &mut ctx, &toks("BCDE")).unwrap();
        assert_eq!((v.accepted, v.emitted.clone(), v.done), (2, toks("BC"), true));
    }

    #[test]
    fn tree_verification_follows_oracle_branch() {
        let draft: Draft<f64> = Draft {
            tokens: toks("BCDE"),
            parents: vec![None, None, Some(0), Some(1)],
            path_probs: vec![0.67, 0.33, 0.5, 0.3],
            source: DraftSource::StaticSam,
            score: 3,
        };
        let mut oracle = ReplayOracle::new(1, toks("CEZ"));
        let mut ctx = toks("A");
        let v = verify_tree(&mut oracle, &mut ctx, &draft).unwrap();
        assert_eq!((v.accepted, v.emitted.clone()), (2, toks("CEZ")));

        let mut oracle = ReplayOracle::new(1, toks("QQ"));
        let mut ctx = toks("A");
        let v = verify_tree(&mut oracle, &mut ctx, &draft).unwrap();
        assert_eq!((v.accepted, v.emitted.len()), (0, 1));

        let chain: Draft<f64> = Draft::linear(toks("BDX"), DraftSource::StaticSam, 1);
        let mut oracle = ReplayOracle::new(1, toks("BDXY"));
        let mut ctx = toks("A");
        let v = verify_tree(&mut oracle, &mut ctx, &chain).unwrap();
        assert_eq!((v.accepted, v.emitted.len()), (3, 4));
    }

    #[test]
    fn transfer_before_expand_matters() {
        let text = toks("ABCAB");
        // Correct order: the match excludes the token's own occurrence.
        let mut sam = Sam::dynamic();
        let mut cursor = MatchCursor::ROOT;
        for &t in &text {
            cursor = sam.transfer(cursor, t);
            sam.expand(t).unwrap();
            cursor = sam.canonicalize(cursor);
        }
        assert_eq!(cursor.match_len, 2);
        assert_eq!(sam.node(cursor.state).min_endpos(), 2);
        assert_eq!(draft_linear(&sam, cursor, 3).unwrap().tokens, toks("CAB"));

        // Wrong order: every token matches itself and the draft is empty.
        let mut sam = Sam::dynamic();
        let mut cursor = MatchCursor::ROOT;
        for &t in &text {
            sam.expand(t).unwrap();
            cursor = sam.transfer(cursor, t);
        }
        assert_eq!(cursor.match_len, 5);
        assert!(draft_linear(&sam, cursor, 3).is_none());
    }

    #[test]
    fn fallback_only_gives_mat_one() {
        let prompt = toks("abc");
        let target = toks("XYZW");
        let mut oracle = ReplayOracle::new(prompt.len(), target.clone());
        let config = DecodeConfig::default().without_aux();
        let (out, metrics) = decode::<f64, _>(&prompt, &mut oracle, None, &config).unwrap();
        assert_eq!(out, target);
        assert_eq!(metrics.mat(), 1.0);
        assert_eq!(metrics.source(PLAIN).steps, 4);
    }

    #[test]
    fn respects_max_new_tokens() {
        let prompt = toks("ABCDEFGH");
        let mut oracle = ReplayOracle::new(prompt.len(), toks("ABCDEFGH"));
        let config = DecodeConfig {
            max_new_tokens: 5,
            ..DecodeConfig::default()
        };
        let (out, metrics) = decode::<f64, _>(&prompt, &mut oracle, None, &config).unwrap();
        assert_eq!(out, toks("ABCDE"));
        assert_eq!(metrics.total_tokens, 5);
    }

    #[test]
    fn metrics_sum_over_sources() {
        let prompt = toks("the cat sat on the mat. the cat");
        let stream = toks(" sat on the mat. the dog ran off the mat.");
        let mut oracle = ReplayOracle::new(prompt.len(), stream.clone());
        let (out, m) =
            decode::<f64, _>(&prompt, &mut oracle, None, &DecodeConfig::default()).unwrap();
        assert_eq!(out, stream);
        let steps: u64 = m.per_source.values().map(|c| c.steps).sum();
        let tokens: u64 = m.per_source.values().map(|c| c.tokens).sum();
        assert_eq!(steps, m.steps);
        assert_eq!(tokens, m.total_tokens);
        assert!(m.mat() > 1.0);
        assert!(m.to_json()["per_source"]["dynamic_sam"]["mat"].as_f64().unwrap() > 1.0);
    }

    #[test]
    fn rejects_bad_config() {
        let config = DecodeConfig {
            draft_len: 0,
            ..DecodeConfig::default()
        };
        assert!(Session::<f64>::new(None, config).is_err());
    }
}
