//! Instrumented experiments: transfer cost per token across matchers and
//! reference sizes, and MAT / draft-source breakdowns on synthetic decoding
//! tasks.
//!
//! Work counters are deterministic for a given seed; wall times are not.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::{ngram_match_brute_counted, SuffixArray};
use crate::decode::{plain_decode, DecodeConfig, DecodeMetrics, Session, PLAIN};
use crate::draft::DraftSource;
use crate::error::{Error, Result};
use crate::oracle::{NgramOracle, Oracle, ReplayOracle};
use crate::sam::{MatchCursor, TokenId, TransferStats};
use crate::Sam;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Sam,
    NgramBrute,
    SuffixArray,
}

impl Matcher {
    pub const ALL: [Matcher; 3] = [Matcher::Sam, Matcher::NgramBrute, Matcher::SuffixArray];

    pub fn name(self) -> &'static str {
        match self {
            Matcher::Sam => "sam",
            Matcher::NgramBrute => "ngram_brute",
            Matcher::SuffixArray => "suffix_array",
        }
    }
}

impl std::str::FromStr for Matcher {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Matcher::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown matcher {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct TransferBenchConfig {
    /// Reference lengths `L`.
    pub sizes: Vec<usize>,
    /// Query stream length; `None` uses `L` for each size.
    pub stream_len: Option<usize>,
    pub matchers: Vec<Matcher>,
    /// Query positions sampled for the non-automaton matchers.
    pub samples: usize,
    /// n-gram cap for the n-gram and suffix-array matchers.
    pub max_n: usize,
    pub seed: u64,
}

impl Default for TransferBenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1_000, 10_000, 100_000],
            stream_len: None,
            matchers: Matcher::ALL.to_vec(),
            samples: 64,
            max_n: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferRow {
    pub matcher: Matcher,
    pub reference_len: usize,
    pub stream_len: usize,
    /// Queries actually measured (every stream token for the automaton).
    pub queries: usize,
    pub work: u64,
    pub work_per_token: f64,
    /// Non-deterministic.
    pub wall_ms: f64,
    /// Automaton only: total basic steps <= 2 x stream length.
    pub bound_ok: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TransferReport {
    pub seed: u64,
    pub rows: Vec<TransferRow>,
}

impl TransferReport {
    pub fn row(&self, matcher: Matcher, reference_len: usize) -> Option<&TransferRow> {
        self.rows
            .iter()
            .find(|r| r.matcher == matcher && r.reference_len == reference_len)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<13} {:>9} {:>9} {:>8} {:>14} {:>12} {:>10} {:>6}\n",
            "matcher", "ref_len", "stream", "queries", "work", "work/token", "wall_ms", "bound"
        );
        for r in &self.rows {
            let bound = match r.bound_ok {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "-",
            };
            let _ = writeln!(
                out,
                "{:<13} {:>9} {:>9} {:>8} {:>14} {:>12.3} {:>10.2} {:>6}",
                r.matcher.name(),
                r.reference_len,
                r.stream_len,
                r.queries,
                r.work,
                r.work_per_token,
                r.wall_ms,
                bound
            );
        }
        out
    }
}

/// Synthetic text with heavy local repetition: spans copied from the recent
/// window interleaved with runs of fresh random tokens.
pub fn repetitive_text(len: usize, alphabet: u32, rng: &mut impl Rng) -> Vec<TokenId> {
    const WINDOW: usize = 2_000;
    let mut out = Vec::with_capacity(len + 64);
    while out.len() < len {
        if out.len() > 64 && rng.random_bool(0.5) {
            let span = rng.random_range(8..64);
            // Overlapping copies are fine: the source is extended as we go.
            let start = rng.random_range(out.len().saturating_sub(WINDOW)..out.len());
            for i in 0..span {
                out.push(out[start + i]);
            }
        } else {
            let run = rng.random_range(8..32);
            out.extend((0..run).map(|_| TokenId(rng.random_range(0..alphabet))));
        }
    }
    out.truncate(len);
    out
}

pub fn random_tokens(len: usize, lo: u32, hi: u32, rng: &mut impl Rng) -> Vec<TokenId> {
    (0..len).map(|_| TokenId(rng.random_range(lo..hi))).collect()
}

fn elapsed_ms(started: Instant) -> f64 {
    started.elapsed().as_secs_f64() * 1e3
}

fn sample_positions(stream_len: usize, samples: usize) -> Vec<usize> {
    let n = samples.min(stream_len);
    (1..=n).map(|i| i * stream_len / n).collect()
}

/// Measures per-token matching work.
///
/// For each size `L` a repetitive text is split into a reference of length
/// `L` and a continuation stream. The automaton is built over the reference
/// and the whole stream is transferred through it. The n-gram matcher
/// searches the reference plus the stream prefix for the earliest earlier
/// occurrence of the latest n-gram; the suffix-array matcher searches the
/// reference. Both are measured at evenly spaced stream positions.
pub fn run_transfer_bench(config: &TransferBenchConfig) -> TransferReport {
    let mut report = TransferReport {
        seed: config.seed,
        rows: Vec::new(),
    };
    for &size in &config.sizes {
        let stream_len = config.stream_len.unwrap_or(size);
        if stream_len == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ size as u64);
        let full = repetitive_text(size + stream_len, 512, &mut rng);
        let (reference, stream) = full.split_at(size);
        let positions = sample_positions(stream_len, config.samples);

        for &matcher in &config.matchers {
            // Index construction is excluded from the timings.
            let (queries, work, bound_ok, wall_ms) = match matcher {
                Matcher::Sam => {
                    let sam = Sam::build(reference);
                    let started = Instant::now();
                    let mut stats = TransferStats::default();
                    let mut cursor = MatchCursor::ROOT;
                    for &t in stream {
                        cursor = sam.transfer_counted(cursor, t, &mut stats);
                    }
                    let ok = stats.steps() <= 2 * stream_len as u64;
                    (stream_len, stats.steps(), Some(ok), elapsed_ms(started))
                }
                Matcher::NgramBrute => {
                    let started = Instant::now();
                    let work = positions
                        .iter()
                        .map(|&j| ngram_match_brute_counted(&full[..size + j], config.max_n, 1).comparisons)
                        .sum();
                    (positions.len(), work, None, elapsed_ms(started))
                }
                Matcher::SuffixArray => {
                    let sa = SuffixArray::build(reference);
                    let started = Instant::now();
                    let mut work = 0;
                    for &j in &positions {
                        sa.longest_suffix_match_counted(&stream[..j], config.max_n, &mut work);
                    }
                    (positions.len(), work, None, elapsed_ms(started))
                }
            };
            report.rows.push(TransferRow {
                matcher,
                reference_len: size,
                stream_len,
                queries,
                work,
                work_per_token: work as f64 / queries as f64,
                wall_ms,
                bound_ok,
            });
        }
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// The prompt embeds a passage that the oracle then repeats verbatim.
    Copy,
    /// A k-gram lookup model trained on the static corpus.
    LookupLm,
    /// Copied passages interleaved with novel spans.
    Mixed,
    /// Small-alphabet random text sharing nothing with the corpus.
    Novel,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Copy, Task::LookupLm, Task::Mixed, Task::Novel];

    pub fn name(self) -> &'static str {
        match self {
            Task::Copy => "copy",
            Task::LookupLm => "lookup_lm",
            Task::Mixed => "mixed",
            Task::Novel => "novel",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

/// A self-contained decoding workload.
pub struct TaskSetup {
    pub prompt: Vec<TokenId>,
    pub static_sam: Option<Sam>,
    pub oracle: Box<dyn Oracle + Send>,
    pub max_new_tokens: usize,
}

/// Corpus tokens live in `[CORPUS_BASE, CORPUS_BASE + 1000)`; passage and
/// novel tokens stay below it.
const CORPUS_BASE: u32 = 10_000;
const SEPARATOR: TokenId = TokenId(u32::MAX - 1);

/// Length of the passage in the copy task.
pub const COPY_PASSAGE_LEN: usize = 400;

/// Sparse random Markov chain over the corpus alphabet.
fn markov_corpus(docs: usize, doc_len: usize, rng: &mut impl Rng) -> Vec<Vec<TokenId>> {
    let vocab = 200u32;
    let successors: Vec<Vec<u32>> = (0..vocab)
        .map(|_| (0..3).map(|_| rng.random_range(0..vocab)).collect())
        .collect();
    (0..docs)
        .map(|_| {
            let mut t = rng.random_range(0..vocab);
            (0..doc_len)
                .map(|_| {
                    let tok = TokenId(CORPUS_BASE + t);
                    let row = &successors[t as usize];
                    t = row[rng.random_range(0..row.len())];
                    tok
                })
                .collect()
        })
        .collect()
}

fn frozen_corpus_sam(docs: &[Vec<TokenId>]) -> Sam {
    let mut sam = Sam::build_corpus(docs, SEPARATOR).expect("separator is never generated");
    sam.init_topk(crate::decode::DEFAULT_TOPK).expect("fresh static automaton");
    sam
}

pub fn task_setup(task: Task, seed: u64) -> TaskSetup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(task as u64));
    let corpus = markov_corpus(40, 200, &mut rng);
    match task {
        Task::Copy => {
            let passage = random_tokens(COPY_PASSAGE_LEN, 0, 1000, &mut rng);
            let mut prompt = random_tokens(50, 0, 1000, &mut rng);
            prompt.extend_from_slice(&passage);
            prompt.extend(random_tokens(20, 0, 1000, &mut rng));
            TaskSetup {
                oracle: Box::new(ReplayOracle::new(prompt.len(), passage)),
                prompt,
                static_sam: Some(frozen_corpus_sam(&corpus)),
                max_new_tokens: COPY_PASSAGE_LEN,
            }
        }
        Task::LookupLm => {
            let oracle = NgramOracle::train(3, &corpus, Some(SEPARATOR));
            let prompt = corpus[0][..16].to_vec();
            TaskSetup {
                oracle: Box::new(oracle),
                prompt,
                static_sam: Some(frozen_corpus_sam(&corpus)),
                max_new_tokens: 400,
            }
        }
        Task::Mixed => {
            let passage = random_tokens(200, 0, 1000, &mut rng);
            let mut prompt = random_tokens(30, 0, 1000, &mut rng);
            prompt.extend_from_slice(&passage);
            let mut target = Vec::new();
            for chunk in passage.chunks(50) {
                target.extend_from_slice(chunk);
                target.extend(random_tokens(25, 0, 1000, &mut rng));
                let doc = &corpus[rng.random_range(0..corpus.len())];
                let at = rng.random_range(0..doc.len() - 30);
                target.extend_from_slice(&doc[at..at + 30]);
            }
            TaskSetup {
                max_new_tokens: target.len(),
                oracle: Box::new(ReplayOracle::new(prompt.len(), target)),
                prompt,
                static_sam: Some(frozen_corpus_sam(&corpus)),
            }
        }
        Task::Novel => {
            let prompt = random_tokens(64, 2000, 2032, &mut rng);
            let target = random_tokens(400, 2000, 2032, &mut rng);
            TaskSetup {
                max_new_tokens: target.len(),
                oracle: Box::new(ReplayOracle::new(prompt.len(), target)),
                prompt,
                static_sam: Some(frozen_corpus_sam(&corpus)),
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SourceRow {
    pub steps: u64,
    pub share: f64,
    pub mat: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskReport {
    pub task: Task,
    pub steps: u64,
    pub tokens: u64,
    pub mat: f64,
    pub per_source: BTreeMap<String, SourceRow>,
    /// Output matched plain token-by-token decoding.
    pub lossless: bool,
    #[serde(skip)]
    pub metrics: DecodeMetrics,
}

impl TaskReport {
    pub fn share(&self, source: DraftSource) -> f64 {
        self.metrics.share(source.name())
    }

    pub fn source_mat(&self, source: DraftSource) -> f64 {
        self.metrics.source(source.name()).mat()
    }
}

/// Runs one task with `config` (its `max_new_tokens` is replaced by the
/// task's own budget).
pub fn run_task(task: Task, seed: u64, config: &DecodeConfig) -> Result<TaskReport> {
    let mut setup = task_setup(task, seed);
    let config = DecodeConfig {
        max_new_tokens: setup.max_new_tokens,
        ..config.clone()
    };
    let mut session = Session::new(setup.static_sam.as_ref(), config)?;
    session.prefill(&setup.prompt)?;
    session.run(setup.oracle.as_mut())?;
    let output = session.output().to_vec();
    let metrics = session.metrics().clone();

    let mut fresh = task_setup(task, seed);
    let reference = plain_decode(&fresh.prompt, fresh.oracle.as_mut(), fresh.max_new_tokens)?;

    let names = DraftSource::ALL.iter().map(|s| s.name()).chain([PLAIN]);
    let per_source = names
        .map(|name| {
            let c = metrics.source(name);
            (
                name.to_string(),
                SourceRow {
                    steps: c.steps,
                    share: metrics.share(name),
                    mat: c.mat(),
                },
            )
        })
        .collect();
    Ok(TaskReport {
        task,
        steps: metrics.steps,
        tokens: metrics.total_tokens,
        mat: metrics.mat(),
        per_source,
        lossless: output == reference,
        metrics,
    })
}

pub fn run_decode_suite(tasks: &[Task], seed: u64, config: &DecodeConfig) -> Result<Vec<TaskReport>> {
    tasks.iter().map(|&t| run_task(t, seed, config)).collect()
}

pub fn decode_suite_text(reports: &[TaskReport]) -> String {
    let sources: Vec<&str> = DraftSource::ALL.iter().map(|s| s.name()).chain([PLAIN]).collect();
    let mut out = format!("{:<10} {:>6} {:>7} {:>7} {:>8}", "task", "steps", "tokens", "mat", "lossless");
    for s in &sources {
        let _ = write!(out, " {:>18}", format!("{s} %/mat"));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(
            out,
            "{:<10} {:>6} {:>7} {:>7.2} {:>8}",
            r.task.name(),
            r.steps,
            r.tokens,
            r.mat,
            r.lossless
        );
        for s in &sources {
            let row = &r.per_source[*s];
            let _ = write!(out, " {:>18}", format!("{:.1}/{:.2}", row.share * 100.0, row.mat));
        }
        out.push('\n');
    }
    out
}
