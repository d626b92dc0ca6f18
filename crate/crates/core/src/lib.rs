//! Model-free speculative drafting with suffix automatons.
//!
//! A static automaton indexes an offline corpus and a dynamic one indexes the
//! running context (prompt plus generated tokens). At every decoding step the
//! exact longest suffix match in each automaton yields a candidate draft; an
//! auxiliary recency-based drafter covers the cases where retrieval has
//! nothing to offer. The selected draft is greedily verified against an
//! [`Oracle`](oracle::Oracle) standing in for the target model.
//!
//! The automaton is generic over the probability scalar used for top-k
//! transition probabilities; see the aliases below.

pub mod baselines;
pub mod bench;
pub mod corpus;
pub mod decode;
pub mod draft;
pub mod error;
pub mod oracle;
pub mod prob;
pub mod recycle;
pub mod sam;
pub mod serialize;

#[cfg(test)]
mod testutil;

pub use decode::{decode, DecodeConfig, DecodeMetrics, StepOutcome};
pub use draft::{Draft, DraftSource};
pub use error::{Error, Result};
pub use prob::Probability;
pub use recycle::RecycleTable;
pub use sam::{Flavor, MatchCursor, NodeId, SamNode, SuffixAutomaton, TokenId, TransferStats};

/// Automaton with `f64` transition probabilities; the on-disk representation.
pub type Sam = SuffixAutomaton<f64>;
/// Automaton with `f32` transition probabilities.
pub type SamF32 = SuffixAutomaton<f32>;
/// Automaton with exact rational transition probabilities.
pub type ExactSam = SuffixAutomaton<num_rational::Ratio<u64>>;
