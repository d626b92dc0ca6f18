//! Auxiliary drafter: a per-token adjacency of recently observed successors,
//! drafted as a fixed-shape tree by breadth-first expansion.
//!
//! Rows are recency ordered, not probability estimates.

use std::collections::HashMap;

use crate::draft::{Draft, DraftSource};
use crate::sam::TokenId;

pub const DEFAULT_SHAPE: [usize; 5] = [4, 2, 2, 1, 1];

#[derive(Clone, Debug)]
pub struct RecycleTable {
    adjacency: HashMap<TokenId, Vec<TokenId>>,
    k: usize,
}

impl RecycleTable {
    pub fn new(k: usize) -> Self {
        assert!(k > 0, "row capacity must be positive");
        Self {
            adjacency: HashMap::new(),
            k,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, t: TokenId) -> &[TokenId] {
        self.adjacency.get(&t).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Promotes `b` to the front of `a`'s row for every adjacent pair `(a, b)`.
    pub fn observe(&mut self, context: &[TokenId]) {
        for pair in context.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let row = self.adjacency.entry(a).or_default();
            if let Some(i) = row.iter().position(|&t| t == b) {
                row.remove(i);
            }
            row.insert(0, b);
            row.truncate(self.k);
        }
    }

    /// Level-order tree from `last_token`; node at depth `d` gets up to
    /// `shape[d]` children taken from the front of its row.
    pub fn draft_bfs<P>(&self, last_token: TokenId, shape: &[usize]) -> Option<Draft<P>> {
        let mut tokens = Vec::new();
        let mut parents = Vec::new();
        let mut frontier: Vec<(Option<usize>, TokenId)> = vec![(None, last_token)];
        for &branching in shape {
            let mut next = Vec::new();
            for &(slot, token) in &frontier {
                for &child in self.row(token).iter().take(branching) {
                    let id = tokens.len();
                    tokens.push(child);
                    parents.push(slot);
                    next.push((Some(id), child));
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        if tokens.is_empty() {
            return None;
        }
        Some(Draft {
            tokens,
            parents,
            path_probs: Vec::new(),
            source: DraftSource::Auxiliary,
            score: 0,
        })
    }
}

/// Node budget of a tree template: sum over levels of the branching product.
pub fn template_size(shape: &[usize]) -> usize {
    shape
        .iter()
        .scan(1usize, |width, &b| {
            *width *= b;
            Some(*width)
        })
        .sum()
}
