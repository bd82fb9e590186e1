//! Score-based structure search over mixed continuous/discrete data.
//!
//! The search is a two-phase greedy equivalence search (insert, then
//! delete) scored by a conditional-Gaussian BIC. An exhaustive enumerator
//! over small DAG spaces is provided as an oracle.

mod dataset;
mod exhaustive;
mod graph;
mod score;
mod search;

pub use dataset::{Column, MixedDataset};
pub use exhaustive::{exhaustive_search, ExhaustiveResult, MAX_EXHAUSTIVE_COLUMNS};
pub use graph::{markov_blanket, Cpdag, Dag};
pub use score::{cg_local_score, CgScorer, ScoreConfig};
pub use search::{fgs_search, SearchResult};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CausalError {
    #[error("invalid dataset: {0}")]
    Validation(String),
    #[error("invalid score configuration: {0}")]
    Config(String),
    #[error("cell {cell} of {{{columns}}} has {count} rows; at least {needed} needed")]
    DegenerateCell { columns: String, cell: String, count: usize, needed: usize },
    #[error("exhaustive search supports at most {max} columns, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error("unknown node {0}")]
    Name(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub(crate) fn bits(mask: u64) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

pub(crate) const fn bit(i: usize) -> u64 {
    1u64 << i
}
