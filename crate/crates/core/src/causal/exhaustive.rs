use serde::{Deserialize, Serialize};

use super::graph::topological_order;
use super::{bit, CausalError, CgScorer, Dag, MixedDataset, ScoreConfig};
use crate::exec::Exec;

pub const MAX_EXHAUSTIVE_COLUMNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub dag: Dag,
    pub score: f64,
    /// Number of acyclic graphs scored.
    pub dags_visited: usize,
}

/// All labeled DAGs on `p` nodes as parent masks, in a fixed order.
pub(crate) fn all_dags(p: usize) -> Vec<Vec<u64>> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut parents = vec![0u64; p];
        let mut c = code;
        for &(i, j) in &pairs {
            match c % 3 {
                1 => parents[j] |= bit(i),
                2 => parents[i] |= bit(j),
                _ => {}
            }
            c /= 3;
        }
        if topological_order(&parents).is_some() {
            out.push(parents);
        }
    }
    out
}

/// Score every DAG over the columns and return the best.
pub fn exhaustive_search(
    data: &MixedDataset,
    config: &ScoreConfig,
    exec: Exec,
) -> Result<ExhaustiveResult, CausalError> {
    if data.p() > MAX_EXHAUSTIVE_COLUMNS {
        return Err(CausalError::TooLarge { got: data.p(), max: MAX_EXHAUSTIVE_COLUMNS });
    }
    let scorer = CgScorer::new(data, *config)?;
    let dags = all_dags(data.p());
    let scores = exec.map(&dags, |pa| scorer.dag_score(pa));
    let mut best: Option<(f64, usize)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        let s = s?;
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, i));
        }
    }
    let (score, idx) = best.expect("at least the empty graph");
    Ok(ExhaustiveResult { dag: Dag::from_parents(data.names().to_vec(), &dags[idx]), score, dags_visited: dags.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::Column;

    #[test]
    fn labeled_dag_counts() {
        let counts: Vec<usize> = (1..=5).map(|p| all_dags(p).len()).collect();
        assert_eq!(counts, vec![1, 3, 25, 543, 29281]);
    }

    #[test]
    fn single_column_is_marginal() {
        let d = MixedDataset::new(vec!["sq".into()], vec![Column::Discrete(vec![1, 1, 1, 0])]).unwrap();
        let r = exhaustive_search(&d, &ScoreConfig::default(), Exec::Sequential).unwrap();
        assert!(r.dag.edges.is_empty());
        assert_eq!(r.dags_visited, 1);
        let expected = 3.0 * 0.75f64.ln() + 0.25f64.ln() - 0.5 * 4f64.ln();
        assert!((r.score - expected).abs() < 1e-12);
    }

    #[test]
    fn too_many_columns() {
        let names: Vec<String> = (0..6).map(|i| format!("c{i}")).collect();
        let cols = (0..6).map(|i| Column::Continuous(vec![i as f64, 1.0, 0.0])).collect();
        let d = MixedDataset::new(names, cols).unwrap();
        assert_eq!(
            exhaustive_search(&d, &ScoreConfig::default(), Exec::Sequential).unwrap_err(),
            CausalError::TooLarge { got: 6, max: 5 }
        );
    }
}
