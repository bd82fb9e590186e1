//! Greedy equivalence search.
//!
//! Forward phase: apply the best-scoring valid Insert(X, Y, T) while its
//! gain is positive. Backward phase: the same with Delete(X, Y, H). After
//! each operator the graph is re-completed by taking a DAG extension and
//! rebuilding its CPDAG. Candidates are scanned in node-name order and a
//! later candidate replaces the incumbent only on a strictly larger gain.

use serde::{Deserialize, Serialize};

use super::graph::Pdag;
use super::{bit, bits, CausalError, CgScorer, Cpdag, Dag, MixedDataset, ScoreConfig};
use crate::exec::Exec;

/// Gains at or below this are treated as no improvement.
const GAIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub cpdag: Cpdag,
    /// A deterministic member of the returned class.
    pub dag: Dag,
    pub score: f64,
    pub inserts: usize,
    pub deletes: usize,
    pub pooled_fallback_used: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    x: usize,
    y: usize,
    /// T for inserts, H for deletes.
    set: u64,
    with_x: u64,
    without_x: u64,
}

pub fn fgs_search(data: &MixedDataset, config: &ScoreConfig, exec: Exec) -> Result<SearchResult, CausalError> {
    if data.p() < 2 {
        return Err(CausalError::Validation("search needs at least 2 columns".into()));
    }
    if data.n() < 10 {
        return Err(CausalError::Validation("search needs at least 10 rows".into()));
    }
    let scorer = CgScorer::new(data, *config)?;
    let p = data.p();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| data.names()[a].cmp(&data.names()[b]));

    let mut g = Pdag::empty(p);
    let mut inserts = 0;
    let mut deletes = 0;
    loop {
        let mut changed = false;
        while let Some(c) = best(&scorer, &insert_candidates(&g, &order), exec, true)? {
            g.add_directed(c.x, c.y);
            for t in bits(c.set) {
                g.orient(t, c.y);
            }
            g = complete(&g)?;
            inserts += 1;
            changed = true;
        }
        while let Some(c) = best(&scorer, &delete_candidates(&g, &order), exec, false)? {
            g.remove_edge(c.x, c.y);
            for h in bits(c.set) {
                g.orient(c.y, h);
                if g.und[c.x] & bit(h) != 0 {
                    g.orient(c.x, h);
                }
            }
            g = complete(&g)?;
            deletes += 1;
            changed = true;
        }
        if !changed {
            break;
        }
        // a delete can open a new improving insert; repeat until stable
        if best(&scorer, &insert_candidates(&g, &order), exec, true)?.is_none() {
            break;
        }
    }

    let parents = g.extension().ok_or_else(|| CausalError::Numerical("no consistent extension".into()))?;
    let score = scorer.dag_score(&parents)?;
    let nodes = data.names().to_vec();
    Ok(SearchResult {
        cpdag: g.to_cpdag(&nodes),
        dag: Dag::from_parents(nodes, &parents),
        score,
        inserts,
        deletes,
        pooled_fallback_used: scorer.pooled_fallback_used(),
    })
}

fn complete(g: &Pdag) -> Result<Pdag, CausalError> {
    let parents =
        g.extension().ok_or_else(|| CausalError::Numerical("operator produced a graph with no extension".into()))?;
    Ok(Pdag::cpdag_of(&parents))
}

/// Best candidate with positive gain, first in scan order among ties.
fn best(
    scorer: &CgScorer,
    candidates: &[Candidate],
    exec: Exec,
    insert: bool,
) -> Result<Option<Candidate>, CausalError> {
    let gains = exec.map(candidates, |c| -> Result<f64, CausalError> {
        let with = scorer.local(c.y, c.with_x)?;
        let without = scorer.local(c.y, c.without_x)?;
        Ok(if insert { with - without } else { without - with })
    });
    let mut top: Option<(f64, Candidate)> = None;
    for (c, gain) in candidates.iter().zip(gains) {
        let gain = gain?;
        if gain > GAIN_TOL && top.is_none_or(|(g, _)| gain > g + GAIN_TOL) {
            top = Some((gain, *c));
        }
    }
    Ok(top.map(|(_, c)| c))
}

fn subsets(mask: u64) -> impl Iterator<Item = u64> {
    // ascending enumeration of all submasks, starting from the empty set
    let mut next = Some(0u64);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some(((cur | !mask).wrapping_add(1)) & mask) };
        Some(cur)
    })
}

fn insert_candidates(g: &Pdag, order: &[usize]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &x in order {
        for &y in order {
            if x == y || g.adjacent(x, y) {
                continue;
            }
            let na = g.und[y] & g.adj(x);
            let t0 = g.und[y] & !g.adj(x) & !bit(x);
            for t in subsets(t0) {
                let s = na | t;
                if !g.is_clique(s) || semi_directed_path(g, y, x, s) {
                    continue;
                }
                let base = s | g.pa[y];
                out.push(Candidate { x, y, set: t, with_x: base | bit(x), without_x: base });
            }
        }
    }
    out
}

fn delete_candidates(g: &Pdag, order: &[usize]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &x in order {
        for &y in order {
            if g.pa[y] & bit(x) == 0 && g.und[y] & bit(x) == 0 {
                continue;
            }
            let na = g.und[y] & g.adj(x);
            for h in subsets(na) {
                let rest = na & !h;
                if !g.is_clique(rest) {
                    continue;
                }
                let base = (rest | g.pa[y]) & !bit(x);
                out.push(Candidate { x, y, set: h, with_x: base | bit(x), without_x: base });
            }
        }
    }
    out
}

/// Is there a path from `from` to `to` using only `a -> b` and `a -- b`
/// steps that avoids `blocked`?
fn semi_directed_path(g: &Pdag, from: usize, to: usize, blocked: u64) -> bool {
    let mut seen = bit(from);
    let mut frontier = vec![from];
    while let Some(v) = frontier.pop() {
        let next = (g.ch[v] | g.und[v]) & !seen & !blocked;
        if next & bit(to) != 0 {
            return true;
        }
        seen |= next;
        frontier.extend(bits(next));
    }
    false
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::causal::Column;

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn dataset(cols: Vec<(&str, Vec<f64>)>) -> MixedDataset {
        let (names, columns): (Vec<_>, Vec<_>) =
            cols.into_iter().map(|(n, c)| (n.to_string(), Column::Continuous(c))).unzip();
        MixedDataset::new(names, columns).unwrap()
    }

    #[test]
    fn subsets_enumerates_all() {
        let all: Vec<u64> = subsets(0b1010).collect();
        assert_eq!(all, vec![0, 0b10, 0b1000, 0b1010]);
        assert_eq!(subsets(0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn independent_columns_give_empty_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = dataset(vec![("x", normals(&mut rng, 1000)), ("y", normals(&mut rng, 1000))]);
        let r = fgs_search(&d, &ScoreConfig::default(), Exec::Sequential).unwrap();
        assert!(r.cpdag.directed.is_empty() && r.cpdag.undirected.is_empty());
    }

    #[test]
    fn two_node_dependence_is_unoriented() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = normals(&mut rng, 1000);
        let y: Vec<f64> = x.iter().zip(normals(&mut rng, 1000)).map(|(a, e)| a + 0.3 * e).collect();
        let r = fgs_search(&dataset(vec![("x", x), ("y", y)]), &ScoreConfig::default(), Exec::Parallel).unwrap();
        assert!(r.cpdag.directed.is_empty());
        assert_eq!(r.cpdag.undirected, vec![("x".to_string(), "y".to_string())]);
    }

    #[test]
    fn collider_is_oriented() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = normals(&mut rng, 2000);
        let y = normals(&mut rng, 2000);
        let e = normals(&mut rng, 2000);
        let z: Vec<f64> = (0..2000).map(|i| x[i] + y[i] + 0.5 * e[i]).collect();
        let r = fgs_search(&dataset(vec![("x", x), ("y", y), ("z", z)]), &ScoreConfig::default(), Exec::Sequential)
            .unwrap();
        assert_eq!(r.cpdag.directed, vec![("x".to_string(), "z".to_string()), ("y".to_string(), "z".to_string())]);
        assert!(r.cpdag.undirected.is_empty());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = normals(&mut rng, 300);
        let b: Vec<f64> = a.iter().zip(normals(&mut rng, 300)).map(|(a, e)| 0.7 * a + e).collect();
        let c: Vec<f64> = b.iter().zip(normals(&mut rng, 300)).map(|(b, e)| 0.5 * b + e).collect();
        let d = dataset(vec![("c", c), ("a", a), ("b", b)]);
        let s = fgs_search(&d, &ScoreConfig::default(), Exec::Sequential).unwrap();
        let p = fgs_search(&d, &ScoreConfig::default(), Exec::Parallel).unwrap();
        assert_eq!(s, p);
    }
}
