use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{bit, bits, CausalError};

/// Directed acyclic graph over named nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    pub nodes: Vec<String>,
    /// `(from, to)` pairs, sorted.
    pub edges: Vec<(String, String)>,
}

impl Dag {
    pub fn new(nodes: Vec<String>, edges: Vec<(String, String)>) -> Result<Self, CausalError> {
        if nodes.iter().collect::<BTreeSet<_>>().len() != nodes.len() {
            return Err(CausalError::Graph("duplicate node names".into()));
        }
        if nodes.len() > 63 {
            return Err(CausalError::Graph("at most 63 nodes are supported".into()));
        }
        let idx = |name: &str| nodes.iter().position(|n| n == name).ok_or_else(|| CausalError::Name(name.into()));
        let mut parents = vec![0u64; nodes.len()];
        for (a, b) in &edges {
            let (i, j) = (idx(a)?, idx(b)?);
            if i == j {
                return Err(CausalError::Graph(format!("self loop at {a}")));
            }
            if parents[j] & bit(i) != 0 || parents[i] & bit(j) != 0 {
                return Err(CausalError::Graph(format!("duplicate edge between {a} and {b}")));
            }
            parents[j] |= bit(i);
        }
        if topological_order(&parents).is_none() {
            return Err(CausalError::Graph("graph has a directed cycle".into()));
        }
        Ok(Self::from_parents(nodes, &parents))
    }

    pub(crate) fn from_parents(nodes: Vec<String>, parents: &[u64]) -> Self {
        let mut edges: Vec<(String, String)> = parents
            .iter()
            .enumerate()
            .flat_map(|(j, &pa)| bits(pa).map(move |i| (i, j)))
            .map(|(i, j)| (nodes[i].clone(), nodes[j].clone()))
            .collect();
        edges.sort();
        Self { nodes, edges }
    }

    pub(crate) fn parent_masks(&self) -> Vec<u64> {
        let mut parents = vec![0u64; self.nodes.len()];
        for (a, b) in &self.edges {
            let i = self.nodes.iter().position(|n| n == a).expect("validated edge");
            let j = self.nodes.iter().position(|n| n == b).expect("validated edge");
            parents[j] |= bit(i);
        }
        parents
    }

    pub fn parents(&self, node: &str) -> BTreeSet<String> {
        self.edges.iter().filter(|(_, b)| b == node).map(|(a, _)| a.clone()).collect()
    }

    pub fn children(&self, node: &str) -> BTreeSet<String> {
        self.edges.iter().filter(|(a, _)| a == node).map(|(_, b)| b.clone()).collect()
    }

    /// Nodes in a topological order.
    pub fn topological_order(&self) -> Vec<String> {
        topological_order(&self.parent_masks())
            .expect("Dag is acyclic by construction")
            .into_iter()
            .map(|i| self.nodes[i].clone())
            .collect()
    }
}

/// Kahn's algorithm over parent masks; `None` on a cycle.
pub(crate) fn topological_order(parents: &[u64]) -> Option<Vec<usize>> {
    let p = parents.len();
    let mut placed = 0u64;
    let mut order = Vec::with_capacity(p);
    while order.len() < p {
        let next = (0..p).find(|&v| placed & bit(v) == 0 && parents[v] & !placed == 0)?;
        placed |= bit(next);
        order.push(next);
    }
    Some(order)
}

/// Parents, children and co-parents of `node`.
pub fn markov_blanket(dag: &Dag, node: &str) -> Result<BTreeSet<String>, CausalError> {
    if !dag.nodes.iter().any(|n| n == node) {
        return Err(CausalError::Name(node.to_string()));
    }
    let mut blanket = dag.parents(node);
    for child in dag.children(node) {
        blanket.extend(dag.parents(&child));
        blanket.insert(child);
    }
    blanket.remove(node);
    Ok(blanket)
}

/// Completed partially directed acyclic graph: a Markov equivalence class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cpdag {
    pub nodes: Vec<String>,
    pub directed: Vec<(String, String)>,
    /// Unordered pairs, each written in node-name order.
    pub undirected: Vec<(String, String)>,
}

impl Cpdag {
    pub fn from_dag(dag: &Dag) -> Self {
        Pdag::cpdag_of(&dag.parent_masks()).to_cpdag(&dag.nodes)
    }

    /// Unordered adjacent pairs, each in node-name order.
    pub fn adjacencies(&self) -> BTreeSet<(String, String)> {
        let ordered = |(a, b): &(String, String)| if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.directed.iter().chain(&self.undirected).map(ordered).collect()
    }

    pub fn is_adjacent(&self, a: &str, b: &str) -> bool {
        let key = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.adjacencies().contains(&key)
    }
}

/// Edge-list text: one `A -> B` or `A -- B` line per edge.
impl fmt::Display for Cpdag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b) in &self.directed {
            writeln!(f, "{a} -> {b}")?;
        }
        for (a, b) in &self.undirected {
            writeln!(f, "{a} -- {b}")?;
        }
        Ok(())
    }
}

/// Partially directed graph on bitmasks. `pa[j]` holds `i` for `i -> j`,
/// `ch[i]` mirrors it, and `und` is symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Pdag {
    pub pa: Vec<u64>,
    pub ch: Vec<u64>,
    pub und: Vec<u64>,
}

impl Pdag {
    pub fn empty(p: usize) -> Self {
        Self { pa: vec![0; p], ch: vec![0; p], und: vec![0; p] }
    }

    pub fn p(&self) -> usize {
        self.pa.len()
    }

    pub fn adj(&self, v: usize) -> u64 {
        self.pa[v] | self.ch[v] | self.und[v]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj(a) & bit(b) != 0
    }

    pub fn add_directed(&mut self, a: usize, b: usize) {
        self.pa[b] |= bit(a);
        self.ch[a] |= bit(b);
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) {
        self.und[a] |= bit(b);
        self.und[b] |= bit(a);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.pa[a] &= !bit(b);
        self.pa[b] &= !bit(a);
        self.ch[a] &= !bit(b);
        self.ch[b] &= !bit(a);
        self.und[a] &= !bit(b);
        self.und[b] &= !bit(a);
    }

    /// Turn `a -- b` into `a -> b`.
    pub fn orient(&mut self, a: usize, b: usize) {
        self.und[a] &= !bit(b);
        self.und[b] &= !bit(a);
        self.add_directed(a, b);
    }

    pub fn is_clique(&self, set: u64) -> bool {
        bits(set).all(|v| set & !bit(v) & !self.adj(v) == 0)
    }

    /// A consistent DAG extension (Dor and Tarsi), as parent masks.
    ///
    /// The highest-index eligible sink is removed first, so undirected
    /// edges end up pointing from earlier to later nodes where possible.
    pub fn extension(&self) -> Option<Vec<u64>> {
        let p = self.p();
        let mut alive: u64 = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
        let mut parents = self.pa.clone();
        while alive != 0 {
            let x = bits(alive)
                .filter(|&x| {
                    if self.ch[x] & alive != 0 {
                        return false;
                    }
                    let adj_x = self.adj(x) & alive;
                    bits(self.und[x] & alive).all(|y| adj_x & !bit(y) & !self.adj(y) == 0)
                })
                .last()?;
            parents[x] |= self.und[x] & alive;
            alive &= !bit(x);
        }
        Some(parents)
    }

    /// Equivalence class of the DAG given by `parents`.
    pub fn cpdag_of(parents: &[u64]) -> Self {
        let p = parents.len();
        let mut g = Self::empty(p);
        let adj = |a: usize, b: usize| parents[a] & bit(b) != 0 || parents[b] & bit(a) != 0;
        let mut compelled = vec![0u64; p];
        for c in 0..p {
            for a in bits(parents[c]) {
                if bits(parents[c]).any(|b| b != a && !adj(a, b)) {
                    compelled[c] |= bit(a);
                }
            }
        }
        for c in 0..p {
            for a in bits(parents[c]) {
                if compelled[c] & bit(a) != 0 {
                    g.add_directed(a, c);
                } else {
                    g.add_undirected(a, c);
                }
            }
        }
        g.meek_closure();
        g
    }

    /// Apply Meek rules R1-R4 until nothing changes.
    pub fn meek_closure(&mut self) {
        loop {
            let mut changed = false;
            for a in 0..self.p() {
                for b in bits(self.und[a]) {
                    if self.meek_orients(a, b) {
                        self.orient(a, b);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn meek_orients(&self, a: usize, b: usize) -> bool {
        // R1: c -> a -- b, c and b non-adjacent
        if bits(self.pa[a]).any(|c| !self.adjacent(c, b)) {
            return true;
        }
        // R2: a -> c -> b
        if self.ch[a] & self.pa[b] != 0 {
            return true;
        }
        // R3: a -- c -> b, a -- d -> b, c and d non-adjacent
        let mids = self.und[a] & self.pa[b];
        if bits(mids).any(|c| bits(mids).any(|d| c != d && !self.adjacent(c, d))) {
            return true;
        }
        // R4: a -- c -> d -> b, a adjacent to d, c and b non-adjacent
        bits(self.und[a])
            .any(|c| c != b && !self.adjacent(c, b) && bits(self.ch[c] & self.pa[b] & self.adj(a)).next().is_some())
    }

    pub fn to_cpdag(&self, nodes: &[String]) -> Cpdag {
        let mut directed = Vec::new();
        let mut undirected = Vec::new();
        for a in 0..self.p() {
            for b in bits(self.ch[a]) {
                directed.push((nodes[a].clone(), nodes[b].clone()));
            }
            for b in bits(self.und[a]) {
                if nodes[a] < nodes[b] {
                    undirected.push((nodes[a].clone(), nodes[b].clone()));
                }
            }
        }
        directed.sort();
        undirected.sort();
        Cpdag { nodes: nodes.to_vec(), directed, undirected }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(edges: &[(&str, &str)], nodes: &[&str]) -> Dag {
        Dag::new(
            nodes.iter().map(|s| s.to_string()).collect(),
            edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn chain_model_blankets() {
        let g = dag(&[("eda_magnitude", "se"), ("se", "sq")], &["eda_magnitude", "eda_storms", "se", "sq"]);
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(markov_blanket(&g, "sq").unwrap(), names(&["se"]));
        assert_eq!(markov_blanket(&g, "se").unwrap(), names(&["eda_magnitude", "sq"]));
        assert!(markov_blanket(&g, "eda_storms").unwrap().is_empty());
        assert_eq!(markov_blanket(&g, "nope"), Err(CausalError::Name("nope".into())));
        // symmetry on this collider-free graph
        for u in &g.nodes {
            for v in markov_blanket(&g, u).unwrap() {
                assert!(markov_blanket(&g, &v).unwrap().contains(u));
            }
        }
    }

    #[test]
    fn co_parents_are_in_the_blanket() {
        let g = dag(&[("a", "c"), ("b", "c")], &["a", "b", "c"]);
        assert!(markov_blanket(&g, "a").unwrap().contains("b"));
    }

    #[test]
    fn cycles_are_rejected() {
        let err = Dag::new(vec!["a".into(), "b".into()], vec![("a".into(), "b".into()), ("b".into(), "a".into())])
            .unwrap_err();
        assert!(matches!(err, CausalError::Graph(_)));
    }

    #[test]
    fn chain_is_undirected_collider_is_not() {
        let chain = Cpdag::from_dag(&dag(&[("a", "b"), ("b", "c")], &["a", "b", "c"]));
        assert!(chain.directed.is_empty());
        assert_eq!(chain.undirected.len(), 2);
        let collider = Cpdag::from_dag(&dag(&[("a", "c"), ("b", "c")], &["a", "b", "c"]));
        assert_eq!(collider.directed, vec![("a".into(), "c".into()), ("b".into(), "c".into())]);
        assert_eq!(collider.to_string(), "a -> c\nb -> c\n");
    }

    #[test]
    fn meek_r1_propagates_below_a_collider() {
        let g = Cpdag::from_dag(&dag(&[("a", "c"), ("b", "c"), ("c", "d")], &["a", "b", "c", "d"]));
        assert!(g.directed.contains(&("c".into(), "d".into())));
        assert!(g.undirected.is_empty());
    }

    #[test]
    fn extension_round_trips_the_class() {
        let d = dag(&[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("d", "e")], &["a", "b", "c", "d", "e"]);
        let masks = d.parent_masks();
        let cp = Pdag::cpdag_of(&masks);
        let ext = cp.extension().unwrap();
        assert!(topological_order(&ext).is_some());
        assert_eq!(Pdag::cpdag_of(&ext), cp);
        // closure is idempotent
        let mut again = cp.clone();
        again.meek_closure();
        assert_eq!(again, cp);
    }
}
