//! Conditional-Gaussian BIC.
//!
//! `J(S)` partitions rows by the joint configuration of the discrete
//! columns in `S` and fits a Gaussian with its own mean and covariance to
//! the continuous columns of `S` in every cell. The local score of a child
//! given parents is `J(pa + child) - J(pa)`, which makes the total score of
//! a DAG telescope to a function of its equivalence class.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::RwLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{bit, bits, CausalError, Column, MixedDataset};
use crate::linalg::logdet_spd;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    /// Structure prior weight. A value of 1 adds no prior term; other
    /// values are rejected until a prior form is settled.
    pub structure_prior: f64,
    pub penalty_discount: f64,
    /// Score degenerate cells with a covariance pooled across cells
    /// instead of failing.
    pub pooled_fallback: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { structure_prior: 1.0, penalty_discount: 1.0, pooled_fallback: false }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), CausalError> {
        if !(self.structure_prior > 0.0 && self.structure_prior.is_finite()) {
            return Err(CausalError::Config("structure_prior must be positive".into()));
        }
        if self.structure_prior != 1.0 {
            // TODO: implement a non-neutral structure prior term
            return Err(CausalError::Config("only structure_prior = 1 is supported".into()));
        }
        if !(self.penalty_discount > 0.0 && self.penalty_discount.is_finite()) {
            return Err(CausalError::Config("penalty_discount must be positive".into()));
        }
        Ok(())
    }
}

enum Var {
    Continuous(Vec<f64>),
    Discrete { codes: Vec<usize>, levels: usize },
}

/// Memoizing scorer over one dataset. Safe to share between threads.
pub struct CgScorer {
    names: Vec<String>,
    vars: Vec<Var>,
    n: usize,
    config: ScoreConfig,
    cache: RwLock<HashMap<u64, f64>>,
    pooled_used: AtomicBool,
}

impl CgScorer {
    pub fn new(data: &MixedDataset, config: ScoreConfig) -> Result<Self, CausalError> {
        config.validate()?;
        if data.p() > 63 {
            return Err(CausalError::Validation("at most 63 columns are supported".into()));
        }
        let vars = data
            .columns()
            .iter()
            .map(|c| match c {
                Column::Continuous(v) => Var::Continuous(v.clone()),
                Column::Discrete(v) => {
                    let levels: BTreeMap<i64, usize> =
                        v.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().zip(0..).collect();
                    Var::Discrete { codes: v.iter().map(|x| levels[x]).collect(), levels: levels.len() }
                }
            })
            .collect();
        Ok(Self {
            names: data.names().to_vec(),
            vars,
            n: data.n(),
            config,
            cache: RwLock::new(HashMap::new()),
            pooled_used: AtomicBool::new(false),
        })
    }

    pub fn p(&self) -> usize {
        self.vars.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// True once any score has used the pooled-covariance fallback.
    pub fn pooled_fallback_used(&self) -> bool {
        self.pooled_used.load(Ordering::Relaxed)
    }

    /// Local score of `child` given the parent set `parents` (bitmask).
    pub fn local(&self, child: usize, parents: u64) -> Result<f64, CausalError> {
        debug_assert!(parents & bit(child) == 0);
        Ok(self.joint(parents | bit(child))? - self.joint(parents)?)
    }

    /// Sum of local scores for a DAG given as per-node parent masks.
    pub fn dag_score(&self, parents: &[u64]) -> Result<f64, CausalError> {
        parents.iter().enumerate().map(|(v, &pa)| self.local(v, pa)).sum()
    }

    /// Penalized joint log-likelihood of the columns in `set`.
    pub fn joint(&self, set: u64) -> Result<f64, CausalError> {
        if let Some(&v) = self.cache.read().expect("score cache poisoned").get(&set) {
            return Ok(v);
        }
        let v = self.compute_joint(set)?;
        self.cache.write().expect("score cache poisoned").insert(set, v);
        Ok(v)
    }

    fn compute_joint(&self, set: u64) -> Result<f64, CausalError> {
        if set == 0 {
            return Ok(0.0);
        }
        let n = self.n;
        let mut disc: Vec<(&[usize], usize)> = Vec::new();
        let mut cont: Vec<&[f64]> = Vec::new();
        for i in bits(set) {
            match &self.vars[i] {
                Var::Continuous(v) => cont.push(v),
                Var::Discrete { codes, levels } => disc.push((codes, *levels)),
            }
        }
        let d = cont.len();
        let m: usize = disc.iter().map(|(_, l)| *l).product();

        let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for row in 0..n {
            let mut idx = 0;
            for (codes, levels) in &disc {
                idx = idx * levels + codes[row];
            }
            cells.entry(idx).or_default().push(row);
        }

        let nf = n as f64;
        let mut loglik: f64 = cells.values().map(|rows| rows.len() as f64 * (rows.len() as f64 / nf).ln()).sum();
        let mut k = (m - 1) as f64;
        if d > 0 {
            let cell_fits = self.cell_logdets(&cells, &cont, m, set);
            match cell_fits {
                Ok(logdets) => {
                    for (rows, ld) in cells.values().zip(logdets) {
                        loglik -= 0.5 * rows.len() as f64 * (d as f64 * (2.0 * PI).ln() + ld + d as f64);
                    }
                    k += (m * (d + d * (d + 1) / 2)) as f64;
                }
                Err(e) if self.config.pooled_fallback => {
                    let scatter = cells.values().fold(DMatrix::zeros(d, d), |acc, rows| acc + scatter(rows, &cont));
                    let ld = logdet_spd(&(scatter / nf)).ok_or(e)?;
                    self.pooled_used.store(true, Ordering::Relaxed);
                    loglik -= 0.5 * nf * (d as f64 * (2.0 * PI).ln() + ld + d as f64);
                    k += (m * d + d * (d + 1) / 2) as f64;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(loglik - self.config.penalty_discount * 0.5 * k * nf.ln())
    }

    fn cell_logdets(
        &self,
        cells: &BTreeMap<usize, Vec<usize>>,
        cont: &[&[f64]],
        m: usize,
        set: u64,
    ) -> Result<Vec<f64>, CausalError> {
        let d = cont.len();
        let degenerate = |cell: String, count: usize| CausalError::DegenerateCell {
            columns: bits(set).map(|i| self.names[i].as_str()).collect::<Vec<_>>().join(", "),
            cell,
            count,
            needed: d + 1,
        };
        if cells.len() < m {
            let empty = (0..m).find(|c| !cells.contains_key(c)).unwrap_or(0);
            return Err(degenerate(format!("#{empty}"), 0));
        }
        cells
            .iter()
            .map(|(&c, rows)| {
                if rows.len() < d + 1 {
                    return Err(degenerate(format!("#{c}"), rows.len()));
                }
                logdet_spd(&(scatter(rows, cont) / rows.len() as f64))
                    .ok_or_else(|| degenerate(format!("#{c}"), rows.len()))
            })
            .collect()
    }
}

/// Centered cross-product matrix of `cont` over `rows`.
fn scatter(rows: &[usize], cont: &[&[f64]]) -> DMatrix<f64> {
    let d = cont.len();
    let nc = rows.len() as f64;
    let means: Vec<f64> = cont.iter().map(|c| rows.iter().map(|&r| c[r]).sum::<f64>() / nc).collect();
    let mut s = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..=a {
            let v: f64 = rows.iter().map(|&r| (cont[a][r] - means[a]) * (cont[b][r] - means[b])).sum();
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// Local score of `child` given `parents`, by column name.
pub fn cg_local_score(
    data: &MixedDataset,
    child: &str,
    parents: &[&str],
    config: &ScoreConfig,
) -> Result<f64, CausalError> {
    let c = data.index_of(child)?;
    let mut mask = 0;
    for p in parents {
        let i = data.index_of(p)?;
        if i == c {
            return Err(CausalError::Validation(format!("{child} cannot be its own parent")));
        }
        mask |= bit(i);
    }
    CgScorer::new(data, *config)?.local(c, mask)
}
