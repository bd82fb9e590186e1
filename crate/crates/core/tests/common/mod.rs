#![allow(dead_code)]

use eda_sleep::causal::{Column, Dag, MixedDataset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const NAMES: [&str; 4] = ["A", "B", "C", "D"];

/// Data from a random 4-node DAG: edge probability 0.5 over a random
/// causal order, coefficients +-U(0.3, 1), unit Gaussian noise, and one
/// node thresholded at zero into a binary column (children see the 0/1
/// value).
#[allow(clippy::needless_range_loop)]
pub fn random_mixed_dataset(seed: u64, n: usize) -> (MixedDataset, Dag) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..4).collect();
    order.shuffle(&mut rng);
    let mut coef = [[0.0f64; 4]; 4];
    let mut edges = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            if rng.random_bool(0.5) {
                let mag = rng.random_range(0.3..1.0);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                coef[order[a]][order[b]] = sign * mag;
                edges.push((NAMES[order[a]].to_string(), NAMES[order[b]].to_string()));
            }
        }
    }
    let binary = rng.random_range(0..4);
    let mut cols = vec![vec![0.0f64; n]; 4];
    for row in 0..n {
        for &v in &order {
            let mut x: f64 = rng.sample(StandardNormal);
            for u in 0..4 {
                x += coef[u][v] * cols[u][row];
            }
            if v == binary {
                x = if x > 0.0 { 1.0 } else { 0.0 };
            }
            cols[v][row] = x;
        }
    }
    let columns =
        cols.into_iter()
            .enumerate()
            .map(|(v, c)| {
                if v == binary {
                    Column::Discrete(c.iter().map(|&x| x as i64).collect())
                } else {
                    Column::Continuous(c)
                }
            })
            .collect();
    let names = NAMES.iter().map(|s| s.to_string()).collect();
    let dag = Dag::new(NAMES.iter().map(|s| s.to_string()).collect(), edges).unwrap();
    (MixedDataset::new(names, columns).unwrap(), dag)
}

/// Every labeled DAG on the four nodes, by brute force over edge states.
pub fn all_dags() -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    for code in 0..3usize.pow(pairs.len() as u32) {
        let mut c = code;
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match c % 3 {
                1 => edges.push((NAMES[i].to_string(), NAMES[j].to_string())),
                2 => edges.push((NAMES[j].to_string(), NAMES[i].to_string())),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(d) = Dag::new(NAMES.iter().map(|s| s.to_string()).collect(), edges) {
            out.push(d);
        }
    }
    out
}
