#![allow(dead_code)]

use std::path::PathBuf;

use gclrec_core::ingest::parse_interactions;
use gclrec_core::{BipartiteGraph, EmbeddingMatrix, InteractionSet, TrainBatch, Triple};
use rand::seq::SliceRandom;
use rand::Rng;

/// A skewed toy interaction file: every user gets `per_user` distinct items,
/// low item indices being more popular.
pub fn toy_interactions<R: Rng>(rng: &mut R, n_users: usize, n_items: usize, per_user: usize) -> InteractionSet {
    let mut text = String::new();
    for u in 0..n_users {
        let mut items: Vec<usize> = Vec::with_capacity(per_user);
        while items.len() < per_user {
            let r: f64 = rng.gen();
            let i = ((r * r) * n_items as f64) as usize;
            if !items.contains(&i) {
                items.push(i);
            }
        }
        for i in items {
            text.push_str(&format!("u{u}\ti{i}\n"));
        }
    }
    parse_interactions(text.as_bytes(), "toy").unwrap()
}

pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize, weighted: bool) -> BipartiteGraph {
    let n_users = rng.gen_range(1..max_nodes);
    let n_items = rng.gen_range(1..=max_nodes - n_users);
    let mut all: Vec<(u32, u32)> = (0..n_users as u32)
        .flat_map(|u| (0..n_items as u32).map(move |i| (u, i)))
        .collect();
    all.shuffle(rng);
    let n_edges = rng.gen_range(1..=all.len().min(max_edges));
    all.truncate(n_edges);
    let g = BipartiteGraph::from_pairs(&all, n_users, n_items).unwrap();
    if weighted {
        let w = (0..g.n_edges()).map(|_| rng.gen_range(0.05..=1.0)).collect();
        g.with_weights(w).unwrap()
    } else {
        g
    }
}

pub fn random_embeddings<R: Rng>(rng: &mut R, n_users: usize, n_items: usize, dim: usize) -> EmbeddingMatrix {
    let data = (0..(n_users + n_items) * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    EmbeddingMatrix::from_vec(n_users, n_items, dim, data).unwrap()
}

/// Triples whose positives are edges of `g`; negatives are uniform items.
pub fn random_batch<R: Rng>(rng: &mut R, g: &BipartiteGraph, n: usize) -> TrainBatch {
    let triples = (0..n)
        .map(|_| {
            let (user, pos) = g.edge(rng.gen_range(0..g.n_edges()));
            let neg = rng.gen_range(0..g.n_items() as u32);
            Triple { user, pos, neg }
        })
        .collect();
    TrainBatch { triples }
}

/// `(1/(L+1)) sum_l Ahat^l Z0` with a dense symmetric adjacency. Degrees of a
/// weighted graph get `epsilon` added; isolated nodes get a zero row.
pub fn dense_propagate(g: &BipartiteGraph, epsilon: f64, layers: usize, z0: &EmbeddingMatrix) -> Vec<f64> {
    let (nu, n) = (g.n_users(), g.n_users() + g.n_items());
    let dim = z0.dim();
    let mut a = vec![0.0; n * n];
    for (e, (u, i)) in g.edges().enumerate() {
        let (r, c) = (u as usize, nu + i as usize);
        a[r * n + c] = g.weight(e);
        a[c * n + r] = g.weight(e);
    }
    let eps = if g.is_weighted() { epsilon } else { 0.0 };
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|r| {
            let d: f64 = a[r * n..(r + 1) * n].iter().sum::<f64>() + eps;
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let ahat: Vec<f64> = (0..n * n).map(|k| inv_sqrt[k / n] * a[k] * inv_sqrt[k % n]).collect();
    let mut layer = z0.as_slice().to_vec();
    let mut sum = layer.clone();
    for _ in 0..layers {
        let mut next = vec![0.0; n * dim];
        for r in 0..n {
            for c in 0..n {
                let w = ahat[r * n + c];
                if w != 0.0 {
                    for k in 0..dim {
                        next[r * dim + k] += w * layer[c * dim + k];
                    }
                }
            }
        }
        for (s, v) in sum.iter_mut().zip(&next) {
            *s += v;
        }
        layer = next;
    }
    sum.iter().map(|v| v / (layers + 1) as f64).collect()
}

/// `data/ml-100k.tsv` at the workspace root, or `$GCLREC_ML100K`.
pub fn ml100k_path() -> PathBuf {
    if let Ok(p) = std::env::var("GCLREC_ML100K") {
        return PathBuf::from(p);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k.tsv")
}
