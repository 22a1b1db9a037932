//! Synthetic fixtures shaped like a small movie-rating dataset, shared by
//! the kernel benchmarks.

use std::sync::Arc;

use gclrec_core::augment::{draw_deltas, suggest_edges, EdgeCandidateSet, EdgeOperator};
use gclrec_core::ingest::sample_batch;
use gclrec_core::{normalize, BipartiteGraph, EmbeddingMatrix, NormalizedAdjacency, SplitData, TrainBatch};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub struct Fixture {
    pub data: SplitData,
    pub adj: NormalizedAdjacency,
    pub z: EmbeddingMatrix,
    pub candidates: EdgeCandidateSet,
    pub operator: EdgeOperator,
    pub deltas: Vec<f64>,
    pub batch: TrainBatch,
}

/// Item popularity is skewed so that degrees look like real interaction data.
fn skewed_pairs(rng: &mut StdRng, n_users: usize, n_items: usize, n_edges: usize) -> Vec<(u32, u32)> {
    let mut seen = std::collections::HashSet::with_capacity(n_edges);
    let mut pairs = Vec::with_capacity(n_edges);
    while pairs.len() < n_edges {
        let u = rng.gen_range(0..n_users) as u32;
        let r: f64 = rng.gen();
        let i = ((r * r * r) * n_items as f64) as u32;
        if seen.insert((u, i)) {
            pairs.push((u, i));
        }
    }
    pairs
}

impl Fixture {
    pub fn new(n_users: usize, n_items: usize, n_edges: usize, dim: usize) -> Self {
        let mut rng = StdRng::seed_from_u64(7);
        let pairs = skewed_pairs(&mut rng, n_users, n_items, n_edges);
        let n_valid = n_edges / 10;
        let train = Arc::new(BipartiteGraph::from_pairs(&pairs[n_valid..], n_users, n_items).unwrap());
        let mut valid = vec![Vec::new(); n_users];
        for &(u, i) in &pairs[..n_valid] {
            valid[u as usize].push(i);
        }
        for v in &mut valid {
            v.sort_unstable();
        }
        let data = SplitData {
            train: train.clone(),
            test: valid.clone(),
            valid,
        };
        let adj = normalize(train.clone(), 1e-8);
        let values = (0..(n_users + n_items) * dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let z = EmbeddingMatrix::from_vec(n_users, n_items, dim, values).unwrap();
        let candidates = suggest_edges(&z, &train).unwrap();
        let operator = EdgeOperator::new(dim, dim, &mut rng).unwrap();
        let deltas = draw_deltas(candidates.len(), &mut rng);
        let order: Vec<usize> = (0..train.n_edges()).collect();
        let batch = sample_batch(&train, &order, 0, 4096, &mut rng).unwrap();
        Self {
            data,
            adj,
            z,
            candidates,
            operator,
            deltas,
            batch,
        }
    }

    /// 943 users, 1682 items, 100k interactions.
    pub fn movielens_sized(dim: usize) -> Self {
        Self::new(943, 1682, 100_000, dim)
    }
}
