//! Edge-drop / edge-add masking, edge suggestion and the learnable operator.

mod candidates;
mod operator;

pub use candidates::{suggest_edges, EdgeCandidateSet, Shortfall};
pub use operator::{draw_deltas, gumbel_probability, EdgeOperator, OperatorTape};

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{normalize_with, BipartiteGraph, DegreeMode, NormalizedAdjacency};

/// `ceil(frac * n)`, with a little slack so `0.9 * 10` stays 9.
pub fn ratio_count(frac: f64, n: usize) -> usize {
    let k = (frac * n as f64 - 1e-9).ceil();
    (k.max(0.0) as usize).min(n)
}

/// Keeps a uniform sample of `ceil((1 - rho) |E|)` edges. Weights are dropped.
pub fn random_edge_drop<R: Rng + ?Sized>(graph: &BipartiteGraph, rho: f64, rng: &mut R) -> Result<BipartiteGraph> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("drop ratio must be in [0, 1), got {rho}")));
    }
    let n = graph.n_edges();
    let keep = ratio_count(1.0 - rho, n);
    if n > 0 && keep == 0 {
        return Err(Error::Empty("edge drop removed every edge".into()));
    }
    let mut kept = index::sample(rng, n, keep).into_vec();
    kept.sort_unstable();
    let pairs: Vec<(u32, u32)> = kept.into_iter().map(|e| graph.edge(e)).collect();
    Ok(BipartiteGraph::from_sorted_unique(&pairs, graph.n_users(), graph.n_items()))
}

/// Adds `ceil(p_add |E1|)` suggested edges, sampled uniformly without
/// replacement, to `graph`.
pub fn random_edge_add<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    candidates: &EdgeCandidateSet,
    p_add: f64,
    rng: &mut R,
) -> Result<BipartiteGraph> {
    if !(0.0..=1.0).contains(&p_add) {
        return Err(Error::InvalidArgument(format!("add ratio must be in [0, 1], got {p_add}")));
    }
    let suggested = candidates.suggested_edges();
    let m = ratio_count(p_add, suggested.len());
    let mut pairs: Vec<(u32, u32)> = graph.edges().collect();
    pairs.extend(index::sample(rng, suggested.len(), m).into_iter().map(|k| suggested[k]));
    BipartiteGraph::from_pairs(&pairs, graph.n_users(), graph.n_items())
}

/// The candidate graph weighted by `p`, normalized.
pub fn build_augmented_adjacency(
    candidates: &EdgeCandidateSet,
    p: &[f64],
    epsilon: f64,
    mode: DegreeMode,
) -> Result<NormalizedAdjacency> {
    let weighted = candidates.graph().binary().with_weights(p.to_vec())?;
    Ok(normalize_with(Arc::new(weighted), epsilon, mode))
}
