//! Sparse user-item bipartite graphs and their symmetric degree normalization.
//!
//! Only the user x item block `R` is stored, once in user-major CSR order and
//! once as an item-major index into the same edge ids. Edge ids are positions
//! in the user-major arrays, so per-edge data (weights, coefficients,
//! gradients) lives in a single vector shared by both directions.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Epsilon added to weighted degrees before the inverse square root.
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    n_users: usize,
    n_items: usize,
    user_ptr: Vec<usize>,
    user_items: Vec<u32>,
    edge_user: Vec<u32>,
    item_ptr: Vec<usize>,
    item_users: Vec<u32>,
    item_edges: Vec<usize>,
    weights: Option<Vec<f64>>,
}

impl BipartiteGraph {
    /// Builds a binary graph from `(user, item)` pairs. Duplicates are dropped
    /// and neighbor lists come out sorted ascending.
    pub fn from_pairs(pairs: &[(u32, u32)], n_users: usize, n_items: usize) -> Result<Self> {
        for (record, &(user, item)) in pairs.iter().enumerate() {
            if user as usize >= n_users || item as usize >= n_items {
                return Err(Error::IndexOutOfRange {
                    record,
                    user,
                    item,
                    n_users,
                    n_items,
                });
            }
        }
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        Ok(Self::from_sorted_unique(&sorted, n_users, n_items))
    }

    /// `pairs` must be sorted, deduplicated and in range.
    pub(crate) fn from_sorted_unique(pairs: &[(u32, u32)], n_users: usize, n_items: usize) -> Self {
        let n_edges = pairs.len();
        let mut user_ptr = vec![0usize; n_users + 1];
        let mut item_ptr = vec![0usize; n_items + 1];
        for &(u, i) in pairs {
            user_ptr[u as usize + 1] += 1;
            item_ptr[i as usize + 1] += 1;
        }
        for k in 0..n_users {
            user_ptr[k + 1] += user_ptr[k];
        }
        for k in 0..n_items {
            item_ptr[k + 1] += item_ptr[k];
        }
        let user_items: Vec<u32> = pairs.iter().map(|&(_, i)| i).collect();
        let edge_user: Vec<u32> = pairs.iter().map(|&(u, _)| u).collect();

        // Edges are visited in user order, so each item's user list is sorted.
        let mut fill = item_ptr.clone();
        let mut item_users = vec![0u32; n_edges];
        let mut item_edges = vec![0usize; n_edges];
        for (e, &(u, i)) in pairs.iter().enumerate() {
            let slot = &mut fill[i as usize];
            item_users[*slot] = u;
            item_edges[*slot] = e;
            *slot += 1;
        }
        Self {
            n_users,
            n_items,
            user_ptr,
            user_items,
            edge_user,
            item_ptr,
            item_users,
            item_edges,
            weights: None,
        }
    }

    /// Attaches per-edge weights in edge-id order. Each weight must lie in `[0, 1]`.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_edges() {
            return Err(Error::LengthMismatch {
                expected: self.n_edges(),
                actual: weights.len(),
            });
        }
        if let Some((edge, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(0.0..=1.0).contains(*w))
        {
            return Err(Error::InvalidWeight { edge, value });
        }
        self.weights = Some(weights);
        Ok(self)
    }

    /// Same structure, weights dropped.
    pub fn binary(&self) -> Self {
        Self {
            weights: None,
            ..self.clone()
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_edges(&self) -> usize {
        self.user_items.len()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, edge: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[edge])
    }

    /// Sorted items of `user`.
    pub fn user_items(&self, user: u32) -> &[u32] {
        &self.user_items[self.user_edges(user)]
    }

    /// Edge ids of `user`, contiguous in user-major order.
    pub fn user_edges(&self, user: u32) -> Range<usize> {
        self.user_ptr[user as usize]..self.user_ptr[user as usize + 1]
    }

    /// Sorted users of `item` and the matching edge ids.
    pub fn item_users(&self, item: u32) -> (&[u32], &[usize]) {
        let r = self.item_ptr[item as usize]..self.item_ptr[item as usize + 1];
        (&self.item_users[r.clone()], &self.item_edges[r])
    }

    pub fn user_ptr(&self) -> &[usize] {
        &self.user_ptr
    }

    pub fn item_ptr(&self) -> &[usize] {
        &self.item_ptr
    }

    pub fn edge(&self, edge: usize) -> (u32, u32) {
        (self.edge_user[edge], self.user_items[edge])
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (u32, u32)> + '_ {
        self.edge_user
            .iter()
            .copied()
            .zip(self.user_items.iter().copied())
    }

    pub fn edge_id(&self, user: u32, item: u32) -> Option<usize> {
        let r = self.user_edges(user);
        self.user_items[r.clone()]
            .binary_search(&item)
            .ok()
            .map(|k| r.start + k)
    }

    pub fn has_edge(&self, user: u32, item: u32) -> bool {
        self.edge_id(user, item).is_some()
    }

    pub fn user_degree_count(&self, user: u32) -> usize {
        self.user_edges(user).len()
    }

    pub fn item_degree_count(&self, item: u32) -> usize {
        self.item_ptr[item as usize + 1] - self.item_ptr[item as usize]
    }

    /// Weighted degrees (incident-edge counts for binary graphs).
    pub fn degrees(&self) -> DegreeVector {
        let mut users = vec![0.0; self.n_users];
        let mut items = vec![0.0; self.n_items];
        for (e, (u, i)) in self.edges().enumerate() {
            let w = self.weight(e);
            users[u as usize] += w;
            items[i as usize] += w;
        }
        DegreeVector { users, items }
    }

    fn count_degrees(&self) -> DegreeVector {
        DegreeVector {
            users: (0..self.n_users as u32)
                .map(|u| self.user_degree_count(u) as f64)
                .collect(),
            items: (0..self.n_items as u32)
                .map(|i| self.item_degree_count(i) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector {
    pub users: Vec<f64>,
    pub items: Vec<f64>,
}

/// Which degrees enter `D^{-1/2}` for a weighted graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeMode {
    /// Sums of incident edge weights.
    #[default]
    Weighted,
    /// Incident edge counts, ignoring weights.
    Binary,
}

/// `D^{-1/2} A D^{-1/2}` restricted to the user x item block.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    graph: Arc<BipartiteGraph>,
    coef: Vec<f64>,
    user_deg: Vec<f64>,
    item_deg: Vec<f64>,
    mode: DegreeMode,
}

/// Normalizes with weighted degrees. `epsilon` is added to every degree of a
/// weighted graph; binary graphs never see it.
pub fn normalize(graph: Arc<BipartiteGraph>, epsilon: f64) -> NormalizedAdjacency {
    normalize_with(graph, epsilon, DegreeMode::Weighted)
}

pub fn normalize_with(
    graph: Arc<BipartiteGraph>,
    epsilon: f64,
    mode: DegreeMode,
) -> NormalizedAdjacency {
    let (degrees, eps) = match (graph.is_weighted(), mode) {
        (false, _) => (graph.count_degrees(), 0.0),
        (true, DegreeMode::Weighted) => (graph.degrees(), epsilon),
        (true, DegreeMode::Binary) => (graph.count_degrees(), 0.0),
    };
    let user_deg: Vec<f64> = degrees.users.iter().map(|d| d + eps).collect();
    let item_deg: Vec<f64> = degrees.items.iter().map(|d| d + eps).collect();
    let coef = graph
        .edges()
        .enumerate()
        .map(|(e, (u, i))| graph.weight(e) / (user_deg[u as usize] * item_deg[i as usize]).sqrt())
        .collect();
    NormalizedAdjacency {
        graph,
        coef,
        user_deg,
        item_deg,
        mode,
    }
}

impl NormalizedAdjacency {
    pub fn graph(&self) -> &Arc<BipartiteGraph> {
        &self.graph
    }

    /// Coefficients in edge-id order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn coef(&self, edge: usize) -> f64 {
        self.coef[edge]
    }

    /// `c(u, i)`, looked up through the user-major direction.
    pub fn coef_user_side(&self, user: u32, item: u32) -> Option<f64> {
        self.graph.edge_id(user, item).map(|e| self.coef[e])
    }

    /// `c(u, i)`, looked up through the item-major direction.
    pub fn coef_item_side(&self, user: u32, item: u32) -> Option<f64> {
        let (users, edges) = self.graph.item_users(item);
        users.binary_search(&user).ok().map(|k| self.coef[edges[k]])
    }

    /// Degrees as used in the coefficients (epsilon included).
    pub fn user_degrees(&self) -> &[f64] {
        &self.user_deg
    }

    pub fn item_degrees(&self) -> &[f64] {
        &self.item_deg
    }

    pub fn degree_mode(&self) -> DegreeMode {
        self.mode
    }

    /// True when the coefficients depend on edge weights through the degrees.
    pub(crate) fn degrees_depend_on_weights(&self) -> bool {
        self.graph.is_weighted() && self.mode == DegreeMode::Weighted
    }
}
