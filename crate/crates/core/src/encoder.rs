//! LightGCN propagation, its reverse pass, and inner-product scoring.
//!
//! Forward: `Z^{l+1} = Â Z^l`, `Z = (Z^0 + ... + Z^L) / (L + 1)` where `Â` is
//! a [`NormalizedAdjacency`]. The reverse pass returns the gradient with
//! respect to `Z^0` and, through `c(u,i) = w(u,i) / sqrt(d(u) d(i))`, the
//! gradient with respect to every edge weight.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

/// Rows `0..n_users` are users, rows `n_users..n_users + n_items` are items.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_users: usize,
    n_items: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(n_users: usize, n_items: usize, dim: usize) -> Self {
        Self {
            n_users,
            n_items,
            dim,
            data: vec![0.0; (n_users + n_items) * dim],
        }
    }

    pub fn from_vec(n_users: usize, n_items: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let expected = (n_users + n_items) * dim;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            n_users,
            n_items,
            dim,
            data,
        })
    }

    /// Stacks separate user and item tables.
    pub fn from_parts(users: &[f64], items: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || !users.len().is_multiple_of(dim) || !items.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "tables of {} and {} values do not split into rows of {dim}",
                users.len(),
                items.len()
            )));
        }
        let mut data = Vec::with_capacity(users.len() + items.len());
        data.extend_from_slice(users);
        data.extend_from_slice(items);
        Self::from_vec(users.len() / dim, items.len() / dim, dim, data)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_rows(&self) -> usize {
        self.n_users + self.n_items
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn user(&self, u: u32) -> &[f64] {
        self.row(u as usize)
    }

    pub fn item(&self, i: u32) -> &[f64] {
        self.row(self.n_users + i as usize)
    }

    pub fn user_mut(&mut self, u: u32) -> &mut [f64] {
        self.row_mut(u as usize)
    }

    pub fn item_mut(&mut self, i: u32) -> &mut [f64] {
        let r = self.n_users + i as usize;
        self.row_mut(r)
    }

    pub fn user_block(&self) -> &[f64] {
        &self.data[..self.n_users * self.dim]
    }

    pub fn item_block(&self) -> &[f64] {
        &self.data[self.n_users * self.dim..]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_users == other.n_users && self.n_items == other.n_items && self.dim == other.dim
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    fn check_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}+{}x{} vs {}+{}x{}",
                self.n_users, self.n_items, self.dim, other.n_users, other.n_items, other.dim
            )))
        }
    }
}

/// Per-layer embeddings kept from a forward pass.
#[derive(Debug, Clone)]
pub struct PropagationTape {
    adjacency: NormalizedAdjacency,
    layers: Vec<EmbeddingMatrix>,
}

impl PropagationTape {
    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adjacency
    }

    /// `Z^0 ..= Z^L`.
    pub fn layers(&self) -> &[EmbeddingMatrix] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len() - 1
    }
}

/// `out = Â x`. Rows are independent, so the parallel split does not change results.
pub fn apply_adjacency(adj: &NormalizedAdjacency, x: &EmbeddingMatrix) -> EmbeddingMatrix {
    let g = adj.graph();
    let coef = adj.coefficients();
    let dim = x.dim;
    let n_users = x.n_users;
    let mut out = EmbeddingMatrix::zeros(x.n_users, x.n_items, dim);
    let (users_out, items_out) = out.data.split_at_mut(n_users * dim);
    users_out
        .par_chunks_mut(dim.max(1))
        .enumerate()
        .for_each(|(u, row)| {
            let r = g.user_edges(u as u32);
            for (e, &i) in r.clone().zip(g.user_items(u as u32)) {
                let c = coef[e];
                for (o, v) in row.iter_mut().zip(x.item(i)) {
                    *o += c * v;
                }
            }
        });
    items_out
        .par_chunks_mut(dim.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let (users, edges) = g.item_users(i as u32);
            for (&u, &e) in users.iter().zip(edges) {
                let c = coef[e];
                for (o, v) in row.iter_mut().zip(x.user(u)) {
                    *o += c * v;
                }
            }
        });
    out
}

pub fn propagate(
    adj: &NormalizedAdjacency,
    z0: &EmbeddingMatrix,
    n_layers: usize,
) -> Result<(EmbeddingMatrix, PropagationTape)> {
    let g = adj.graph();
    if z0.n_users != g.n_users() || z0.n_items != g.n_items() {
        return Err(Error::Shape(format!(
            "embeddings cover {}+{} rows, graph has {}+{} nodes",
            z0.n_users,
            z0.n_items,
            g.n_users(),
            g.n_items()
        )));
    }
    let mut layers = Vec::with_capacity(n_layers + 1);
    layers.push(z0.clone());
    let mut sum = z0.clone();
    for l in 0..n_layers {
        let next = apply_adjacency(adj, &layers[l]);
        if next.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLayer { layer: l + 1 });
        }
        sum.add_assign(&next);
        layers.push(next);
    }
    sum.scale(1.0 / (n_layers + 1) as f64);
    Ok((
        sum,
        PropagationTape {
            adjacency: adj.clone(),
            layers,
        },
    ))
}

/// Gradient with respect to `Z^0` only.
pub fn propagate_backward_embeddings(
    tape: &PropagationTape,
    d_final: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix> {
    Ok(backward(tape, d_final, false)?.0)
}

/// Returns `(dZ^0, dW)` with `dW` in edge-id order.
pub fn propagate_backward(
    tape: &PropagationTape,
    d_final: &EmbeddingMatrix,
) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    backward(tape, d_final, true)
}

fn backward(
    tape: &PropagationTape,
    d_final: &EmbeddingMatrix,
    want_edges: bool,
) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    tape.layers[0].check_shape(d_final, "propagate_backward")?;
    let adj = &tape.adjacency;
    let g = adj.graph();
    let n_layers = tape.n_layers();
    let a = 1.0 / (n_layers + 1) as f64;
    let mut base = d_final.clone();
    base.scale(a);

    // grad_l = a * dZ + Â grad_{l+1}; dL/dc(u,i) picks up
    // grad_{l+1}[u] . Z^l[i] + grad_{l+1}[i] . Z^l[u] at every layer.
    let mut grad = base.clone();
    let mut d_coef = vec![0.0; if want_edges { g.n_edges() } else { 0 }];
    for l in (0..n_layers).rev() {
        if want_edges {
            let z = &tape.layers[l];
            d_coef.par_iter_mut().enumerate().for_each(|(e, dc)| {
                let (u, i) = g.edge(e);
                *dc += dot(grad.user(u), z.item(i)) + dot(grad.item(i), z.user(u));
            });
        }
        let mut next = apply_adjacency(adj, &grad);
        next.add_assign(&base);
        grad = next;
    }
    let d_weights = if want_edges {
        edge_weight_gradient(adj, &d_coef)
    } else {
        Vec::new()
    };
    Ok((grad, d_weights))
}

/// Chain rule from coefficient gradients to weight gradients.
///
/// With weighted degrees `D_u = sum_j w(u,j) + eps`:
/// `dL/dw(u,i) = g(u,i) / sqrt(D_u D_i) - S_u / (2 D_u) - S_i / (2 D_i)`,
/// `S_u = sum_j g(u,j) c(u,j)`.
fn edge_weight_gradient(adj: &NormalizedAdjacency, d_coef: &[f64]) -> Vec<f64> {
    let g = adj.graph();
    let du = adj.user_degrees();
    let di = adj.item_degrees();
    let coef = adj.coefficients();
    let direct = |e: usize, u: u32, i: u32| d_coef[e] / (du[u as usize] * di[i as usize]).sqrt();
    if !adj.degrees_depend_on_weights() {
        return g.edges().enumerate().map(|(e, (u, i))| direct(e, u, i)).collect();
    }
    let s_user: Vec<f64> = (0..g.n_users() as u32)
        .map(|u| g.user_edges(u).map(|e| d_coef[e] * coef[e]).sum())
        .collect();
    let s_item: Vec<f64> = (0..g.n_items() as u32)
        .map(|i| g.item_users(i).1.iter().map(|&e| d_coef[e] * coef[e]).sum())
        .collect();
    g.edges()
        .enumerate()
        .map(|(e, (u, i))| {
            direct(e, u, i)
                - 0.5 * s_user[u as usize] / du[u as usize]
                - 0.5 * s_item[i as usize] / di[i as usize]
        })
        .collect()
}

#[inline]
/// Four interleaved partial sums, combined in a fixed order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `z_u . z_i`.
pub fn score(z: &EmbeddingMatrix, u: u32, i: u32) -> f64 {
    dot(z.user(u), z.item(i))
}

pub fn score_all_items(z: &EmbeddingMatrix, u: u32) -> Vec<f64> {
    let zu = z.user(u);
    (0..z.n_items as u32).map(|i| dot(zu, z.item(i))).collect()
}
