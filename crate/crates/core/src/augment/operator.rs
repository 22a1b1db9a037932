//! Learnable edge operator: a two-layer MLP scoring each candidate edge,
//! relaxed to a probability with logistic (binary Gumbel) noise.

use rand::distributions::Open01;
use rand::Rng;
use rayon::prelude::*;

use super::EdgeCandidateSet;
use crate::encoder::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::param::{xavier_init, MlpLayer, ParamStore, ParamTensor};

/// Candidates per work unit. Partial gradients are summed in chunk order, so
/// results do not depend on the thread count.
const CHUNK: usize = 256;

const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const B2: usize = 3;

/// `omega = w2 . tanh(W1 [z_u * z_i, flag] + b1) + b2`, hidden width = `dim`
/// unless set otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeOperator {
    params: ParamStore,
    dim: usize,
    hidden: usize,
}

/// Everything needed for an exact backward pass through one forward.
#[derive(Debug, Clone)]
pub struct OperatorTape {
    z: EmbeddingMatrix,
    hidden: Vec<f64>,
    omega: Vec<f64>,
    deltas: Vec<f64>,
    p: Vec<f64>,
    tau_g: f64,
}

impl OperatorTape {
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

/// `tanh` through a single `exp`, which is cheaper than libm's `tanh`.
#[inline]
fn fast_tanh(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        return x * (1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0);
    }
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// `sigmoid((ln delta - ln(1 - delta) + omega) / tau_g)`.
pub fn gumbel_probability(omega: f64, delta: f64, tau_g: f64) -> f64 {
    let x = (delta.ln() - (-delta).ln_1p() + omega) / tau_g;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One uniform `(0, 1)` draw per candidate.
pub fn draw_deltas<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(Open01)).collect()
}

impl EdgeOperator {
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let params = ParamStore::new(vec![
            xavier_init("op.w1", &[hidden, dim + 1], rng)?,
            ParamTensor::zeros("op.b1", &[hidden]),
            xavier_init("op.w2", &[1, hidden], rng)?,
            ParamTensor::zeros("op.b2", &[1]),
        ]);
        Ok(Self { params, dim, hidden })
    }

    pub fn from_layers(layers: &[MlpLayer]) -> Result<Self> {
        let [l1, l2] = layers else {
            return Err(Error::Checkpoint(format!(
                "edge operator needs 2 layers, found {}",
                layers.len()
            )));
        };
        if l1.in_dim < 2 || l2.in_dim != l1.out_dim || l2.out_dim != 1 {
            return Err(Error::Checkpoint(format!(
                "edge operator layers {}x{} / {}x{} do not chain to a scalar",
                l1.out_dim, l1.in_dim, l2.out_dim, l2.in_dim
            )));
        }
        let (dim, hidden) = (l1.in_dim - 1, l1.out_dim);
        let params = ParamStore::new(vec![
            ParamTensor::from_values("op.w1", &[hidden, dim + 1], l1.weights.clone())?,
            ParamTensor::from_values("op.b1", &[hidden], l1.bias.clone())?,
            ParamTensor::from_values("op.w2", &[1, hidden], l2.weights.clone())?,
            ParamTensor::from_values("op.b2", &[1], l2.bias.clone())?,
        ]);
        Ok(Self { params, dim, hidden })
    }

    pub fn to_layers(&self) -> Vec<MlpLayer> {
        let t = self.params.tensors();
        vec![
            MlpLayer {
                out_dim: self.hidden,
                in_dim: self.dim + 1,
                weights: t[W1].values.clone(),
                bias: t[B1].values.clone(),
            },
            MlpLayer {
                out_dim: 1,
                in_dim: self.hidden,
                weights: t[W2].values.clone(),
                bias: t[B2].values.clone(),
            },
        ]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn check_inputs(&self, z: &EmbeddingMatrix, cands: &EdgeCandidateSet) -> Result<()> {
        let g = cands.graph();
        if z.dim() != self.dim || z.n_users() != g.n_users() || z.n_items() != g.n_items() {
            return Err(Error::Shape(format!(
                "edge operator expects dim {} over {}+{} nodes, got dim {} over {}+{}",
                self.dim,
                g.n_users(),
                g.n_items(),
                z.dim(),
                z.n_users(),
                z.n_items()
            )));
        }
        Ok(())
    }

    /// `W1` transposed to `(dim + 1) x hidden` so the inner loops are axpys.
    fn w1_transposed(&self) -> Vec<f64> {
        let w1 = &self.params.tensors()[W1].values;
        let (h, n_in) = (self.hidden, self.dim + 1);
        let mut out = vec![0.0; n_in * h];
        for r in 0..h {
            for k in 0..n_in {
                out[k * h + r] = w1[r * n_in + k];
            }
        }
        out
    }

    /// Logits and hidden activations for every candidate.
    pub fn logits(&self, z: &EmbeddingMatrix, cands: &EdgeCandidateSet) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_inputs(z, cands)?;
        let (h, dim) = (self.hidden, self.dim);
        let w1t = self.w1_transposed();
        let t = self.params.tensors();
        let (b1, w2, b2) = (&t[B1].values, &t[W2].values, t[B2].values[0]);
        let g = cands.graph();
        let n = cands.len();
        let mut hidden = vec![0.0; n * h];
        let mut omega = vec![0.0; n];
        hidden
            .par_chunks_mut(CHUNK * h.max(1))
            .zip(omega.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, (hid, om))| {
                for (k, (row, w)) in hid.chunks_mut(h.max(1)).zip(om.iter_mut()).enumerate() {
                    let e = c * CHUNK + k;
                    let (u, i) = g.edge(e);
                    let (zu, zi) = (z.user(u), z.item(i));
                    row.copy_from_slice(b1);
                    for d in 0..dim {
                        let x = zu[d] * zi[d];
                        for (r, wv) in row.iter_mut().zip(&w1t[d * h..(d + 1) * h]) {
                            *r += wv * x;
                        }
                    }
                    if cands.is_original(e) {
                        for (r, wv) in row.iter_mut().zip(&w1t[dim * h..]) {
                            *r += wv;
                        }
                    }
                    let mut acc = b2;
                    for (r, wv) in row.iter_mut().zip(w2) {
                        *r = fast_tanh(*r);
                        acc += wv * *r;
                    }
                    *w = acc;
                }
            });
        Ok((omega, hidden))
    }

    /// Per-candidate probabilities under the given noise. `z` is treated as a
    /// constant: no gradient flows back into it.
    pub fn forward(
        &self,
        z: &EmbeddingMatrix,
        cands: &EdgeCandidateSet,
        tau_g: f64,
        deltas: Vec<f64>,
    ) -> Result<(Vec<f64>, OperatorTape)> {
        if tau_g.is_nan() || tau_g <= 0.0 {
            return Err(Error::InvalidArgument(format!("tau_g must be positive, got {tau_g}")));
        }
        if deltas.len() != cands.len() {
            return Err(Error::LengthMismatch {
                expected: cands.len(),
                actual: deltas.len(),
            });
        }
        let (omega, hidden) = self.logits(z, cands)?;
        let p: Vec<f64> = omega
            .iter()
            .zip(&deltas)
            .map(|(&w, &d)| gumbel_probability(w, d, tau_g))
            .collect();
        let tape = OperatorTape {
            z: z.clone(),
            hidden,
            omega,
            deltas,
            p: p.clone(),
            tau_g,
        };
        Ok((p, tape))
    }

    /// Accumulates `dL/dtheta` given `dL/dp` per candidate.
    #[allow(clippy::needless_range_loop)]
    pub fn backward(&mut self, tape: &OperatorTape, cands: &EdgeCandidateSet, d_p: &[f64]) -> Result<()> {
        if d_p.len() != tape.p.len() {
            return Err(Error::LengthMismatch {
                expected: tape.p.len(),
                actual: d_p.len(),
            });
        }
        let (h, dim) = (self.hidden, self.dim);
        let n_in = dim + 1;
        let w2 = self.params.tensors()[W2].values.clone();
        let g = cands.graph();
        let z = &tape.z;
        // Partial layout: dW1 transposed (n_in x h), db1 (h), dw2 (h), db2 (1).
        let width = n_in * h + 2 * h + 1;
        let n = tape.p.len();
        let partials: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![0.0; width];
                let mut dpre = vec![0.0; h];
                for e in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let p = tape.p[e];
                    let d_omega = d_p[e] * p * (1.0 - p) / tape.tau_g;
                    if d_omega == 0.0 {
                        continue;
                    }
                    let hid = &tape.hidden[e * h..(e + 1) * h];
                    let (dw1t, rest) = acc.split_at_mut(n_in * h);
                    let (db1, rest) = rest.split_at_mut(h);
                    let (dw2, db2) = rest.split_at_mut(h);
                    for r in 0..h {
                        dw2[r] += d_omega * hid[r];
                        dpre[r] = d_omega * w2[r] * (1.0 - hid[r] * hid[r]);
                        db1[r] += dpre[r];
                    }
                    db2[0] += d_omega;
                    let (u, i) = g.edge(e);
                    let (zu, zi) = (z.user(u), z.item(i));
                    for d in 0..dim {
                        let x = zu[d] * zi[d];
                        for (a, dp) in dw1t[d * h..(d + 1) * h].iter_mut().zip(&dpre) {
                            *a += dp * x;
                        }
                    }
                    if cands.is_original(e) {
                        for (a, dp) in dw1t[dim * h..].iter_mut().zip(&dpre) {
                            *a += dp;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![0.0; width];
        for part in &partials {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        let mut dw1 = vec![0.0; h * n_in];
        for k in 0..n_in {
            for r in 0..h {
                dw1[r * n_in + k] = total[k * h + r];
            }
        }
        let off = n_in * h;
        self.params.accumulate(&[
            dw1,
            total[off..off + h].to_vec(),
            total[off + h..off + 2 * h].to_vec(),
            total[off + 2 * h..].to_vec(),
        ])
    }
}
