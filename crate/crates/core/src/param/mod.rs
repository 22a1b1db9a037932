//! Dense parameters, initialization, optimization and gradient checking.

mod adam;
mod checkpoint;
mod gradcheck;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, MlpLayer, CHECKPOINT_MAGIC, MLP_SECTION_MAGIC};
pub use gradcheck::{finite_diff_check, numeric_gradient, relative_error, max_relative_error, REL_ERR_FLOOR};

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

/// A named dense tensor with a same-shape gradient accumulator.
///
/// Gradients accumulate additively across loss terms and are cleared only by
/// [`adam_step`] (or explicitly with [`ParamTensor::zero_grad`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn accumulate(&mut self, grad: &[f64]) -> Result<()> {
        if grad.len() != self.grad.len() {
            return Err(Error::LengthMismatch {
                expected: self.grad.len(),
                actual: grad.len(),
            });
        }
        for (acc, g) in self.grad.iter_mut().zip(grad) {
            *acc += g;
        }
        Ok(())
    }
}

/// Xavier (Glorot) uniform initialization.
///
/// The first dimension is fan-out and the product of the rest is fan-in;
/// entries are i.i.d. uniform on `[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init<R: Rng + ?Sized>(
    name: impl Into<String>,
    shape: &[usize],
    rng: &mut R,
) -> Result<ParamTensor> {
    let name = name.into();
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Shape(format!(
            "xavier_init `{name}`: shape {shape:?} has no elements"
        )));
    }
    let bound = xavier_bound(shape);
    let dist = Uniform::new_inclusive(-bound, bound);
    let n: usize = shape.iter().product();
    let values = (0..n).map(|_| dist.sample(rng)).collect();
    ParamTensor::from_values(name, shape, values)
}

pub fn xavier_bound(shape: &[usize]) -> f64 {
    let fan_out = shape[0];
    let fan_in: usize = shape[1..].iter().product();
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Ordered collection of parameters owned by one optimizer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensors: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new(tensors: Vec<ParamTensor>) -> Self {
        Self { tensors }
    }

    pub fn tensors(&self) -> &[ParamTensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(ParamTensor::zero_grad);
    }

    /// Adds per-tensor gradients in store order.
    pub fn accumulate(&mut self, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != self.tensors.len() {
            return Err(Error::LengthMismatch {
                expected: self.tensors.len(),
                actual: grads.len(),
            });
        }
        for (t, g) in self.tensors.iter_mut().zip(grads) {
            t.accumulate(g)?;
        }
        Ok(())
    }
}

/// `lambda * sum ||theta||^2` and its gradient `2 * lambda * theta`, per tensor.
pub fn l2_penalty(params: &[ParamTensor], lambda_reg: f64) -> (f64, Vec<Vec<f64>>) {
    let mut loss = 0.0;
    let grads = params
        .iter()
        .map(|p| {
            loss += p.values.iter().map(|v| v * v).sum::<f64>();
            p.values.iter().map(|v| 2.0 * lambda_reg * v).collect()
        })
        .collect();
    (lambda_reg * loss, grads)
}
