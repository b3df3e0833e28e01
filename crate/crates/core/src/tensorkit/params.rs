use super::{Real, Result, Tensor, TensorError};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_SET_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of one parameter: owning set plus index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId {
    pub set: u64,
    pub index: usize,
}

/// Named trainable tensors with matching gradient accumulators.
#[derive(Debug)]
pub struct ParamSet<T = f32> {
    id: u64,
    names: Vec<String>,
    values: Vec<Tensor<T>>,
    grads: Vec<Tensor<T>>,
}

impl<T: Real> Clone for ParamSet<T> {
    /// Clones get a fresh identity so optimizer state never aliases.
    fn clone(&self) -> Self {
        ParamSet {
            id: NEXT_SET_ID.fetch_add(1, Ordering::Relaxed),
            names: self.names.clone(),
            values: self.values.clone(),
            grads: self.grads.clone(),
        }
    }
}

impl<T: Real> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { id: NEXT_SET_ID.fetch_add(1, Ordering::Relaxed), names: vec![], values: vec![], grads: vec![] }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn key(&self, index: usize) -> ParamId {
        ParamId { set: self.id, index }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor<T>) -> usize {
        self.names.push(name.into());
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.values.len() - 1
    }

    /// He-normal weights: `N(0, 2 / fan_in)`.
    pub fn push_he(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> usize {
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let t = Tensor::from_fn(shape, |_| T::lit(normal.sample(rng)));
        self.push(name, t)
    }

    pub fn push_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> usize {
        self.push(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn value(&self, i: usize) -> &Tensor<T> {
        &self.values[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.values[i]
    }

    pub fn values(&self) -> &[Tensor<T>] {
        &self.values
    }

    pub fn grad(&self, i: usize) -> &Tensor<T> {
        &self.grads[i]
    }

    pub fn grads(&self) -> &[Tensor<T>] {
        &self.grads
    }

    pub(crate) fn grad_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.grads[i]
    }

    pub(crate) fn values_and_grads_mut(&mut self) -> (&mut [Tensor<T>], &[Tensor<T>]) {
        (&mut self.values, &self.grads)
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn total_len(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Replace every value, checking names and shapes.
    pub fn load(&mut self, named: &[(String, Tensor<T>)]) -> Result<()> {
        for (name, t) in named {
            let i = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| TensorError::InvalidArgument(format!("unknown parameter {name:?}")))?;
            if self.values[i].shape() != t.shape() {
                return Err(TensorError::ShapeMismatch(format!(
                    "parameter {name:?}: expected {:?}, got {:?}",
                    self.values[i].shape(),
                    t.shape()
                )));
            }
        }
        for name in &self.names {
            if !named.iter().any(|(n, _)| n == name) {
                return Err(TensorError::InvalidArgument(format!("missing parameter {name:?}")));
            }
        }
        for (name, t) in named {
            let i = self.names.iter().position(|n| n == name).unwrap();
            self.values[i] = t.clone();
        }
        Ok(())
    }

    pub fn named_values(&self) -> Vec<(String, Tensor<T>)> {
        self.names.iter().cloned().zip(self.values.iter().cloned()).collect()
    }

    /// Same names and values in another element type.
    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        let mut out = ParamSet::new();
        for (n, v) in self.names.iter().zip(&self.values) {
            out.push(n.clone(), v.cast());
        }
        out
    }
}
