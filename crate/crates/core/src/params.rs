//! Named parameter storage and seeded construction.

use indexmap::IndexMap;
use mf2_tensor::{init, Real, Tensor};
use rand_chacha::ChaCha8Rng;

/// Ordered map from hierarchical name (`block.0.recurrent.gcu.fsmn.conv.1.weight`)
/// to the learnable tensor. Insertion order is construction order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T: Real = f32> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { tensors: IndexMap::new() }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors(&self) -> Vec<Tensor<T>> {
        self.tensors.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Scalar count of every parameter whose name starts with `prefix`.
    pub fn numel_under(&self, prefix: &str) -> usize {
        self.tensors
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.numel())
            .sum()
    }

    pub fn zero_grad(&self) {
        self.tensors.values().for_each(Tensor::zero_grad);
    }

    fn insert(&mut self, name: String, tensor: Tensor<T>) -> Tensor<T> {
        let t = tensor.with_grad();
        let prev = self.tensors.insert(name.clone(), t.clone());
        assert!(prev.is_none(), "duplicate parameter name {name}");
        t
    }
}

/// Registers parameters under a dotted prefix while drawing initial values
/// from one seeded stream.
pub struct ParamBuilder<'a, T: Real> {
    store: &'a mut ParamStore<T>,
    rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a, T: Real> ParamBuilder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut ChaCha8Rng) -> Self {
        Self { store, rng, prefix: String::new() }
    }

    pub fn scope(&mut self, name: impl AsRef<str>) -> ParamBuilder<'_, T> {
        let prefix = if self.prefix.is_empty() {
            name.as_ref().to_string()
        } else {
            format!("{}.{}", self.prefix, name.as_ref())
        };
        ParamBuilder { store: self.store, rng: self.rng, prefix }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    /// `uniform(±1/√fan_in)` weights.
    pub fn weight(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Tensor<T> {
        let t = init::fan_in_uniform(self.rng, shape, fan_in);
        self.store.insert(self.full_name(name), t)
    }

    pub fn full(&mut self, name: &str, shape: &[usize], value: f64) -> Tensor<T> {
        let t = Tensor::full(shape, T::cast(value));
        self.store.insert(self.full_name(name), t)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Tensor<T> {
        self.full(name, shape, 0.0)
    }

    pub fn ones(&mut self, name: &str, shape: &[usize]) -> Tensor<T> {
        self.full(name, shape, 1.0)
    }
}
