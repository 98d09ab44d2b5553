//! Named parameter tensors and their binding onto a [`Tape`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Insertion-ordered collection of named parameter tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Replaces a parameter's value, keeping its shape.
    pub fn assign(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .find(name)
            .ok_or_else(|| Error::Input(alloc::format!("unknown parameter `{name}`")))?;
        let slot = &mut self.params[id.0].value;
        if slot.shape() != value.shape() {
            return Err(Error::dim("assign", slot.shape(), value.shape()));
        }
        *slot = value;
        Ok(())
    }

    /// Total number of scalars held, frozen or not.
    pub fn scalar_count(&self) -> u64 {
        self.params.iter().map(|p| p.value.len() as u64).sum()
    }
}

/// Normal(0, std) truncated to ±2 std by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], std: f64) -> Tensor {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = crate::tensor::numel(shape);
    let data = (0..n)
        .map(|_| loop {
            let z: f64 = normal.sample(rng);
            if z.abs() <= 2.0 {
                break z * std;
            }
        })
        .collect();
    Tensor::new(shape, data).expect("shape matches data")
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], std: f64) -> Tensor {
    let normal = Normal::new(0.0, std).expect("valid std");
    let n = crate::tensor::numel(shape);
    Tensor::new(shape, (0..n).map(|_| normal.sample(rng)).collect()).expect("shape matches data")
}

/// Binds store parameters onto a tape on first use.
///
/// With `track_grads` off every parameter enters the tape as a constant, so
/// nothing is recorded for replay.
pub struct Session<'m> {
    pub tape: Tape,
    store: &'m ParamStore,
    bound: Vec<Option<Var>>,
    track_grads: bool,
}

impl<'m> Session<'m> {
    pub fn new(store: &'m ParamStore, track_grads: bool) -> Self {
        Session {
            tape: Tape::new(),
            store,
            bound: vec![None; store.len()],
            track_grads,
        }
    }

    pub fn store(&self) -> &'m ParamStore {
        self.store
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let p = &self.store.params[id.0];
        let v = self
            .tape
            .leaf(p.value.clone(), self.track_grads && p.trainable);
        self.bound[id.0] = Some(v);
        v
    }

    /// Gradients of bound trainable parameters, in store order.
    pub fn param_grads(&self, grads: &mut Gradients) -> Vec<(ParamId, Option<Tensor>)> {
        self.bound
            .iter()
            .enumerate()
            .filter(|(i, _)| self.store.params[*i].trainable)
            .map(|(i, v)| (ParamId(i), v.and_then(|v| grads.take(v))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncated_normal_is_bounded_and_deterministic() {
        let a = truncated_normal(&mut ChaCha8Rng::seed_from_u64(3), &[50, 20], 0.02);
        let b = truncated_normal(&mut ChaCha8Rng::seed_from_u64(3), &[50, 20], 0.02);
        assert!(a.bits_eq(&b));
        assert!(a.data().iter().all(|v| v.abs() <= 0.04));
        let mean = a.sum() / a.len() as f64;
        assert!(mean.abs() < 0.005);
    }

    #[test]
    fn frozen_params_bind_as_constants() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::ones(&[2]), false);
        let u = store.add("u", Tensor::ones(&[2]), true);
        let mut s = Session::new(&store, true);
        let wv = s.param(w);
        let uv = s.param(u);
        assert!(!s.tape.requires_grad(wv));
        assert!(s.tape.requires_grad(uv));
        assert_eq!(s.param(u), uv);
    }

    #[test]
    fn assign_checks_shape() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::ones(&[2]), true);
        assert!(store.assign("w", Tensor::zeros(&[3])).is_err());
        assert!(store.assign("nope", Tensor::zeros(&[2])).is_err());
        store.assign("w", Tensor::zeros(&[2])).unwrap();
        assert_eq!(store.scalar_count(), 2);
    }
}
