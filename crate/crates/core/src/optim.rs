//! Adam with decoupled weight decay.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    cfg: AdamWConfig,
    lr: f64,
    steps: u64,
    moments: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl AdamW {
    pub fn new(lr: f64, cfg: AdamWConfig) -> Self {
        AdamW {
            cfg,
            lr,
            steps: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Only the listed parameters are touched; a `None`
    /// gradient counts as zero.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[(ParamId, Option<crate::Tensor>)]) -> Result<()> {
        self.steps += 1;
        let t = self.steps as i32;
        let c = self.cfg;
        let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, t as f64);
        if self.moments.len() < store.len() {
            self.moments.resize(store.len(), None);
        }
        for (id, g) in grads {
            if !store.get(*id).trainable {
                return Err(Error::Usage(alloc::format!(
                    "optimizer asked to update frozen `{}`",
                    store.get(*id).name
                )));
            }
            let value = store.value_mut(*id);
            let n = value.len();
            if let Some(g) = g {
                if g.shape() != value.shape() {
                    return Err(Error::dim("adamw", value.shape(), g.shape()));
                }
            }
            let (m, v) = self.moments[id.0].get_or_insert_with(|| (alloc::vec![0.0; n], alloc::vec![0.0; n]));
            let data = value.data_mut();
            for i in 0..n {
                let gi = g.as_ref().map_or(0.0, |g| g.data()[i]);
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= self.lr * (mhat / (libm::sqrt(vhat) + c.eps) + c.weight_decay * data[i]);
            }
        }
        Ok(())
    }
}
