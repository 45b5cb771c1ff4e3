use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Param, ParamKey};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// First and second moment estimates for one parameter.
#[derive(Clone, Debug)]
pub struct AdamSlot {
    pub m: Tensor,
    pub v: Tensor,
    pub steps: u64,
}

/// Adam with per-parameter step counts, so a parameter that is skipped
/// (frozen or outside the current graph) keeps its moments untouched.
#[derive(Clone, Debug)]
pub struct Adam<K: Ord = ParamKey> {
    pub config: AdamConfig,
    pub lr: f64,
    pub slots: BTreeMap<K, AdamSlot>,
}

impl<K: Ord + Clone> Adam<K> {
    pub fn new(config: AdamConfig, lr: f64) -> Self {
        Self {
            config,
            lr,
            slots: BTreeMap::new(),
        }
    }

    /// Updates each `(key, var)` that has a gradient in `grads`. Returns how
    /// many tensors were updated.
    pub fn step_vars<'a>(
        &mut self,
        vars: impl IntoIterator<Item = (K, &'a Var)>,
        grads: &GradStore,
    ) -> Result<usize> {
        let AdamConfig { beta1, beta2, eps } = self.config;
        let mut updated = 0;
        for (key, var) in vars {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            // Gradients carry their backward graph; moments must not chain it.
            let g = &g.detach();
            let theta = var.as_tensor().detach();
            let slot = match self.slots.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let z = var.as_tensor().zeros_like()?;
                    e.insert(AdamSlot {
                        m: z.clone(),
                        v: z,
                        steps: 0,
                    })
                }
            };
            slot.steps += 1;
            slot.m = ((&slot.m * beta1)? + (g * (1.0 - beta1))?)?;
            slot.v = ((&slot.v * beta2)? + (g.sqr()? * (1.0 - beta2))?)?;
            let t = slot.steps as i32;
            let m_hat = (&slot.m / (1.0 - beta1.powi(t)))?;
            let v_hat = (&slot.v / (1.0 - beta2.powi(t)))?;
            let delta = (m_hat / (v_hat.sqrt()? + eps)?)?;
            let next = (theta - (delta * self.lr)?)?;
            var.set(&next)?;
            updated += 1;
        }
        Ok(updated)
    }
}

impl Adam<ParamKey> {
    /// Updates the parameters that pass `select` and have a gradient.
    pub fn step(
        &mut self,
        params: &[Param],
        grads: &GradStore,
        select: impl Fn(&ParamKey) -> bool,
    ) -> Result<usize> {
        let chosen = params
            .iter()
            .filter(|p| select(&p.key))
            .map(|p| (p.key, &p.var));
        self.step_vars(chosen, grads)
    }
}
