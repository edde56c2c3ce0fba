//! Adam with bias correction, plus gradient accumulation for virtual batches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tape::{Gradients, ParamId};
use crate::nn::Tensor;

/// Anything that exposes parameter tensors by [`ParamId`].
pub trait ParamStore {
    fn param(&self, id: ParamId) -> &Tensor;
    fn param_mut(&mut self, id: ParamId) -> &mut Tensor;
}

impl ParamStore for Vec<Tensor> {
    fn param(&self, id: ParamId) -> &Tensor {
        &self[id]
    }

    fn param_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self[id]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one group of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    ids: Vec<ParamId>,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &impl ParamStore, ids: Vec<ParamId>) -> Self {
        let zeros: Vec<Tensor> = ids.iter().map(|&id| Tensor::zeros(store.param(id).shape())).collect();
        Self {
            config,
            ids,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn reset(&mut self) {
        for m in self.first_moment.iter_mut().chain(self.second_moment.iter_mut()) {
            m.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        self.step_count = 0;
    }

    /// One bias-corrected Adam update of every parameter in the group.
    /// Parameters without an entry in `grads` see a zero gradient.
    pub fn step(&mut self, store: &mut impl ParamStore, grads: &Gradients) -> Result<()> {
        if self
            .ids
            .iter()
            .any(|&id| grads.get(id).is_some_and(|g| !g.all_finite()))
        {
            return Err(Error::NonFiniteGradient);
        }
        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (slot, &id) in self.ids.iter().enumerate() {
            let grad = grads.get(id);
            let m = self.first_moment[slot].data_mut();
            let v = self.second_moment[slot].data_mut();
            let p = store.param_mut(id).data_mut();
            for j in 0..p.len() {
                let g = grad.map_or(0.0, |g| g.data()[j]);
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Sums `L` sub-batch gradients, each weighted `1/L`, so that one optimizer
/// step on the result equals a step on the concatenated batch of `L * B_s`.
#[derive(Clone, Debug)]
pub struct GradientAccumulator {
    sub_batches: usize,
    sub_batch_size: Option<usize>,
    received: usize,
    running: Gradients,
}

impl GradientAccumulator {
    pub fn new(sub_batches: usize) -> Self {
        assert!(sub_batches >= 1, "need at least one sub-batch");
        Self {
            sub_batches,
            sub_batch_size: None,
            received: 0,
            running: Gradients::default(),
        }
    }

    pub fn sub_batches(&self) -> usize {
        self.sub_batches
    }

    pub fn received(&self) -> usize {
        self.received
    }

    pub fn is_complete(&self) -> bool {
        self.received == self.sub_batches
    }

    /// Adds the gradient of one sub-batch's mean loss.
    pub fn add(&mut self, grads: &Gradients, batch_size: usize) -> Result<()> {
        match self.sub_batch_size {
            Some(expected) if expected != batch_size => {
                return Err(Error::SubBatchSize {
                    expected,
                    actual: batch_size,
                })
            }
            _ => self.sub_batch_size = Some(batch_size),
        }
        if self.is_complete() {
            return Err(Error::InvalidInput(format!(
                "accumulator already holds {} sub-batches",
                self.sub_batches
            )));
        }
        self.running.accumulate(grads, 1.0 / self.sub_batches as f64);
        self.received += 1;
        Ok(())
    }

    pub fn gradients(&self) -> &Gradients {
        &self.running
    }

    pub fn take(&mut self) -> Gradients {
        self.received = 0;
        self.sub_batch_size = None;
        std::mem::take(&mut self.running)
    }
}

/// Runs `L` sub-batches through `sub_batch` (which returns its loss, gradients
/// and batch size) and applies a single optimizer step. The parameters are not
/// touched until every sub-batch has been evaluated. Returns the mean loss.
pub fn accumulate_and_step<S, F>(
    accumulator: &mut GradientAccumulator,
    store: &mut S,
    state: &mut AdamState,
    mut sub_batch: F,
) -> Result<f64>
where
    S: ParamStore,
    F: FnMut(usize, &S) -> Result<(f64, Gradients, usize)>,
{
    let mut loss = 0.0;
    for l in 0..accumulator.sub_batches() {
        let (sub_loss, grads, size) = sub_batch(l, store)?;
        accumulator.add(&grads, size)?;
        loss += sub_loss / accumulator.sub_batches() as f64;
    }
    let grads = accumulator.take();
    state.step(store, &grads)?;
    Ok(loss)
}
