//! The three model families: a one-hidden-layer black box, a sparse
//! autoencoder, and a jointly trained linear concept bottleneck model.
//!
//! All three are trained by mini-batch Adam with a per-epoch reshuffle driven
//! by `TrainConfig::seed`, so a trained model is a pure function of its data
//! and config. Weights start at `N(0, 1/fan_in)` and biases at zero.

mod adam;
mod blackbox;
mod cbm;
mod io;
mod sae;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use blackbox::{bb_train, BbOutput, BlackBoxModel};
pub use cbm::{cbm_train, concept_mse, CbmModel};
pub use sae::{sae_train, SaeModel};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Black-box hidden width.
    pub hidden: usize,
    /// Number of SAE latents.
    pub k_sae: usize,
    pub lambda_sae: f64,
    pub lambda_c: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 512,
            hidden: 128,
            k_sae: 60,
            lambda_sae: 1e-3,
            lambda_c: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        if self.lambda_sae < 0.0 || self.lambda_c < 0.0 {
            return Err(Error::InvalidArgument(
                "regularisation weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Loss trajectory of a training run: the full-data loss before the first
/// update, then after every epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct LossHistory {
    pub initial: f64,
    pub per_epoch: Vec<f64>,
}

impl LossHistory {
    pub fn final_loss(&self) -> f64 {
        *self.per_epoch.last().unwrap_or(&self.initial)
    }
}

/// Parameter tensors exposed to the optimiser, in a fixed order.
pub(crate) trait Params: Sized {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    fn zeros_like(&self) -> Self;
}

/// Shared mini-batch Adam loop. `batch_grad` returns the mean loss and its
/// gradient over the given example indices; `full_loss` scores the whole set.
pub(crate) fn fit<M: Params>(
    model: &mut M,
    n: usize,
    cfg: &TrainConfig,
    rng: &mut RngStream,
    batch_grad: impl Fn(&M, &[usize]) -> (f64, M),
    full_loss: impl Fn(&M) -> f64,
) -> Result<LossHistory> {
    let initial = full_loss(model);
    if !initial.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let lens: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut state = AdamState::new(&lens);
    let adam = cfg.adam();
    let mut order: Vec<usize> = (0..n).collect();
    let mut per_epoch = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grad) = batch_grad(model, batch);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            let grads = grad.tensors();
            adam_step(&mut model.tensors_mut(), &grads, &mut state, &adam);
        }
        let loss = full_loss(model);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        per_epoch.push(loss);
    }
    Ok(LossHistory { initial, per_epoch })
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit against `y`, via `softplus(l) - y l`.
#[inline]
pub fn bce_with_logit(logit: f64, y: u8) -> f64 {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    softplus - y as f64 * logit
}

/// Fraction of `probs` on the correct side of 0.5.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> f64 {
    assert_eq!(probs.len(), labels.len());
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p > 0.5) == (y == 1))
        .count();
    hits as f64 / labels.len() as f64
}

pub(crate) fn init_normal(rng: &mut RngStream, len: usize, fan_in: usize) -> Vec<f64> {
    let std = (1.0 / fan_in as f64).sqrt();
    (0..len).map(|_| std * rng.normal()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_matches_naive_form() {
        for &l in &[-3.0, -0.2, 0.0, 0.7, 5.0] {
            let p = sigmoid(l);
            let naive1 = -p.ln();
            let naive0 = -(1.0 - p).ln();
            assert!((bce_with_logit(l, 1) - naive1).abs() < 1e-12);
            assert!((bce_with_logit(l, 0) - naive0).abs() < 1e-12);
        }
        // saturated logits stay finite
        assert!(bce_with_logit(800.0, 0).is_finite());
        assert!(bce_with_logit(-800.0, 1).is_finite());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    /// Central differences over every parameter, compared with the analytic
    /// gradient by relative error on the full gradient vector.
    fn check_gradient<M: Params + Clone>(model: &M, loss_grad: impl Fn(&M) -> (f64, M)) {
        let (_, analytic) = loss_grad(model);
        let h = 1e-5;
        let mut numeric = Vec::new();
        let lens: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        for (t, &len) in lens.iter().enumerate() {
            for i in 0..len {
                let mut plus = model.clone();
                plus.tensors_mut()[t][i] += h;
                let mut minus = model.clone();
                minus.tensors_mut()[t][i] -= h;
                numeric.push((loss_grad(&plus).0 - loss_grad(&minus).0) / (2.0 * h));
            }
        }
        let analytic: Vec<f64> = analytic.tensors().concat();
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
        assert!(
            diff / scale <= 1e-4,
            "relative gradient error {}",
            diff / scale
        );
    }

    fn random_problem(
        seed: u64,
        n: usize,
        r: usize,
    ) -> (RngStream, crate::numerics::Matrix, Vec<u8>) {
        let mut rng = RngStream::new(seed);
        let a = rng.normal_matrix(n, r, 1.0);
        let y = (0..n).map(|_| rng.below(2) as u8).collect();
        (rng, a, y)
    }

    #[test]
    fn blackbox_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (mut rng, a, y) = random_problem(seed, 20, 5);
            let mut m = BlackBoxModel::init(5, 4, &mut rng);
            m.b_h.iter_mut().for_each(|b| *b = 0.3 * rng.normal());
            m.b_l = rng.normal();
            let idx: Vec<usize> = (0..20).collect();
            check_gradient(&m, |m| m.loss_and_grad(&a, &y, &idx));
        }
    }

    #[test]
    fn sae_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (mut rng, a, _) = random_problem(seed, 20, 5);
            let mut m = SaeModel::init(5, 4, &mut rng);
            m.b.iter_mut().for_each(|b| *b = 0.3 * rng.normal());
            let idx: Vec<usize> = (0..20).collect();
            check_gradient(&m, |m| m.loss_and_grad(&a, 0.1, &idx));
        }
    }

    #[test]
    fn cbm_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (mut rng, a, y) = random_problem(seed, 20, 5);
            let c = rng.normal_matrix(20, 3, 1.0);
            let mut m = CbmModel::init(5, 3, &mut rng);
            m.w = (0..3).map(|_| rng.normal()).collect();
            m.b = rng.normal();
            let idx: Vec<usize> = (0..20).collect();
            check_gradient(&m, |m| m.loss_and_grad(&a, &c, &y, 0.7, &idx));
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))));
    }
}
