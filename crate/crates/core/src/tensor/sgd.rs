use super::{Element, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 16,
            weight_decay: 1e-4,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Momentum buffers, one per parameter tensor.
#[derive(Clone, Debug, Default)]
pub struct Velocity<T: Element = f32> {
    buffers: Vec<Vec<T>>,
}

impl<T: Element> Velocity<T> {
    pub fn new() -> Self {
        Velocity {
            buffers: Vec::new(),
        }
    }
}

/// One momentum SGD update: `v ← μ·v − η·(g + λ·p)`, `p ← p + v`.
///
/// A zero learning rate leaves the parameters untouched (validation of the
/// config is the caller's business).
pub fn sgd_step<T: Element>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    velocity: &mut Velocity<T>,
    cfg: &SgdConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim(
            "sgd_step",
            format!("{} parameters, {} gradients", params.len(), grads.len()),
        ));
    }
    if velocity.buffers.is_empty() {
        velocity.buffers = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
    }
    let lr = T::from_f64(cfg.learning_rate);
    let mu = T::from_f64(cfg.momentum);
    let wd = T::from_f64(cfg.weight_decay);
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut velocity.buffers) {
        if p.shape() != g.shape() || v.len() != p.len() {
            return Err(Error::dim(
                "sgd_step",
                format!("parameter {:?} vs gradient {:?}", p.shape(), g.shape()),
            ));
        }
        for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
            *vv = mu * *vv - lr * (gv + wd * *pv);
            *pv += *vv;
        }
    }
    Ok(())
}
