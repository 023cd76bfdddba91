//! The iterative part-state procedure.
//!
//! 1. Bootstrap: train Part-3 on RGB, render S₁ from its output and form
//!    u₁ = {S₁; I}.
//! 2. Each outer iteration i trains Part-6 (f) and the State network (g)
//!    jointly on `l_state(g({M·f(u_{i−1}); I}), a) + λ·l_seg(f(u_{i−1}), s)`
//!    with u_{i−1} held fixed, warm-starting from the previous iteration, and
//!    then recomputes every uᵢ = {M·f(u_{i−1}); I}.
//! 3. The unfolded variant sums that objective over a window of h iterations
//!    and lets gradients run through the S recomputation inside the window.
//!
//! Inference replays the trained iteration count: Part-3 once, Part-6 that
//! many times, then the State network on the final RGB-S image.

mod engine;
mod infer;

pub use engine::{joint_objective, part6_from_part3, EpochLog, Trainer};
pub use infer::{argmax_labels, evaluate, infer, infer_with_gt_segmentation, Prediction};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::networks::{ArchConfig, Checkpoint, CheckpointHeader, NetworkParams};
use crate::tensor::SgdConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// One outer iteration; S is never refined.
    Setting1,
    /// The full iterative procedure.
    Setting2,
    /// Unfolded training over windows of `subsequence_length` iterations.
    Setting3,
    /// State network on RGB alone (zero S channels); parts are localized by
    /// Part-3.
    Baseline1,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Setting1 => "setting1",
            Mode::Setting2 => "setting2",
            Mode::Setting3 => "setting3",
            Mode::Baseline1 => "baseline1",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "setting1" => Ok(Mode::Setting1),
            "setting2" => Ok(Mode::Setting2),
            "setting3" => Ok(Mode::Setting3),
            "baseline1" => Ok(Mode::Baseline1),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?} (expected setting1, setting2, setting3 or baseline1)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub max_iterations: usize,
    pub epochs_per_iteration: usize,
    /// Epochs of Part-3 training before the first iteration.
    pub bootstrap_epochs: usize,
    /// Window length h of the unfolded mode.
    pub subsequence_length: usize,
    pub stop_rel_improvement: f64,
    pub sgd: SgdConfig,
    pub seed: u64,
    pub mode: Mode,
    pub conv_widths: [usize; 3],
    /// Start Part-6 from the bootstrapped Part-3 (S taps zero) instead of a
    /// random draw.
    pub warm_start_part6: bool,
    /// Decay the learning rate linearly towards zero over every training
    /// stage (the bootstrap and each iteration or window).
    pub anneal_lr: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.2,
            max_iterations: 12,
            epochs_per_iteration: 3,
            bootstrap_epochs: 15,
            subsequence_length: 3,
            stop_rel_improvement: 1e-3,
            sgd: SgdConfig::default(),
            seed: 0,
            mode: Mode::Setting2,
            conv_widths: [16, 32, 32],
            warm_start_part6: true,
            anneal_lr: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be ≥ 1".into()));
        }
        if self.mode == Mode::Setting3 && !(1..=self.max_iterations).contains(&self.subsequence_length) {
            return Err(Error::Config(format!(
                "subsequence_length must be in 1..={}, got {}",
                self.max_iterations, self.subsequence_length
            )));
        }
        if !self.stop_rel_improvement.is_finite() {
            return Err(Error::Config("stop_rel_improvement must be finite".into()));
        }
        Ok(())
    }

    /// Iteration cap for the configured mode; setting 1 trains exactly once.
    pub fn iteration_cap(&self) -> usize {
        match self.mode {
            Mode::Setting1 | Mode::Baseline1 => 1,
            _ => self.max_iterations,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationLoss {
    pub seg_loss: f64,
    pub state_loss: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub mode: Mode,
    pub part3: NetworkParams<f32>,
    pub part6: NetworkParams<f32>,
    pub state: NetworkParams<f32>,
    pub current_iteration: usize,
    pub loss_history: Vec<IterationLoss>,
}

impl TrainState {
    pub fn arch(&self) -> &ArchConfig {
        &self.part3.arch
    }

    pub fn to_checkpoint(&self, schema_fingerprint: u32) -> Checkpoint {
        let a = self.arch();
        Checkpoint {
            header: CheckpointHeader {
                input_size: a.input_size,
                conv_widths: a.conv_widths,
                num_parts: a.num_parts,
                num_state_bins: a.num_state_bins,
                schema_fingerprint,
                mode: self.mode.to_string(),
                iterations: self.current_iteration,
            },
            part3: self.part3.clone(),
            part6: self.part6.clone(),
            state: self.state.clone(),
        }
    }

    /// Restores a state for inference; the loss history is not persisted.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(TrainState {
            mode: ckpt.header.mode.parse()?,
            part3: ckpt.part3.clone(),
            part6: ckpt.part6.clone(),
            state: ckpt.state.clone(),
            current_iteration: ckpt.header.iterations,
            loss_history: Vec::new(),
        })
    }
}

/// True once the iteration cap is reached or the last iteration improved
/// the total training loss by less than `stop_rel_improvement` (relative).
pub fn should_stop(state: &TrainState, cfg: &TrainConfig) -> bool {
    if state.current_iteration >= cfg.iteration_cap() {
        return true;
    }
    match state.loss_history[..] {
        [.., prev, cur] => {
            let rel = (prev.total - cur.total) / prev.total.abs().max(f64::MIN_POSITIVE);
            rel < cfg.stop_rel_improvement
        }
        _ => false,
    }
}
