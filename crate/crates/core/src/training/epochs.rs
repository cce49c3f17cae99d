use serde::Serialize;

use super::engine::backward_checkpoint;
use super::optim::{adam_step, AdamConfig, AdamState};
use super::LabelSet;
use crate::error::Result;
use crate::models::{model_forward, pair_logits, GradientSet, GraphInput, ModelConfig, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Checkpoint blocks; 1 keeps every activation.
    pub nblk: usize,
    /// Seeds parameter initialization.
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 10,
            nblk: 1,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training loss at the parameters entering the epoch.
    pub loss: f64,
    /// Test accuracy after the epoch's update; `None` without test pairs.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ParamSet,
    pub trace: Vec<EpochRecord>,
}

/// Fraction of pairs whose highest logit is their label.
pub fn evaluate_accuracy(
    cfg: &ModelConfig,
    input: &GraphInput,
    params: &ParamSet,
    labels: &LabelSet,
) -> Result<Option<f64>> {
    let total = labels.total();
    if total == 0 {
        return Ok(None);
    }
    let z = model_forward(cfg, input, params)?;
    let mut correct = 0usize;
    for (frame, step) in z.frames.iter().zip(&labels.steps) {
        if step.is_empty() {
            continue;
        }
        let logits = pair_logits(frame, &step.pairs, &params.head, &params.head_bias);
        for (r, &label) in step.labels.iter().enumerate() {
            let row = logits.row(r);
            let best = (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best });
            correct += usize::from(best == label);
        }
    }
    Ok(Some(correct as f64 / total as f64))
}

/// Epoch loop around an arbitrary gradient routine. Each epoch evaluates
/// the loss and gradients at the current parameters, takes one Adam step,
/// then measures test accuracy.
pub fn train_with(
    cfg: &ModelConfig,
    input: &GraphInput,
    test: &LabelSet,
    mut params: ParamSet,
    opts: &TrainOptions,
    mut gradient: impl FnMut(&ParamSet) -> Result<(f64, GradientSet)>,
) -> Result<TrainOutcome> {
    let mut state = AdamState::new(&params);
    let mut trace = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let (loss, grads) = gradient(&params)?;
        adam_step(&mut params, &grads, &mut state, &opts.adam)?;
        let accuracy = evaluate_accuracy(cfg, input, &params, test)?;
        trace.push(EpochRecord {
            epoch: epoch + 1,
            loss,
            accuracy,
        });
    }
    Ok(TrainOutcome { params, trace })
}

/// Seeded initialization followed by checkpointed training.
pub fn train_epochs(
    cfg: &ModelConfig,
    input: &GraphInput,
    train: &LabelSet,
    test: &LabelSet,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let params = ParamSet::init(cfg, opts.seed)?;
    train_with(cfg, input, test, params, opts, |p| {
        backward_checkpoint(cfg, input, train, p, opts.nblk)
    })
}
