//! Loss, reverse-mode gradients, block checkpointing and the optimizer.

pub(crate) mod engine;
mod epochs;
pub(crate) mod kernels;
mod optim;
mod sampling;

pub use engine::{
    backward_checkpoint, backward_checkpoint_traced, backward_full, backward_full_with,
    ActivationLedger, BlockPlan, CheckpointState, Reduction,
};
pub use epochs::{
    evaluate_accuracy, train_epochs, train_with, EpochRecord, TrainOptions, TrainOutcome,
};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use sampling::{positives_for, sample_link_prediction_sets};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Supervised pairs of one timestep with their class labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepLabels {
    pub pairs: Vec<(u32, u32)>,
    pub labels: Vec<usize>,
}

impl StepLabels {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, pair: (u32, u32), label: usize) {
        self.pairs.push(pair);
        self.labels.push(label);
    }
}

/// Per-timestep supervision; `steps[t]` may be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    pub steps: Vec<StepLabels>,
}

impl LabelSet {
    pub fn empty(timesteps: usize) -> Self {
        Self {
            steps: vec![StepLabels::default(); timesteps],
        }
    }

    pub fn total(&self) -> usize {
        self.steps.iter().map(StepLabels::len).sum()
    }

    pub fn validate(&self, timesteps: usize, num_vertices: usize, classes: usize) -> Result<()> {
        if self.steps.len() != timesteps {
            return Err(Error::invalid(format!(
                "labels cover {} timesteps, data has {timesteps}",
                self.steps.len()
            )));
        }
        for (t, s) in self.steps.iter().enumerate() {
            if s.pairs.len() != s.labels.len() {
                return Err(Error::invalid(format!(
                    "timestep {t}: {} pairs but {} labels",
                    s.pairs.len(),
                    s.labels.len()
                )));
            }
            if let Some(&(u, v)) = s
                .pairs
                .iter()
                .find(|&&(u, v)| u as usize >= num_vertices || v as usize >= num_vertices)
            {
                return Err(Error::invalid(format!(
                    "timestep {t}: pair ({u}, {v}) out of range for {num_vertices} vertices"
                )));
            }
            if let Some(&c) = s.labels.iter().find(|&&c| c >= classes) {
                return Err(Error::invalid(format!(
                    "timestep {t}: label {c} outside 0..{classes}"
                )));
            }
        }
        Ok(())
    }
}

/// Summed softmax cross-entropy and its gradient `softmax - onehot` per row.
pub(crate) fn cross_entropy_sum(logits: &DenseMatrix, labels: &[usize]) -> (f64, DenseMatrix) {
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|x| (x - max).exp()).sum();
        loss += max + denom.ln() - row[label];
        let g = grad.row_mut(r);
        for (gv, x) in g.iter_mut().zip(row) {
            *gv = (x - max).exp() / denom;
        }
        g[label] -= 1.0;
    }
    (loss, grad)
}

/// Mean softmax cross-entropy over rows and its gradient
/// `(softmax - onehot) / rows`. Labels index columns.
pub fn cross_entropy_loss(logits: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
    if labels.len() != logits.rows() {
        return Err(Error::invalid(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    if let Some(&c) = labels.iter().find(|&&c| c >= logits.cols()) {
        return Err(Error::invalid(format!(
            "label {c} outside 0..{}",
            logits.cols()
        )));
    }
    if labels.is_empty() {
        return Ok((0.0, grad_like(logits)));
    }
    let (sum, mut grad) = cross_entropy_sum(logits, labels);
    let n = labels.len() as f64;
    grad.scale(1.0 / n);
    Ok((sum / n, grad))
}

fn grad_like(m: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::zeros(m.rows(), m.cols())
}
