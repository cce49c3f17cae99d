use std::ops::Range;

use serde::Serialize;

use super::kernels::{backward_block, finish_initial_carry, step_loss, CarryGrad};
use super::LabelSet;
use crate::error::{Error, Result};
use crate::models::forward::{forward_block, initial_carry, LayerCarry};
use crate::models::{GradientSet, GraphInput, ModelConfig, ParamSet};

/// Split of the timeline into `nblk` equal contiguous blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    timesteps: usize,
    nblk: usize,
}

impl BlockPlan {
    pub fn new(timesteps: usize, nblk: usize) -> Result<Self> {
        if nblk == 0 || timesteps == 0 || !timesteps.is_multiple_of(nblk) {
            return Err(Error::config(format!(
                "block count {nblk} must divide T = {timesteps}"
            )));
        }
        Ok(Self { timesteps, nblk })
    }

    pub fn nblk(&self) -> usize {
        self.nblk
    }

    pub fn bsize(&self) -> usize {
        self.timesteps / self.nblk
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    /// 0-indexed timesteps of block `b`.
    pub fn range(&self, b: usize) -> Range<usize> {
        b * self.bsize()..(b + 1) * self.bsize()
    }

    pub fn ranges(&self) -> impl DoubleEndedIterator<Item = Range<usize>> + ExactSizeIterator + '_ {
        (0..self.nblk).map(|b| self.range(b))
    }
}

/// Recurrent state entering block `block`: everything needed to rerun it.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointState {
    pub block: usize,
    pub carry: Vec<LayerCarry>,
}

impl CheckpointState {
    /// Vertex-feature frames held.
    pub fn frames(&self) -> usize {
        self.carry.iter().map(LayerCarry::frames).sum()
    }
}

/// Logical count of retained activation frames (one `N x F` matrix per
/// frame). A block holds a GCN output and a temporal output per layer per
/// timestep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ActivationLedger {
    pub live_frames: usize,
    pub peak_live_frames: usize,
    pub pi_records: usize,
    pub pi_frames: usize,
    pub peak_pi_records: usize,
    pub peak_total_frames: usize,
}

impl ActivationLedger {
    pub(crate) fn touch(&mut self) {
        self.peak_live_frames = self.peak_live_frames.max(self.live_frames);
        self.peak_pi_records = self.peak_pi_records.max(self.pi_records);
        self.peak_total_frames = self
            .peak_total_frames
            .max(self.live_frames + self.pi_frames);
    }

    pub(crate) fn hold(&mut self, frames: usize) {
        self.live_frames += frames;
        self.touch();
    }

    pub(crate) fn release(&mut self, frames: usize) {
        self.live_frames -= frames;
    }

    pub(crate) fn store_pi(&mut self, frames: usize) {
        self.pi_records += 1;
        self.pi_frames += frames;
        self.touch();
    }

    pub(crate) fn drop_pi(&mut self, frames: usize) {
        self.pi_records -= 1;
        self.pi_frames -= frames;
    }

    /// Peak number of timesteps whose activations were held at once.
    pub fn peak_timesteps(&self, layers: usize) -> usize {
        self.peak_live_frames / (2 * layers.max(1))
    }
}

/// How per-pair losses combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

pub(crate) fn loss_scale(labels: &LabelSet, reduction: Reduction) -> f64 {
    match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => match labels.total() {
            0 => 0.0,
            n => 1.0 / n as f64,
        },
    }
}

pub(crate) fn check_inputs(
    cfg: &ModelConfig,
    input: &GraphInput,
    labels: &LabelSet,
    params: &ParamSet,
) -> Result<()> {
    cfg.check_params(params)?;
    if input.first_layer().frame_shape().1 != cfg.input_len() {
        return Err(Error::config("input features do not match the model"));
    }
    labels.validate(input.num_timesteps(), input.num_vertices(), cfg.classes)
}

/// Loss and exact gradients with every activation of the timeline held.
pub fn backward_full(
    cfg: &ModelConfig,
    input: &GraphInput,
    labels: &LabelSet,
    params: &ParamSet,
) -> Result<(f64, GradientSet)> {
    backward_full_with(cfg, input, labels, params, Reduction::Mean)
}

pub fn backward_full_with(
    cfg: &ModelConfig,
    input: &GraphInput,
    labels: &LabelSet,
    params: &ParamSet,
    reduction: Reduction,
) -> Result<(f64, GradientSet)> {
    check_inputs(cfg, input, labels, params)?;
    let scale = loss_scale(labels, reduction);
    let t_len = input.num_timesteps();
    let carry = initial_carry(cfg, params, input.num_vertices());
    let (trace, _) = forward_block(input, params, 0, t_len, &carry)?;
    let mut loss = 0.0;
    for (t, z) in trace.embeddings().iter().enumerate() {
        loss += step_loss(params, z, &labels.steps[t], scale);
    }
    let mut grads = params.zeros_like();
    let out = backward_block(
        input,
        params,
        &trace,
        &carry,
        &labels.steps,
        scale,
        None,
        &mut grads,
    )?;
    finish_initial_carry(&mut grads, &out);
    Ok((loss, grads))
}

/// Gradients computed block by block: a forward sweep keeps only the carry
/// entering each block, then a reverse sweep reruns each block from its
/// carry and backpropagates through it. The final block's activations are
/// still live when the sweep turns around, so it is not rerun.
pub fn backward_checkpoint(
    cfg: &ModelConfig,
    input: &GraphInput,
    labels: &LabelSet,
    params: &ParamSet,
    nblk: usize,
) -> Result<(f64, GradientSet)> {
    backward_checkpoint_traced(cfg, input, labels, params, nblk).map(|(l, g, _)| (l, g))
}

/// [`backward_checkpoint`] that also reports activation bookkeeping.
pub fn backward_checkpoint_traced(
    cfg: &ModelConfig,
    input: &GraphInput,
    labels: &LabelSet,
    params: &ParamSet,
    nblk: usize,
) -> Result<(f64, GradientSet, ActivationLedger)> {
    let plan = BlockPlan::new(input.num_timesteps(), nblk)?;
    check_inputs(cfg, input, labels, params)?;
    let scale = loss_scale(labels, Reduction::Mean);
    let mut ledger = ActivationLedger::default();

    let mut states: Vec<CheckpointState> = Vec::with_capacity(nblk);
    let mut carry = initial_carry(cfg, params, input.num_vertices());
    let mut loss = 0.0;
    let mut last_trace = None;
    for (b, range) in plan.ranges().enumerate() {
        let state = CheckpointState { block: b, carry };
        ledger.store_pi(state.frames());
        let (trace, next) = forward_block(input, params, range.start, range.len(), &state.carry)?;
        ledger.hold(trace.frames());
        for (i, z) in trace.embeddings().iter().enumerate() {
            loss += step_loss(params, z, &labels.steps[range.start + i], scale);
        }
        states.push(state);
        carry = next;
        if b + 1 == nblk {
            // The reverse sweep starts here; no rerun needed.
            last_trace = Some(trace);
        } else {
            ledger.release(trace.frames());
        }
    }

    let mut grads = params.zeros_like();
    let mut incoming: Option<Vec<CarryGrad>> = None;
    for (b, range) in plan.ranges().enumerate().rev() {
        let state = &states[b];
        let trace = match last_trace.take() {
            Some(t) => t,
            None => {
                let (t, _) = forward_block(input, params, range.start, range.len(), &state.carry)?;
                ledger.hold(t.frames());
                t
            }
        };
        let out = backward_block(
            input,
            params,
            &trace,
            &state.carry,
            &labels.steps[range.clone()],
            scale,
            incoming.as_deref(),
            &mut grads,
        )?;
        ledger.release(trace.frames());
        ledger.drop_pi(state.frames());
        if b == 0 {
            finish_initial_carry(&mut grads, &out);
        }
        incoming = Some(
            out.into_iter()
                .map(|c| c.expect("every layer yields a carry gradient"))
                .collect(),
        );
    }
    Ok((loss, grads, ledger))
}
