//! Block-wise forward execution with recurrent carry between blocks.
//!
//! A block covers timesteps `start..start + len` (0-indexed). Each layer runs
//! its GCN on every timestep of the block, then its temporal component over
//! the block, seeded from the carry left by the previous block. Running the
//! whole timeline as one block from the initial carry is the plain forward
//! pass.

use super::cells::{evolve_cell, gcn_apply, lstm_cell, EvolveTrace, GcnTrace, LstmTrace};
use super::params::{LayerParams, LstmCellParams, MatrixLstmParams, ParamSet};
use super::{GraphInput, ModelConfig};
use crate::dtdg::{m_combine, MMatrix};
use crate::error::{Error, Result};
use crate::tensor::{spmm, DenseMatrix};

/// Recurrent state of one layer at a block boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerCarry {
    /// M-product input frames of the most recent timesteps, oldest first;
    /// at most `w - 1` of them.
    Window { history: Vec<DenseMatrix> },
    /// Per-vertex LSTM hidden and cell state.
    Lstm { h: DenseMatrix, c: DenseMatrix },
    /// Evolved GCN weight and matrix-LSTM cell state.
    Evolve {
        weight: DenseMatrix,
        cell: DenseMatrix,
    },
}

impl LayerCarry {
    /// Vertex-feature frames held by this carry.
    pub fn frames(&self) -> usize {
        match self {
            LayerCarry::Window { history } => history.len(),
            LayerCarry::Lstm { .. } => 2,
            LayerCarry::Evolve { .. } => 0,
        }
    }

    /// Restriction to vertex rows `lo..hi`. Weight-space carries are
    /// replicated unchanged.
    pub(crate) fn rows(&self, lo: usize, hi: usize) -> LayerCarry {
        match self {
            LayerCarry::Window { history } => LayerCarry::Window {
                history: history.iter().map(|f| f.slice_rows(lo, hi)).collect(),
            },
            LayerCarry::Lstm { h, c } => LayerCarry::Lstm {
                h: h.slice_rows(lo, hi),
                c: c.slice_rows(lo, hi),
            },
            LayerCarry::Evolve { .. } => self.clone(),
        }
    }
}

/// Carry before the first timestep.
pub fn initial_carry(cfg: &ModelConfig, params: &ParamSet, rows: usize) -> Vec<LayerCarry> {
    params
        .layers
        .iter()
        .enumerate()
        .map(|(l, lp)| match lp {
            LayerParams::TmGcn { .. } => LayerCarry::Window {
                history: Vec::new(),
            },
            LayerParams::CdGcn { .. } => {
                let (_, hid) = cfg.layer_dims(l);
                LayerCarry::Lstm {
                    h: DenseMatrix::zeros(rows, hid),
                    c: DenseMatrix::zeros(rows, hid),
                }
            }
            LayerParams::EgcnO { initial_weight, .. } => LayerCarry::Evolve {
                weight: initial_weight.clone(),
                cell: DenseMatrix::zeros(initial_weight.rows(), initial_weight.cols()),
            },
        })
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) enum RnnTrace {
    Window { history_len: usize },
    Lstm(Vec<LstmTrace>),
    Evolve(Vec<EvolveTrace>),
}

#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    pub gcn: Vec<GcnTrace>,
    pub rnn: RnnTrace,
    /// Layer outputs, one frame per block timestep.
    pub outputs: Vec<DenseMatrix>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockTrace {
    pub start: usize,
    pub layers: Vec<LayerTrace>,
}

impl BlockTrace {
    pub fn len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.outputs.len())
    }

    pub fn embeddings(&self) -> &[DenseMatrix] {
        self.layers.last().map_or(&[], |l| &l.outputs)
    }

    /// Activation frames retained: GCN output and temporal output per layer
    /// per timestep.
    pub fn frames(&self) -> usize {
        2 * self.layers.len() * self.len()
    }
}

/// M-product over block frames for global timesteps `start..`, with
/// `history` holding the preceding input frames. Returns the outputs and
/// the history for the next block (`w - 1` most recent frames).
pub(crate) fn window_sequence(
    m: &MMatrix,
    start: usize,
    inputs: &[DenseMatrix],
    history: &[DenseMatrix],
) -> (Vec<DenseMatrix>, Vec<DenseMatrix>) {
    let first = start - history.len();
    let shape = inputs
        .first()
        .or(history.first())
        .map_or((0, 0), DenseMatrix::shape);
    let frame = |k: usize| {
        if k >= start {
            &inputs[k - start]
        } else {
            &history[k - first]
        }
    };
    let outputs = (0..inputs.len())
        .map(|i| m_combine(m, start + i, shape, frame))
        .collect();
    let end = start + inputs.len();
    let keep = (m.window() - 1).min(end);
    let next_history = (end - keep..end).map(|k| frame(k).clone()).collect();
    (outputs, next_history)
}

pub(crate) fn lstm_sequence(
    p: &LstmCellParams,
    inputs: &[DenseMatrix],
    h: &DenseMatrix,
    c: &DenseMatrix,
) -> Vec<LstmTrace> {
    let mut traces: Vec<LstmTrace> = Vec::with_capacity(inputs.len());
    for x in inputs {
        let next = match traces.last() {
            Some(prev) => lstm_cell(p, x, &prev.h, &prev.c),
            None => lstm_cell(p, x, h, c),
        };
        traces.push(next);
    }
    traces
}

pub(crate) fn evolve_sequence(
    p: &MatrixLstmParams,
    steps: usize,
    weight: &DenseMatrix,
    cell: &DenseMatrix,
) -> Vec<EvolveTrace> {
    let mut traces: Vec<EvolveTrace> = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next = match traces.last() {
            Some(prev) => evolve_cell(p, &prev.w, &prev.c),
            None => evolve_cell(p, weight, cell),
        };
        traces.push(next);
    }
    traces
}

/// Carry left behind by a temporal component after a block.
pub(crate) fn carry_after(
    rnn: &RnnTrace,
    carry_in: &LayerCarry,
    next_history: Vec<DenseMatrix>,
) -> LayerCarry {
    match (rnn, carry_in) {
        (RnnTrace::Window { .. }, _) => LayerCarry::Window {
            history: next_history,
        },
        (RnnTrace::Lstm(tr), _) => match tr.last() {
            Some(last) => LayerCarry::Lstm {
                h: last.h.clone(),
                c: last.c.clone(),
            },
            None => carry_in.clone(),
        },
        (RnnTrace::Evolve(tr), _) => match tr.last() {
            Some(last) => LayerCarry::Evolve {
                weight: last.w.clone(),
                cell: last.c.clone(),
            },
            None => carry_in.clone(),
        },
    }
}

/// Runs timesteps `start..start + len` through every layer.
pub(crate) fn forward_block(
    input: &GraphInput,
    params: &ParamSet,
    start: usize,
    len: usize,
    carry: &[LayerCarry],
) -> Result<(BlockTrace, Vec<LayerCarry>)> {
    if start + len > input.num_timesteps() {
        return Err(Error::invalid(format!(
            "block {start}..{} exceeds {} timesteps",
            start + len,
            input.num_timesteps()
        )));
    }
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(params.layers.len());
    let mut next_carry = Vec::with_capacity(params.layers.len());
    for (l, (lp, carry_in)) in params.layers.iter().zip(carry).enumerate() {
        let evolved = match (lp, carry_in) {
            (LayerParams::EgcnO { evolve, .. }, LayerCarry::Evolve { weight, cell }) => {
                evolve_sequence(evolve, len, weight, cell)
            }
            (LayerParams::EgcnO { .. }, _) => {
                return Err(Error::invalid("egcn-o layer needs an evolve carry"));
            }
            _ => Vec::new(),
        };
        let mut gcn = Vec::with_capacity(len);
        #[allow(clippy::needless_range_loop)]
        for i in 0..len {
            let t = start + i;
            let agg = match layers.last() {
                None => input.first_layer().frame(t).clone(),
                Some(below) => spmm(input.laplacians().snapshot(t), &below.outputs[i])?,
            };
            let trace = match lp {
                LayerParams::TmGcn { weight } => gcn_apply(agg, weight, false),
                LayerParams::CdGcn { weight, .. } => gcn_apply(agg, weight, true),
                LayerParams::EgcnO { .. } => gcn_apply(agg, &evolved[i].w, false),
            };
            gcn.push(trace);
        }
        let gcn_out: Vec<DenseMatrix> = gcn.iter().map(|g| g.out.clone()).collect();
        let (rnn, outputs, history) = match (lp, carry_in) {
            (LayerParams::TmGcn { .. }, LayerCarry::Window { history }) => {
                let (out, next) = window_sequence(input.m_matrix(), start, &gcn_out, history);
                (
                    RnnTrace::Window {
                        history_len: history.len(),
                    },
                    out,
                    next,
                )
            }
            (LayerParams::CdGcn { lstm, .. }, LayerCarry::Lstm { h, c }) => {
                let tr = lstm_sequence(lstm, &gcn_out, h, c);
                let out = tr.iter().map(|s| s.h.clone()).collect();
                (RnnTrace::Lstm(tr), out, Vec::new())
            }
            (LayerParams::EgcnO { .. }, _) => (RnnTrace::Evolve(evolved), gcn_out, Vec::new()),
            _ => {
                return Err(Error::invalid(format!(
                    "layer {} carry does not match its architecture",
                    l + 1
                )))
            }
        };
        next_carry.push(carry_after(&rnn, carry_in, history));
        layers.push(LayerTrace { gcn, rnn, outputs });
    }
    Ok((BlockTrace { start, layers }, next_carry))
}
