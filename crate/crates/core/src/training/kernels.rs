//! Reverse-mode kernels for each stage of a block.
//!
//! All kernels accumulate parameter gradients into caller-owned buffers and
//! are linear in the incoming gradients, so partial results computed on
//! different vertex rows or timesteps can be summed afterwards.

use super::{cross_entropy_sum, StepLabels};
use crate::dtdg::MMatrix;
use crate::error::Result;
use crate::models::cells::{EvolveTrace, GcnTrace, LstmTrace};
use crate::models::forward::{BlockTrace, LayerCarry, RnnTrace};
use crate::models::params as gates;
use crate::models::{
    pair_features, pair_logits, GraphInput, LayerParams, LstmCellParams, MatrixLstmParams,
    ParamSet, GATES,
};
use crate::tensor::{
    matmul_acc, matmul_nt, matmul_tn_acc, spmm_transpose, DenseMatrix, SparseMatrix,
};

/// Gradient with respect to a layer's carry at a block boundary.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CarryGrad {
    /// Gradients of M-product input frames `first..first + frames.len()`.
    Window {
        first: usize,
        frames: Vec<DenseMatrix>,
    },
    Lstm {
        h: DenseMatrix,
        c: DenseMatrix,
    },
    Evolve {
        weight: DenseMatrix,
        cell: DenseMatrix,
    },
}

/// Loss contribution of one timestep, scaled.
pub(crate) fn step_loss(params: &ParamSet, z: &DenseMatrix, step: &StepLabels, scale: f64) -> f64 {
    if step.is_empty() {
        return 0.0;
    }
    let logits = pair_logits(z, &step.pairs, &params.head, &params.head_bias);
    cross_entropy_sum(&logits, &step.labels).0 * scale
}

/// Scaled loss of one timestep; accumulates head gradients and returns the
/// gradient with respect to the embedding frame.
pub(crate) fn step_loss_grad(
    params: &ParamSet,
    z: &DenseMatrix,
    step: &StepLabels,
    scale: f64,
    grads: &mut ParamSet,
) -> (f64, DenseMatrix) {
    let mut dz = DenseMatrix::zeros(z.rows(), z.cols());
    if step.is_empty() {
        return (0.0, dz);
    }
    let feats = pair_features(z, &step.pairs);
    let mut logits = DenseMatrix::zeros(feats.rows(), params.head.cols());
    matmul_acc(&feats, &params.head, &mut logits);
    for r in 0..logits.rows() {
        for (l, b) in logits.row_mut(r).iter_mut().zip(params.head_bias.row(0)) {
            *l += b;
        }
    }
    let (loss, mut dlogits) = cross_entropy_sum(&logits, &step.labels);
    dlogits.scale(scale);
    matmul_tn_acc(&feats, &dlogits, &mut grads.head);
    grads.head_bias.add_assign(&dlogits.column_sums());
    let dfeats = matmul_nt(&dlogits, &params.head);
    let f = z.cols();
    for (r, &(u, v)) in step.pairs.iter().enumerate() {
        let row = dfeats.row(r);
        for (d, g) in dz.row_mut(u as usize).iter_mut().zip(&row[..f]) {
            *d += g;
        }
        for (d, g) in dz.row_mut(v as usize).iter_mut().zip(&row[f..]) {
            *d += g;
        }
    }
    (loss * scale, dz)
}

/// Backward through one GCN application. Accumulates `dweight` and, when
/// `want_agg`, returns the gradient with respect to `Ã·X`.
pub(crate) fn gcn_backward(
    tr: &GcnTrace,
    weight: &DenseMatrix,
    skip_concat: bool,
    dout: &DenseMatrix,
    dweight: &mut DenseMatrix,
    want_agg: bool,
) -> Option<DenseMatrix> {
    let d = dout.zip_map(&tr.out, |g, o| if o > 0.0 { g } else { 0.0 });
    let f_in = tr.agg.cols();
    let (dpre, direct) = if skip_concat {
        (d.slice_cols(f_in, d.cols()), Some(d.slice_cols(0, f_in)))
    } else {
        (d, None)
    };
    matmul_tn_acc(&tr.agg, &dpre, dweight);
    if !want_agg {
        return None;
    }
    let mut dagg = matmul_nt(&dpre, weight);
    if let Some(direct) = direct {
        dagg.add_assign(&direct);
    }
    Some(dagg)
}

/// Backward through the M-product for the block at `start`. Returns the
/// gradients of the history frames (global frames `start - history_len..`)
/// and of the block's own input frames.
pub(crate) fn window_backward(
    m: &MMatrix,
    start: usize,
    history_len: usize,
    d_out: &[DenseMatrix],
) -> (Vec<DenseMatrix>, Vec<DenseMatrix>) {
    let (rows, cols) = d_out[0].shape();
    let first = start - history_len;
    let mut d = vec![DenseMatrix::zeros(rows, cols); history_len + d_out.len()];
    for (i, g) in d_out.iter().enumerate() {
        let t = start + i;
        let (lo, weight) = m.band(t);
        for k in lo..=t {
            d[k - first].axpy(weight, g);
        }
    }
    let block = d.split_off(history_len);
    (d, block)
}

/// Adds gradients carried back from later blocks into this block's window
/// gradients.
pub(crate) fn merge_window_grad(
    start: usize,
    d_history: &mut [DenseMatrix],
    d_block: &mut [DenseMatrix],
    incoming: &CarryGrad,
) {
    let CarryGrad::Window { first, frames } = incoming else {
        unreachable!("window layer received a non-window carry gradient");
    };
    let hist_first = start - d_history.len();
    for (j, g) in frames.iter().enumerate() {
        let k = first + j;
        if k >= start {
            d_block[k - start].add_assign(g);
        } else {
            d_history[k - hist_first].add_assign(g);
        }
    }
}

/// BPTT through a block of LSTM steps. `dh`, `dc` is the gradient arriving
/// at the block's final state. Returns per-step input gradients and the
/// gradient with respect to the initial state.
pub(crate) fn lstm_backward(
    p: &LstmCellParams,
    traces: &[LstmTrace],
    d_out: &[DenseMatrix],
    mut dh: DenseMatrix,
    mut dc: DenseMatrix,
    dp: &mut LstmCellParams,
) -> (Vec<DenseMatrix>, DenseMatrix, DenseMatrix) {
    let hid = p.hidden_len();
    let mut dx = vec![DenseMatrix::zeros(0, 0); traces.len()];
    for (i, tr) in traces.iter().enumerate().rev() {
        let n = tr.x.rows();
        let mut dz = DenseMatrix::zeros(n, GATES * hid);
        let mut dc_prev = DenseMatrix::zeros(n, hid);
        for r in 0..n {
            let gr = tr.gates.row(r);
            let dzr = dz.row_mut(r);
            for j in 0..hid {
                let ig = gr[gates::GATE_INPUT * hid + j];
                let fg = gr[gates::GATE_FORGET * hid + j];
                let og = gr[gates::GATE_OUTPUT * hid + j];
                let gg = gr[gates::GATE_CANDIDATE * hid + j];
                let tc = tr.tanh_c.get(r, j);
                let dh_rj = d_out[i].get(r, j) + dh.get(r, j);
                let dc_rj = dc.get(r, j) + dh_rj * og * (1.0 - tc * tc);
                dzr[gates::GATE_INPUT * hid + j] = dc_rj * gg * ig * (1.0 - ig);
                dzr[gates::GATE_FORGET * hid + j] = dc_rj * tr.c_prev.get(r, j) * fg * (1.0 - fg);
                dzr[gates::GATE_OUTPUT * hid + j] = dh_rj * tc * og * (1.0 - og);
                dzr[gates::GATE_CANDIDATE * hid + j] = dc_rj * ig * (1.0 - gg * gg);
                dc_prev.set(r, j, dc_rj * fg);
            }
        }
        matmul_tn_acc(&tr.x, &dz, &mut dp.w_input);
        matmul_tn_acc(&tr.h_prev, &dz, &mut dp.w_hidden);
        dp.bias.add_assign(&dz.column_sums());
        dx[i] = matmul_nt(&dz, &p.w_input);
        dh = matmul_nt(&dz, &p.w_hidden);
        dc = dc_prev;
    }
    (dx, dh, dc)
}

/// Backward through a chain of weight-evolution steps. `d_w[i]` is the
/// gradient of the weight used at step `i`; `dw`, `dc` arrive at the final
/// state. Returns the gradient with respect to the initial state.
pub(crate) fn evolve_backward(
    p: &MatrixLstmParams,
    traces: &[EvolveTrace],
    d_w: &[DenseMatrix],
    mut dw: DenseMatrix,
    mut dc: DenseMatrix,
    dp: &mut MatrixLstmParams,
) -> (DenseMatrix, DenseMatrix) {
    for (i, tr) in traces.iter().enumerate().rev() {
        dw.add_assign(&d_w[i]);
        let g = &tr.gates;
        let (rows, cols) = dw.shape();
        let mut dz: [DenseMatrix; GATES] = std::array::from_fn(|_| DenseMatrix::zeros(rows, cols));
        let mut dc_prev = DenseMatrix::zeros(rows, cols);
        for r in 0..rows {
            for j in 0..cols {
                let ig = g[gates::GATE_INPUT].get(r, j);
                let fg = g[gates::GATE_FORGET].get(r, j);
                let og = g[gates::GATE_OUTPUT].get(r, j);
                let gg = g[gates::GATE_CANDIDATE].get(r, j);
                let tc = tr.tanh_c.get(r, j);
                let dw_rj = dw.get(r, j);
                let dc_rj = dc.get(r, j) + dw_rj * og * (1.0 - tc * tc);
                dz[gates::GATE_INPUT].set(r, j, dc_rj * gg * ig * (1.0 - ig));
                dz[gates::GATE_FORGET].set(r, j, dc_rj * tr.c_prev.get(r, j) * fg * (1.0 - fg));
                dz[gates::GATE_OUTPUT].set(r, j, dw_rj * tc * og * (1.0 - og));
                dz[gates::GATE_CANDIDATE].set(r, j, dc_rj * ig * (1.0 - gg * gg));
                dc_prev.set(r, j, dc_rj * fg);
            }
        }
        let mut dw_prev = DenseMatrix::zeros(rows, cols);
        #[allow(clippy::needless_range_loop)]
        for k in 0..GATES {
            dp.scale[k].add_assign(&dz[k].zip_map(&tr.w_prev, |a, b| a * b));
            dp.bias[k].add_assign(&dz[k]);
            dw_prev.add_assign(&dz[k].zip_map(&p.scale[k], |a, b| a * b));
        }
        dw = dw_prev;
        dc = dc_prev;
    }
    (dw, dc)
}

/// Backward through the feature-space temporal component of one layer.
/// Returns gradients of the GCN outputs and the carry gradient at the block
/// start. EGCN-O layers pass gradients through; their chain is handled by
/// [`evolve_backward`] after the GCN step.
pub(crate) fn rnn_backward(
    m: &MMatrix,
    start: usize,
    lp: &LayerParams,
    gl: &mut LayerParams,
    rnn: &RnnTrace,
    d_out: Vec<DenseMatrix>,
    incoming: Option<&CarryGrad>,
) -> (Vec<DenseMatrix>, Option<CarryGrad>) {
    match (lp, gl, rnn) {
        (LayerParams::TmGcn { .. }, _, RnnTrace::Window { history_len }) => {
            let (mut d_hist, mut d_block) = window_backward(m, start, *history_len, &d_out);
            if let Some(inc) = incoming {
                merge_window_grad(start, &mut d_hist, &mut d_block, inc);
            }
            let carry = CarryGrad::Window {
                first: start - history_len,
                frames: d_hist,
            };
            (d_block, Some(carry))
        }
        (
            LayerParams::CdGcn { lstm, .. },
            LayerParams::CdGcn { lstm: dl, .. },
            RnnTrace::Lstm(tr),
        ) => {
            let (rows, hid) = d_out[0].shape();
            let (dh, dc) = match incoming {
                Some(CarryGrad::Lstm { h, c }) => (h.clone(), c.clone()),
                _ => (DenseMatrix::zeros(rows, hid), DenseMatrix::zeros(rows, hid)),
            };
            let (dx, dh0, dc0) = lstm_backward(lstm, tr, &d_out, dh, dc, dl);
            (dx, Some(CarryGrad::Lstm { h: dh0, c: dc0 }))
        }
        (LayerParams::EgcnO { .. }, _, RnnTrace::Evolve(_)) => (d_out, None),
        _ => unreachable!("parameters, gradients and trace disagree on architecture"),
    }
}

/// The GCN weight used at block step `i` of layer `lp`.
pub(crate) fn step_weight<'a>(lp: &'a LayerParams, rnn: &'a RnnTrace, i: usize) -> &'a DenseMatrix {
    match (lp, rnn) {
        (LayerParams::TmGcn { weight }, _) | (LayerParams::CdGcn { weight, .. }, _) => weight,
        (LayerParams::EgcnO { .. }, RnnTrace::Evolve(tr)) => &tr[i].w,
        _ => unreachable!("egcn-o layer without an evolve trace"),
    }
}

/// Backward through the GCN of layer `l` at block step `i` over snapshot
/// `lap`. Accumulates the weight gradient (into `d_step_w` for evolved
/// weights) and returns the gradient of the layer input frame when `l > 0`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gcn_step_backward(
    lap: &SparseMatrix,
    l: usize,
    lp: &LayerParams,
    gl: &mut LayerParams,
    rnn: &RnnTrace,
    gcn: &GcnTrace,
    i: usize,
    d_gcn_out: &DenseMatrix,
    d_step_w: Option<&mut DenseMatrix>,
) -> Result<Option<DenseMatrix>> {
    let weight = step_weight(lp, rnn, i);
    let skip = matches!(lp, LayerParams::CdGcn { .. });
    let dweight = match (gl, d_step_w) {
        (_, Some(d)) => d,
        (LayerParams::TmGcn { weight }, None) | (LayerParams::CdGcn { weight, .. }, None) => weight,
        (LayerParams::EgcnO { .. }, None) => unreachable!("evolved weights need a step gradient"),
    };
    match gcn_backward(gcn, weight, skip, d_gcn_out, dweight, l > 0) {
        Some(dagg) => Ok(Some(spmm_transpose(lap, &dagg)?)),
        None => Ok(None),
    }
}

/// Full reverse pass over one block whose forward trace is at hand.
/// `incoming` holds the carry gradients from the following block. Returns
/// the summed scaled loss of the block and the carry gradients at its start.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_block(
    input: &GraphInput,
    params: &ParamSet,
    trace: &BlockTrace,
    carry_in: &[LayerCarry],
    labels: &[StepLabels],
    scale: f64,
    incoming: Option<&[CarryGrad]>,
    grads: &mut ParamSet,
) -> Result<Vec<Option<CarryGrad>>> {
    let start = trace.start;
    let len = trace.len();
    let mut d_above = Vec::with_capacity(len);
    for (i, z) in trace.embeddings().iter().enumerate() {
        let (_, dz) = step_loss_grad(params, z, &labels[i], scale, grads);
        d_above.push(dz);
    }
    let mut outgoing = vec![None; params.layers.len()];
    for l in (0..params.layers.len()).rev() {
        let layer = &trace.layers[l];
        let lp = &params.layers[l];
        let inc = incoming.and_then(|v| v.get(l));
        let (d_gcn_out, carry) = rnn_backward(
            input.m_matrix(),
            start,
            lp,
            &mut grads.layers[l],
            &layer.rnn,
            std::mem::take(&mut d_above),
            inc,
        );
        let mut d_step_w: Vec<DenseMatrix> = match &layer.rnn {
            RnnTrace::Evolve(tr) => tr
                .iter()
                .map(|s| DenseMatrix::zeros(s.w.rows(), s.w.cols()))
                .collect(),
            _ => Vec::new(),
        };
        let mut d_below = Vec::with_capacity(len);
        #[allow(clippy::needless_range_loop)]
        for i in 0..len {
            let dsw = d_step_w.get_mut(i);
            if let Some(d) = gcn_step_backward(
                input.laplacians().snapshot(start + i),
                l,
                lp,
                &mut grads.layers[l],
                &layer.rnn,
                &layer.gcn[i],
                i,
                &d_gcn_out[i],
                dsw,
            )? {
                d_below.push(d);
            }
        }
        outgoing[l] = match carry {
            Some(c) => Some(c),
            None => Some(evolve_layer_backward(
                lp,
                &mut grads.layers[l],
                &layer.rnn,
                &d_step_w,
                inc,
                &carry_in[l],
            )),
        };
        d_above = d_below;
    }
    Ok(outgoing)
}

/// Runs the evolution chain backward for an EGCN-O layer.
pub(crate) fn evolve_layer_backward(
    lp: &LayerParams,
    gl: &mut LayerParams,
    rnn: &RnnTrace,
    d_step_w: &[DenseMatrix],
    incoming: Option<&CarryGrad>,
    carry_in: &LayerCarry,
) -> CarryGrad {
    let (
        LayerParams::EgcnO { evolve, .. },
        LayerParams::EgcnO { evolve: de, .. },
        RnnTrace::Evolve(tr),
    ) = (lp, gl, rnn)
    else {
        unreachable!("evolution backward on a non-egcn layer");
    };
    let LayerCarry::Evolve { weight, .. } = carry_in else {
        unreachable!("egcn-o layer without an evolve carry");
    };
    let (dw, dc) = match incoming {
        Some(CarryGrad::Evolve { weight, cell }) => (weight.clone(), cell.clone()),
        _ => (
            DenseMatrix::zeros(weight.rows(), weight.cols()),
            DenseMatrix::zeros(weight.rows(), weight.cols()),
        ),
    };
    let (dw0, dc0) = evolve_backward(evolve, tr, d_step_w, dw, dc, de);
    CarryGrad::Evolve {
        weight: dw0,
        cell: dc0,
    }
}

/// Routes carry gradients at the start of the timeline into parameters:
/// the evolution chain starts from the learnable initial weight.
pub(crate) fn finish_initial_carry(grads: &mut ParamSet, carry: &[Option<CarryGrad>]) {
    for (gl, c) in grads.layers.iter_mut().zip(carry) {
        if let (LayerParams::EgcnO { initial_weight, .. }, Some(CarryGrad::Evolve { weight, .. })) =
            (gl, c)
        {
            initial_weight.add_assign(weight);
        }
    }
}
