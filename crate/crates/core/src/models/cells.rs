//! Forward kernels that also record what the backward pass needs.

use super::params::{
    LstmCellParams, MatrixLstmParams, GATES, GATE_CANDIDATE, GATE_FORGET, GATE_INPUT, GATE_OUTPUT,
};
use crate::tensor::{matmul_acc, DenseMatrix};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GCN application after aggregation: `agg = Ã·X` is given.
#[derive(Debug, Clone)]
pub(crate) struct GcnTrace {
    /// `Ã·X`
    pub agg: DenseMatrix,
    /// `σ(Ã·X·W)` or `σ(Ã·X ∘ Ã·X·W)`
    pub out: DenseMatrix,
}

pub(crate) fn gcn_apply(agg: DenseMatrix, weight: &DenseMatrix, skip_concat: bool) -> GcnTrace {
    let mut pre = DenseMatrix::zeros(agg.rows(), weight.cols());
    matmul_acc(&agg, weight, &mut pre);
    let out = if skip_concat {
        DenseMatrix::hconcat(&agg, &pre)
            .expect("agg and pre share rows")
            .relu()
    } else {
        pre.relu()
    };
    GcnTrace { agg, out }
}

/// Per-vertex LSTM step over a batch of rows.
#[derive(Debug, Clone)]
pub(crate) struct LstmTrace {
    pub x: DenseMatrix,
    pub h_prev: DenseMatrix,
    pub c_prev: DenseMatrix,
    /// Activated gates, `n x 4H` in gate order.
    pub gates: DenseMatrix,
    pub c: DenseMatrix,
    pub tanh_c: DenseMatrix,
    pub h: DenseMatrix,
}

pub(crate) fn lstm_cell(
    p: &LstmCellParams,
    x: &DenseMatrix,
    h_prev: &DenseMatrix,
    c_prev: &DenseMatrix,
) -> LstmTrace {
    let n = x.rows();
    let hid = p.hidden_len();
    let mut z = DenseMatrix::zeros(n, GATES * hid);
    matmul_acc(x, &p.w_input, &mut z);
    matmul_acc(h_prev, &p.w_hidden, &mut z);
    let bias = p.bias.row(0);
    let mut c = DenseMatrix::zeros(n, hid);
    let mut tanh_c = DenseMatrix::zeros(n, hid);
    let mut h = DenseMatrix::zeros(n, hid);
    for r in 0..n {
        let zr = z.row_mut(r);
        for (v, b) in zr.iter_mut().zip(bias) {
            *v += b;
        }
        for j in 0..hid {
            zr[GATE_INPUT * hid + j] = sigmoid(zr[GATE_INPUT * hid + j]);
            zr[GATE_FORGET * hid + j] = sigmoid(zr[GATE_FORGET * hid + j]);
            zr[GATE_OUTPUT * hid + j] = sigmoid(zr[GATE_OUTPUT * hid + j]);
            zr[GATE_CANDIDATE * hid + j] = zr[GATE_CANDIDATE * hid + j].tanh();
        }
        for j in 0..hid {
            let i = zr[GATE_INPUT * hid + j];
            let f = zr[GATE_FORGET * hid + j];
            let o = zr[GATE_OUTPUT * hid + j];
            let g = zr[GATE_CANDIDATE * hid + j];
            let cv = f * c_prev.get(r, j) + i * g;
            let tc = cv.tanh();
            c.set(r, j, cv);
            tanh_c.set(r, j, tc);
            h.set(r, j, o * tc);
        }
    }
    LstmTrace {
        x: x.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        gates: z,
        c,
        tanh_c,
        h,
    }
}

/// Matrix-LSTM step producing the next evolved weight.
#[derive(Debug, Clone)]
pub(crate) struct EvolveTrace {
    pub w_prev: DenseMatrix,
    pub c_prev: DenseMatrix,
    /// Activated gates in gate order, each shaped like the weight.
    pub gates: [DenseMatrix; GATES],
    pub c: DenseMatrix,
    pub tanh_c: DenseMatrix,
    pub w: DenseMatrix,
}

pub(crate) fn evolve_cell(
    p: &MatrixLstmParams,
    w_prev: &DenseMatrix,
    c_prev: &DenseMatrix,
) -> EvolveTrace {
    let gates: [DenseMatrix; GATES] = std::array::from_fn(|k| {
        let z = p.scale[k]
            .zip_map(w_prev, |a, w| a * w)
            .zip_map(&p.bias[k], |v, b| v + b);
        if k == GATE_CANDIDATE {
            z.map(f64::tanh)
        } else {
            z.map(sigmoid)
        }
    });
    let (rows, cols) = w_prev.shape();
    let c = DenseMatrix::from_fn(rows, cols, |r, j| {
        gates[GATE_FORGET].get(r, j) * c_prev.get(r, j)
            + gates[GATE_INPUT].get(r, j) * gates[GATE_CANDIDATE].get(r, j)
    });
    let tanh_c = c.map(f64::tanh);
    let w = gates[GATE_OUTPUT].zip_map(&tanh_c, |o, t| o * t);
    EvolveTrace {
        w_prev: w_prev.clone(),
        c_prev: c_prev.clone(),
        gates,
        c,
        tanh_c,
        w,
    }
}
