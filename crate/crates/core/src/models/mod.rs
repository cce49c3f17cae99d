//! Dynamic-GNN models: the shared GCN/RNN layer framework and its three
//! instantiations (TM-GCN, CD-GCN, EGCN-O), plus the link-prediction head.

pub(crate) mod cells;
mod dump;
pub(crate) mod forward;
pub(crate) mod params;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dump::{decode_params, encode_params, read_params, write_params};
pub use forward::{initial_carry, LayerCarry};
pub use params::{GradientSet, LayerParams, LstmCellParams, MatrixLstmParams, ParamSet, GATES};

use crate::dtdg::{self, build_m_matrix, DynamicGraph, FeatureSequence, MMatrix};
use crate::error::{Error, Result};
use crate::tensor::{matmul_acc, spmm, DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "tm-gcn")]
    TmGcn,
    #[serde(rename = "cd-gcn")]
    CdGcn,
    #[serde(rename = "egcn-o")]
    EgcnO,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::TmGcn,
        Architecture::CdGcn,
        Architecture::EgcnO,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::TmGcn => "tm-gcn",
            Architecture::CdGcn => "cd-gcn",
            Architecture::EgcnO => "egcn-o",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tm-gcn" => Ok(Architecture::TmGcn),
            "cd-gcn" => Ok(Architecture::CdGcn),
            "egcn-o" => Ok(Architecture::EgcnO),
            other => Err(Error::config(format!(
                "unknown model `{other}` (expected tm-gcn, cd-gcn or egcn-o)"
            ))),
        }
    }
}

/// Default intermediate and embedding feature length.
pub const DEFAULT_FEATURE_LEN: usize = 6;
/// Link prediction is a two-class problem.
pub const DEFAULT_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// `[F, F_1, ..., F']`: input length, then the output length of each layer.
    pub feature_lengths: Vec<usize>,
    /// M-product window `w` (TM-GCN).
    pub window: usize,
    /// Edge-life `l` used when smoothing EGCN-O input.
    pub edge_life: usize,
    pub classes: usize,
}

impl ModelConfig {
    /// `layers` layers mapping `input_len` features to `embedding_len`, with
    /// `hidden_len` between layers.
    pub fn new(
        architecture: Architecture,
        input_len: usize,
        hidden_len: usize,
        embedding_len: usize,
        layers: usize,
    ) -> Self {
        let mut feature_lengths = vec![input_len];
        feature_lengths.extend(std::iter::repeat_n(hidden_len, layers.saturating_sub(1)));
        feature_lengths.push(embedding_len);
        Self {
            architecture,
            feature_lengths,
            window: 3,
            edge_life: 3,
            classes: DEFAULT_CLASSES,
        }
    }

    /// Two layers over degree features (in/out degree), length-6 features.
    pub fn with_defaults(architecture: Architecture) -> Self {
        Self::new(architecture, 2, DEFAULT_FEATURE_LEN, DEFAULT_FEATURE_LEN, 2)
    }

    pub fn layers(&self) -> usize {
        self.feature_lengths.len().saturating_sub(1)
    }

    /// Input and output feature length of layer `l` (0-indexed).
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        (self.feature_lengths[l], self.feature_lengths[l + 1])
    }

    pub fn input_len(&self) -> usize {
        self.feature_lengths[0]
    }

    pub fn embedding_len(&self) -> usize {
        *self.feature_lengths.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers() == 0 {
            return Err(Error::config("a model needs at least one layer"));
        }
        if self.feature_lengths.contains(&0) {
            return Err(Error::config("feature lengths must be positive"));
        }
        if self.architecture == Architecture::CdGcn && self.layers() != 2 {
            return Err(Error::config(format!(
                "cd-gcn has exactly 2 layers, got {}",
                self.layers()
            )));
        }
        if self.window == 0 {
            return Err(Error::config("window must be >= 1"));
        }
        if self.edge_life == 0 {
            return Err(Error::config("edge life must be >= 1"));
        }
        if self.classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        Ok(())
    }

    /// Checks that `params` has the shapes this configuration implies.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        self.validate()?;
        if params.layers.len() != self.layers() {
            return Err(Error::config(format!(
                "{} parameter layers for a {}-layer model",
                params.layers.len(),
                self.layers()
            )));
        }
        for (l, lp) in params.layers.iter().enumerate() {
            let (fin, fout) = self.layer_dims(l);
            let ok = match (self.architecture, lp) {
                (Architecture::TmGcn, LayerParams::TmGcn { weight }) => {
                    weight.shape() == (fin, fout)
                }
                (Architecture::CdGcn, LayerParams::CdGcn { weight, lstm }) => {
                    weight.shape() == (fin, fout)
                        && lstm.check_shapes().is_ok()
                        && lstm.input_len() == fin + fout
                        && lstm.hidden_len() == fout
                }
                (
                    Architecture::EgcnO,
                    LayerParams::EgcnO {
                        initial_weight,
                        evolve,
                    },
                ) => {
                    initial_weight.shape() == (fin, fout)
                        && evolve
                            .scale
                            .iter()
                            .chain(&evolve.bias)
                            .all(|m| m.shape() == (fin, fout))
                }
                _ => false,
            };
            if !ok {
                return Err(Error::config(format!(
                    "layer {} parameters do not match {} with dims {fin}x{fout}",
                    l + 1,
                    self.architecture
                )));
            }
        }
        let emb = self.embedding_len();
        if params.head.shape() != (2 * emb, self.classes)
            || params.head_bias.shape() != (1, self.classes)
        {
            return Err(Error::config("head shape does not match 2F' x C"));
        }
        Ok(())
    }
}

/// Model-side view of a dataset: normalized Laplacians, input features, the
/// precomputed first-layer aggregation `Ã_t·X_t`, and the M matrix.
#[derive(Debug, Clone)]
pub struct GraphInput {
    laplacians: DynamicGraph,
    features: FeatureSequence,
    first_layer: FeatureSequence,
    m: MMatrix,
}

impl GraphInput {
    pub fn new(
        cfg: &ModelConfig,
        laplacians: DynamicGraph,
        features: FeatureSequence,
    ) -> Result<Self> {
        cfg.validate()?;
        let t = laplacians.num_timesteps();
        if features.len() != t {
            return Err(Error::invalid(format!(
                "{} feature frames for {t} snapshots",
                features.len()
            )));
        }
        let (rows, cols) = features.frame_shape();
        if rows != laplacians.num_vertices() {
            return Err(Error::invalid(format!(
                "feature frames have {rows} rows, graph has {} vertices",
                laplacians.num_vertices()
            )));
        }
        if cols != cfg.input_len() {
            return Err(Error::config(format!(
                "features have {cols} columns, model expects {}",
                cfg.input_len()
            )));
        }
        let first_layer = precompute_first_layer(&laplacians, &features)?;
        let m = build_m_matrix(t, cfg.window)?;
        Ok(Self {
            laplacians,
            features,
            first_layer,
            m,
        })
    }

    pub fn laplacians(&self) -> &DynamicGraph {
        &self.laplacians
    }

    pub fn features(&self) -> &FeatureSequence {
        &self.features
    }

    pub fn first_layer(&self) -> &FeatureSequence {
        &self.first_layer
    }

    pub fn m_matrix(&self) -> &MMatrix {
        &self.m
    }

    pub fn num_timesteps(&self) -> usize {
        self.laplacians.num_timesteps()
    }

    pub fn num_vertices(&self) -> usize {
        self.laplacians.num_vertices()
    }
}

/// `T` frames of `N x F'` vertex embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTensor {
    pub frames: Vec<DenseMatrix>,
}

/// `σ(Ã·X·W)`, or with `skip_concat` the concatenation variant
/// `σ(Ã·X ∘ Ã·X·W)` with `F + F'` columns. σ is ReLU.
pub fn gcn_forward(
    lap: &SparseMatrix,
    x: &DenseMatrix,
    w: &DenseMatrix,
    skip_concat: bool,
) -> Result<DenseMatrix> {
    if x.cols() != w.rows() {
        return Err(Error::invalid(format!(
            "gcn_forward: features have {} columns, weight has {} rows",
            x.cols(),
            w.rows()
        )));
    }
    let agg = spmm(lap, x)?;
    Ok(cells::gcn_apply(agg, w, skip_concat).out)
}

/// One LSTM step applied independently to every row of `x`. Returns the
/// output (the new hidden state) and the new `(h, c)`.
pub fn lstm_step(
    params: &LstmCellParams,
    state: (&DenseMatrix, &DenseMatrix),
    x: &DenseMatrix,
) -> Result<(DenseMatrix, (DenseMatrix, DenseMatrix))> {
    params.check_shapes()?;
    let (h, c) = state;
    let hid = params.hidden_len();
    if x.cols() != params.input_len()
        || h.shape() != (x.rows(), hid)
        || c.shape() != (x.rows(), hid)
    {
        return Err(Error::invalid("lstm_step: input or state shape mismatch"));
    }
    let tr = cells::lstm_cell(params, x, h, c);
    Ok((tr.h.clone(), (tr.h, tr.c)))
}

/// Parameter-free temporal aggregation of TM-GCN.
pub fn m_product_rnn(y: &FeatureSequence, m: &MMatrix) -> Result<FeatureSequence> {
    dtdg::m_transform_features(y, m)
}

/// `W_t = LSTM(W_{t-1})`: one elementwise matrix-LSTM step. Returns the new
/// weight and the new cell state.
pub fn egcn_evolve(
    params: &MatrixLstmParams,
    w_prev: &DenseMatrix,
    c_prev: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let shape = params.shape();
    if w_prev.shape() != shape || c_prev.shape() != shape {
        return Err(Error::invalid(format!(
            "egcn_evolve: expected {}x{} weight and cell",
            shape.0, shape.1
        )));
    }
    let tr = cells::evolve_cell(params, w_prev, c_prev);
    Ok((tr.w, tr.c))
}

/// Sequence of evolved weights `W_1..W_T` for every EGCN-O layer.
pub fn egcn_weight_trajectory(params: &ParamSet, timesteps: usize) -> Vec<Vec<DenseMatrix>> {
    params
        .layers
        .iter()
        .filter_map(|lp| match lp {
            LayerParams::EgcnO {
                initial_weight,
                evolve,
            } => {
                let cell = DenseMatrix::zeros(initial_weight.rows(), initial_weight.cols());
                Some(
                    forward::evolve_sequence(evolve, timesteps, initial_weight, &cell)
                        .into_iter()
                        .map(|t| t.w)
                        .collect(),
                )
            }
            _ => None,
        })
        .collect()
}

/// `Ã_t·X_t` for every timestep; parameter independent, so computed once.
pub fn precompute_first_layer(
    laplacians: &DynamicGraph,
    x: &FeatureSequence,
) -> Result<FeatureSequence> {
    dtdg::aggregate_frames(laplacians, x)
}

/// Full forward pass over the timeline.
pub fn model_forward(
    cfg: &ModelConfig,
    input: &GraphInput,
    params: &ParamSet,
) -> Result<EmbeddingTensor> {
    cfg.check_params(params)?;
    if input.features.frame_shape().1 != cfg.input_len() {
        return Err(Error::config("input features do not match the model"));
    }
    let carry = initial_carry(cfg, params, input.num_vertices());
    let (trace, _) = forward::forward_block(input, params, 0, input.num_timesteps(), &carry)?;
    Ok(EmbeddingTensor {
        frames: trace.embeddings().to_vec(),
    })
}

/// Rows `[z[u] ∘ z[v]]` for each pair.
pub(crate) fn pair_features(z: &DenseMatrix, pairs: &[(u32, u32)]) -> DenseMatrix {
    let f = z.cols();
    let mut out = DenseMatrix::zeros(pairs.len(), 2 * f);
    for (r, &(u, v)) in pairs.iter().enumerate() {
        let row = out.row_mut(r);
        row[..f].copy_from_slice(z.row(u as usize));
        row[f..].copy_from_slice(z.row(v as usize));
    }
    out
}

/// Logits `[z[u] ∘ z[v]]·head + bias`, one row per pair.
pub fn link_pred_forward(
    z: &DenseMatrix,
    pairs: &[(u32, u32)],
    head: &DenseMatrix,
    bias: &DenseMatrix,
) -> Result<DenseMatrix> {
    if head.rows() != 2 * z.cols() || bias.shape() != (1, head.cols()) {
        return Err(Error::invalid(
            "link_pred_forward: head must be 2F' x C, bias 1 x C",
        ));
    }
    if let Some(&(u, v)) = pairs
        .iter()
        .find(|&&(u, v)| u as usize >= z.rows() || v as usize >= z.rows())
    {
        return Err(Error::invalid(format!(
            "pair ({u}, {v}) out of range for {} vertices",
            z.rows()
        )));
    }
    Ok(pair_logits(z, pairs, head, bias))
}

pub(crate) fn pair_logits(
    z: &DenseMatrix,
    pairs: &[(u32, u32)],
    head: &DenseMatrix,
    bias: &DenseMatrix,
) -> DenseMatrix {
    let feats = pair_features(z, pairs);
    let mut logits = DenseMatrix::zeros(pairs.len(), head.cols());
    matmul_acc(&feats, head, &mut logits);
    for r in 0..logits.rows() {
        for (l, b) in logits.row_mut(r).iter_mut().zip(bias.row(0)) {
            *l += b;
        }
    }
    logits
}

#[cfg(test)]
mod tests;
