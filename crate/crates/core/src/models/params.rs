use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Architecture, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Gate order used for every LSTM parameter block.
pub const GATES: usize = 4;
pub(crate) const GATE_INPUT: usize = 0;
pub(crate) const GATE_FORGET: usize = 1;
pub(crate) const GATE_OUTPUT: usize = 2;
pub(crate) const GATE_CANDIDATE: usize = 3;

const CANDIDATE_SCALE_OFFSET: f64 = 2.0;

/// Per-vertex LSTM cell. The four gates (input, forget, output, candidate)
/// are stacked column-wise: `w_input` is `F_in x 4H`, `w_hidden` is
/// `H x 4H`, `bias` is `1 x 4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_input: DenseMatrix,
    pub w_hidden: DenseMatrix,
    pub bias: DenseMatrix,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: DenseMatrix::zeros(input, GATES * hidden),
            w_hidden: DenseMatrix::zeros(hidden, GATES * hidden),
            bias: DenseMatrix::zeros(1, GATES * hidden),
        }
    }

    pub fn input_len(&self) -> usize {
        self.w_input.rows()
    }

    pub fn hidden_len(&self) -> usize {
        self.w_hidden.rows()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let h = self.hidden_len();
        if self.w_input.cols() != GATES * h
            || self.w_hidden.cols() != GATES * h
            || self.bias.shape() != (1, GATES * h)
        {
            return Err(Error::invalid("inconsistent LSTM gate shapes"));
        }
        Ok(())
    }
}

/// Elementwise LSTM over a weight matrix: each gate has a scale and a bias
/// matrix shaped like the evolved weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixLstmParams {
    pub scale: [DenseMatrix; GATES],
    pub bias: [DenseMatrix; GATES],
}

impl MatrixLstmParams {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            scale: std::array::from_fn(|_| DenseMatrix::zeros(rows, cols)),
            bias: std::array::from_fn(|_| DenseMatrix::zeros(rows, cols)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.scale[0].shape()
    }
}

/// Learnable parameters of one dynamic-GNN layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    /// GCN followed by the parameter-free M-product.
    TmGcn { weight: DenseMatrix },
    /// Skip-concatenation GCN followed by a per-vertex LSTM.
    CdGcn {
        weight: DenseMatrix,
        lstm: LstmCellParams,
    },
    /// GCN whose weight evolves through a matrix LSTM from `initial_weight`.
    EgcnO {
        initial_weight: DenseMatrix,
        evolve: MatrixLstmParams,
    },
}

impl LayerParams {
    fn tensors(&self) -> Vec<&DenseMatrix> {
        match self {
            LayerParams::TmGcn { weight } => vec![weight],
            LayerParams::CdGcn { weight, lstm } => {
                vec![weight, &lstm.w_input, &lstm.w_hidden, &lstm.bias]
            }
            LayerParams::EgcnO {
                initial_weight,
                evolve,
            } => std::iter::once(initial_weight)
                .chain(evolve.scale.iter())
                .chain(evolve.bias.iter())
                .collect(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        match self {
            LayerParams::TmGcn { weight } => vec![weight],
            LayerParams::CdGcn { weight, lstm } => vec![
                weight,
                &mut lstm.w_input,
                &mut lstm.w_hidden,
                &mut lstm.bias,
            ],
            LayerParams::EgcnO {
                initial_weight,
                evolve,
            } => std::iter::once(initial_weight)
                .chain(evolve.scale.iter_mut())
                .chain(evolve.bias.iter_mut())
                .collect(),
        }
    }
}

/// All learnable parameters: one entry per layer plus the link-prediction
/// head (`2F' x C` and its `1 x C` bias). Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<LayerParams>,
    pub head: DenseMatrix,
    pub head_bias: DenseMatrix,
}

/// Gradient of the loss with respect to every entry of a [`ParamSet`].
pub type GradientSet = ParamSet;

impl ParamSet {
    /// Glorot-uniform weights from a seeded generator; zero biases except the
    /// forget gate, which starts at 1.0. Weight-evolution candidate scales
    /// are shifted up by 2.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(cfg.layers());
        for l in 0..cfg.layers() {
            let (fin, fout) = cfg.layer_dims(l);
            let weight = glorot(&mut rng, fin, fout, fin, fout);
            layers.push(match cfg.architecture {
                Architecture::TmGcn => LayerParams::TmGcn { weight },
                Architecture::CdGcn => {
                    let input = fin + fout;
                    let mut lstm = LstmCellParams {
                        w_input: glorot(&mut rng, input, GATES * fout, input, fout),
                        w_hidden: glorot(&mut rng, fout, GATES * fout, fout, fout),
                        bias: DenseMatrix::zeros(1, GATES * fout),
                    };
                    for c in 0..fout {
                        lstm.bias.set(0, GATE_FORGET * fout + c, 1.0);
                    }
                    LayerParams::CdGcn { weight, lstm }
                }
                Architecture::EgcnO => {
                    let mut evolve = MatrixLstmParams::zeros(fin, fout);
                    for s in &mut evolve.scale {
                        *s = glorot(&mut rng, fin, fout, fin, fout);
                    }
                    // Glorot-sized candidate scales make the elementwise
                    // recurrence contract, and W_t decays to zero within a
                    // few dozen steps.
                    evolve.scale[GATE_CANDIDATE] =
                        evolve.scale[GATE_CANDIDATE].map(|v| v + CANDIDATE_SCALE_OFFSET);
                    evolve.bias[GATE_FORGET] = DenseMatrix::from_fn(fin, fout, |_, _| 1.0);
                    LayerParams::EgcnO {
                        initial_weight: weight,
                        evolve,
                    }
                }
            });
        }
        let emb = cfg.embedding_len();
        let head = glorot(&mut rng, 2 * emb, cfg.classes, 2 * emb, cfg.classes);
        Ok(Self {
            layers,
            head,
            head_bias: DenseMatrix::zeros(1, cfg.classes),
        })
    }

    /// Every parameter matrix in a fixed order: layers first, head last.
    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut v: Vec<&DenseMatrix> = self.layers.iter().flat_map(LayerParams::tensors).collect();
        v.push(&self.head);
        v.push(&self.head_bias);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut v: Vec<&mut DenseMatrix> = self
            .layers
            .iter_mut()
            .flat_map(LayerParams::tensors_mut)
            .collect();
        v.push(&mut self.head);
        v.push(&mut self.head_bias);
        v
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.values_mut().fill(0.0);
        }
        z
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.values().len()).sum()
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.shape() == y.shape())
    }

    /// `self += other`. Panics on shape mismatch.
    pub fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn max_abs_diff(&self, other: &ParamSet) -> f64 {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.values().iter().copied())
            .collect()
    }

    /// Overwrites every entry from a flat vector in [`ParamSet::tensors`] order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::invalid(format!(
                "expected {} parameter values, got {}",
                self.num_scalars(),
                flat.len()
            )));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.values().len();
            t.values_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

fn glorot(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
) -> DenseMatrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
}
