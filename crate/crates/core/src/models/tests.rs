#![allow(clippy::needless_range_loop)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dtdg::{laplacian_sequence, DynamicGraph, FeatureSequence};
use crate::tensor::Entry;
use crate::testutil::{random_features, random_matrix, toy_input};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar LSTM cell, gates in (i, f, o, g) order.
fn scalar_lstm(x: f64, h: f64, c: f64, wi: [f64; 4], wh: [f64; 4], b: [f64; 4]) -> (f64, f64) {
    let z: Vec<f64> = (0..4).map(|k| wi[k] * x + wh[k] * h + b[k]).collect();
    let (i, f, o, g) = (sig(z[0]), sig(z[1]), sig(z[2]), z[3].tanh());
    let c_new = f * c + i * g;
    (o * c_new.tanh(), c_new)
}

fn half_graph() -> SparseMatrix {
    // Ã for the 2-vertex graph with a single edge 0->1 plus the reverse edge.
    let a =
        SparseMatrix::from_triplets(2, vec![Entry::new(0, 1, 1.0), Entry::new(1, 0, 1.0)]).unwrap();
    dtdg::normalize_laplacian(&a)
}

#[test]
fn gcn_identity_passes_nonnegative_input() {
    let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 3.5], vec![4.0, 0.25]]).unwrap();
    let y = gcn_forward(
        &SparseMatrix::identity(3),
        &x,
        &DenseMatrix::identity(2),
        false,
    )
    .unwrap();
    assert_eq!(y, x);
}

#[test]
fn gcn_half_graph_hand_value() {
    let lap = half_graph();
    for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        assert!((lap.get(r, c).unwrap() - 0.5).abs() < 1e-15);
    }
    let x = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    let w = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
    let y = gcn_forward(&lap, &x, &w, false).unwrap();
    assert!(y.max_abs_diff(&DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap()) < 1e-15);
}

#[test]
fn gcn_skip_concat_widens() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_matrix(&mut rng, 4, 2);
    let w = random_matrix(&mut rng, 2, 3);
    let y = gcn_forward(&SparseMatrix::identity(4), &x, &w, true).unwrap();
    assert_eq!(y.shape(), (4, 5));
    // First block is relu(Ã·X), second relu(Ã·X·W).
    assert_eq!(y.slice_cols(0, 2), x.relu());
}

#[test]
fn gcn_rejects_shape_mismatch() {
    let x = DenseMatrix::zeros(3, 2);
    let w = DenseMatrix::zeros(3, 1);
    assert!(gcn_forward(&SparseMatrix::identity(3), &x, &w, false).is_err());
    assert!(gcn_forward(
        &SparseMatrix::identity(4),
        &x,
        &DenseMatrix::zeros(2, 1),
        false
    )
    .is_err());
}

#[test]
fn lstm_zero_params_zero_output() {
    let p = LstmCellParams::zeros(3, 2);
    let x = DenseMatrix::from_fn(4, 3, |r, c| (r + c) as f64);
    let z = DenseMatrix::zeros(4, 2);
    let (y, (h, c)) = lstm_step(&p, (&z, &z), &x).unwrap();
    assert_eq!(y, z);
    assert_eq!(h, z);
    assert_eq!(c, z);
}

#[test]
fn lstm_matches_scalar_oracle() {
    let wi = [0.3, -0.7, 1.1, 0.45];
    let wh = [-0.2, 0.9, 0.05, -1.3];
    let b = [0.1, 1.0, -0.4, 0.2];
    let p = LstmCellParams {
        w_input: DenseMatrix::from_vec(1, 4, wi.to_vec()).unwrap(),
        w_hidden: DenseMatrix::from_vec(1, 4, wh.to_vec()).unwrap(),
        bias: DenseMatrix::from_vec(1, 4, b.to_vec()).unwrap(),
    };
    let (mut h, mut c) = (0.25, -0.6);
    let mut hm = DenseMatrix::from_vec(1, 1, vec![h]).unwrap();
    let mut cm = DenseMatrix::from_vec(1, 1, vec![c]).unwrap();
    for x in [0.5, -1.5, 2.0, 0.0] {
        (h, c) = scalar_lstm(x, h, c, wi, wh, b);
        let xm = DenseMatrix::from_vec(1, 1, vec![x]).unwrap();
        let (y, (h2, c2)) = lstm_step(&p, (&hm, &cm), &xm).unwrap();
        assert!((y.get(0, 0) - h).abs() < 1e-14);
        assert!((c2.get(0, 0) - c).abs() < 1e-14);
        (hm, cm) = (h2, c2);
    }
}

#[test]
fn lstm_rows_are_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = LstmCellParams {
        w_input: random_matrix(&mut rng, 3, 8),
        w_hidden: random_matrix(&mut rng, 2, 8),
        bias: random_matrix(&mut rng, 1, 8),
    };
    let x = random_matrix(&mut rng, 5, 3);
    let h = random_matrix(&mut rng, 5, 2);
    let c = random_matrix(&mut rng, 5, 2);
    let perm = [3usize, 0, 4, 1, 2];
    let pick = |m: &DenseMatrix| DenseMatrix::from_fn(m.rows(), m.cols(), |r, j| m.get(perm[r], j));
    let (y, _) = lstm_step(&p, (&h, &c), &x).unwrap();
    let (yp, _) = lstm_step(&p, (&pick(&h), &pick(&c)), &pick(&x)).unwrap();
    assert_eq!(yp, pick(&y));
}

#[test]
fn lstm_rejects_bad_shapes() {
    let p = LstmCellParams::zeros(3, 2);
    let z = DenseMatrix::zeros(4, 2);
    assert!(lstm_step(&p, (&z, &z), &DenseMatrix::zeros(4, 2)).is_err());
    assert!(lstm_step(
        &p,
        (&DenseMatrix::zeros(3, 2), &z),
        &DenseMatrix::zeros(4, 3)
    )
    .is_err());
}

#[test]
fn evolve_zero_case_and_shape() {
    let p = MatrixLstmParams::zeros(3, 5);
    let z = DenseMatrix::zeros(3, 5);
    let (w, c) = egcn_evolve(&p, &z, &z).unwrap();
    assert_eq!(w, z);
    assert_eq!(c, z);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = MatrixLstmParams::zeros(4, 2);
    for k in 0..GATES {
        p.scale[k] = random_matrix(&mut rng, 4, 2);
        p.bias[k] = random_matrix(&mut rng, 4, 2);
    }
    let (w, _) = egcn_evolve(
        &p,
        &random_matrix(&mut rng, 4, 2),
        &DenseMatrix::zeros(4, 2),
    )
    .unwrap();
    assert_eq!(w.shape(), (4, 2));
    assert!(egcn_evolve(&p, &DenseMatrix::zeros(2, 4), &DenseMatrix::zeros(2, 4)).is_err());
}

#[test]
fn evolve_matches_scalar_oracle() {
    let scale = [0.8, -0.4, 1.2, 0.6];
    let bias = [0.05, 1.0, -0.3, 0.1];
    let p = MatrixLstmParams {
        scale: scale.map(|v| DenseMatrix::from_vec(1, 1, vec![v]).unwrap()),
        bias: bias.map(|v| DenseMatrix::from_vec(1, 1, vec![v]).unwrap()),
    };
    let (mut w, mut c) = (0.7, 0.0);
    let mut wm = DenseMatrix::from_vec(1, 1, vec![w]).unwrap();
    let mut cm = DenseMatrix::zeros(1, 1);
    for _ in 0..5 {
        // The weight is both the input and the hidden state: one shared scale.
        (w, c) = scalar_lstm(w, 0.0, c, scale, [0.0; 4], bias);
        (wm, cm) = egcn_evolve(&p, &wm, &cm).unwrap();
        assert!((wm.get(0, 0) - w).abs() < 1e-14);
        assert!((cm.get(0, 0) - c).abs() < 1e-14);
    }
}

fn identity_tm_params(f: usize, layers: usize) -> ParamSet {
    ParamSet {
        layers: (0..layers)
            .map(|_| LayerParams::TmGcn {
                weight: DenseMatrix::identity(f),
            })
            .collect(),
        head: DenseMatrix::zeros(2 * f, 2),
        head_bias: DenseMatrix::zeros(1, 2),
    }
}

#[test]
fn degenerate_timeline_is_layerwise_relu() {
    let mut cfg = ModelConfig::new(Architecture::TmGcn, 3, 3, 3, 2);
    cfg.window = 1;
    let x = random_features(1, 4, 3, 9);
    let laps = DynamicGraph::new(4, vec![SparseMatrix::identity(4)]).unwrap();
    let input = GraphInput::new(&cfg, laps, x.clone()).unwrap();
    let z = model_forward(&cfg, &input, &identity_tm_params(3, 2)).unwrap();
    assert_eq!(z.frames, vec![x.frame(0).relu().relu()]);
}

#[test]
fn output_shape_for_every_architecture() {
    for arch in Architecture::ALL {
        let cfg = ModelConfig::new(arch, 3, 4, 5, 2);
        let (_, input) = toy_input(&cfg, 4, 7, 21);
        let params = ParamSet::init(&cfg, 5).unwrap();
        let z = model_forward(&cfg, &input, &params).unwrap();
        assert_eq!(z.frames.len(), 4, "{arch}");
        assert!(z.frames.iter().all(|f| f.shape() == (7, 5)), "{arch}");
    }
}

/// Straight-line dense TM-GCN: triple loops, M built from its definition.
fn dense_tm_oracle(
    laps: &[DenseMatrix],
    x: &[DenseMatrix],
    weights: &[DenseMatrix],
    w: usize,
) -> Vec<DenseMatrix> {
    let t_len = laps.len();
    let n = laps[0].rows();
    let mut cur: Vec<Vec<Vec<f64>>> = x
        .iter()
        .map(|f| (0..n).map(|r| f.row(r).to_vec()).collect())
        .collect();
    for wt in weights {
        let fout = wt.cols();
        let mut y = vec![vec![vec![0.0; fout]; n]; t_len];
        for t in 0..t_len {
            for i in 0..n {
                for o in 0..fout {
                    let mut s = 0.0;
                    for j in 0..n {
                        for (k, xv) in cur[t][j].iter().enumerate() {
                            s += laps[t].get(i, j) * xv * wt.get(k, o);
                        }
                    }
                    y[t][i][o] = s.max(0.0);
                }
            }
        }
        let mut z = vec![vec![vec![0.0; fout]; n]; t_len];
        for t in 1..=t_len {
            let lo = if t >= w { t - w + 1 } else { 1 };
            let m = 1.0 / w.min(t) as f64;
            for k in lo..=t {
                for i in 0..n {
                    for o in 0..fout {
                        z[t - 1][i][o] += m * y[k - 1][i][o];
                    }
                }
            }
        }
        cur = z;
    }
    cur.into_iter()
        .map(|f| DenseMatrix::from_rows(&f).unwrap())
        .collect()
}

#[test]
fn tm_gcn_matches_dense_oracle() {
    for (n, t, w, seed) in [(4, 3, 2, 1), (6, 5, 3, 2), (10, 8, 4, 3), (5, 6, 1, 4)] {
        let mut cfg = ModelConfig::new(Architecture::TmGcn, 3, 4, 2, 2);
        cfg.window = w;
        let (_, input) = toy_input(&cfg, t, n, seed);
        let params = ParamSet::init(&cfg, seed).unwrap();
        let weights: Vec<DenseMatrix> = params
            .layers
            .iter()
            .map(|l| match l {
                LayerParams::TmGcn { weight } => weight.clone(),
                _ => unreachable!(),
            })
            .collect();
        let laps: Vec<DenseMatrix> = input
            .laplacians()
            .snapshots()
            .iter()
            .map(|s| s.to_dense())
            .collect();
        let want = dense_tm_oracle(&laps, input.features().frames(), &weights, w);
        let got = model_forward(&cfg, &input, &params).unwrap();
        for (a, b) in got.frames.iter().zip(&want) {
            assert!(a.max_abs_diff(b) < 1e-12, "n={n} t={t} w={w}");
        }
    }
}

fn permute_graph(g: &DynamicGraph, perm: &[usize]) -> DynamicGraph {
    g.map_snapshots(|s| {
        let entries = s
            .entries()
            .iter()
            .map(|e| {
                Entry::new(
                    perm[e.row as usize] as u32,
                    perm[e.col as usize] as u32,
                    e.value,
                )
            })
            .collect();
        SparseMatrix::from_triplets(s.dim(), entries).unwrap()
    })
}

fn permute_rows(m: &DenseMatrix, perm: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        out.row_mut(perm[r]).copy_from_slice(m.row(r));
    }
    out
}

#[test]
fn forward_is_permutation_equivariant() {
    let perm = [4usize, 2, 7, 0, 1, 6, 3, 5];
    for arch in Architecture::ALL {
        let cfg = ModelConfig::new(arch, 2, 3, 3, 2);
        let (g, input) = toy_input(&cfg, 4, 8, 17);
        let params = ParamSet::init(&cfg, 2).unwrap();
        let z = model_forward(&cfg, &input, &params).unwrap();

        let gp = permute_graph(&g, &perm);
        let xp = FeatureSequence::new(
            input
                .features()
                .frames()
                .iter()
                .map(|f| permute_rows(f, &perm))
                .collect(),
        )
        .unwrap();
        let inp = GraphInput::new(&cfg, laplacian_sequence(&gp), xp).unwrap();
        let zp = model_forward(&cfg, &inp, &params).unwrap();
        for (a, b) in z.frames.iter().zip(&zp.frames) {
            assert!(permute_rows(a, &perm).max_abs_diff(b) < 1e-12, "{arch}");
        }
    }
}

#[test]
fn egcn_trajectory_ignores_graph_data() {
    let cfg = ModelConfig::with_defaults(Architecture::EgcnO);
    let params = ParamSet::init(&cfg, 4).unwrap();
    let traj = egcn_weight_trajectory(&params, 5);
    assert_eq!(traj.len(), 2);
    assert!(traj.iter().all(|l| l.len() == 5));
    // Replay through the block forward on two unrelated graphs.
    for seed in [1, 99] {
        let (_, input) = toy_input(&cfg, 5, 6, seed);
        let carry = initial_carry(&cfg, &params, 6);
        let (trace, _) = forward::forward_block(&input, &params, 0, 5, &carry).unwrap();
        for (l, layer) in trace.layers.iter().enumerate() {
            let forward::RnnTrace::Evolve(steps) = &layer.rnn else {
                panic!("expected evolve trace");
            };
            for (t, s) in steps.iter().enumerate() {
                assert_eq!(s.w, traj[l][t]);
            }
        }
    }
}

#[test]
fn blocked_forward_matches_whole_timeline() {
    for arch in Architecture::ALL {
        let mut cfg = ModelConfig::new(arch, 2, 4, 3, 2);
        cfg.window = 3;
        let (_, input) = toy_input(&cfg, 8, 6, 5);
        let params = ParamSet::init(&cfg, 8).unwrap();
        let whole = model_forward(&cfg, &input, &params).unwrap();
        for block in [1, 2, 4] {
            let mut carry = initial_carry(&cfg, &params, 6);
            let mut frames = Vec::new();
            for b in 0..8 / block {
                let (trace, next) =
                    forward::forward_block(&input, &params, b * block, block, &carry).unwrap();
                frames.extend_from_slice(trace.embeddings());
                carry = next;
            }
            assert_eq!(frames, whole.frames, "{arch} block={block}");
        }
    }
}

#[test]
fn first_layer_precompute() {
    let x = random_features(3, 4, 2, 1);
    let ident = DynamicGraph::new(4, vec![SparseMatrix::identity(4); 3]).unwrap();
    assert_eq!(precompute_first_layer(&ident, &x).unwrap(), x);

    let cfg = ModelConfig::with_defaults(Architecture::TmGcn);
    let (_, input) = toy_input(&cfg, 3, 4, 2);
    let again = precompute_first_layer(input.laplacians(), input.features()).unwrap();
    for t in 0..3 {
        let direct = spmm(input.laplacians().snapshot(t), input.features().frame(t)).unwrap();
        assert_eq!(input.first_layer().frame(t), &direct);
        assert_eq!(again.frame(t), &direct);
    }
}

#[test]
fn link_head_cases() {
    let z = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 0.0]]).unwrap();
    let pairs = [(0, 1), (2, 0)];
    let zero = link_pred_forward(
        &z,
        &pairs,
        &DenseMatrix::zeros(4, 2),
        &DenseMatrix::zeros(1, 2),
    )
    .unwrap();
    assert_eq!(zero, DenseMatrix::zeros(2, 2));

    let head = DenseMatrix::from_rows(&[
        vec![1.0, 0.0],
        vec![0.5, -1.0],
        vec![2.0, 1.0],
        vec![0.0, 3.0],
    ])
    .unwrap();
    let bias = DenseMatrix::from_rows(&[vec![0.1, -0.2]]).unwrap();
    let got = link_pred_forward(&z, &[(0, 1)], &head, &bias).unwrap();
    // [1, 2, -1, 0.5] · head + bias
    let want = [1.0 + 1.0 - 2.0 + 0.0 + 0.1, 0.0 - 2.0 - 1.0 + 1.5 - 0.2];
    assert!((got.get(0, 0) - want[0]).abs() < 1e-15);
    assert!((got.get(0, 1) - want[1]).abs() < 1e-15);

    // A head whose two row blocks are equal makes the score symmetric.
    let top = DenseMatrix::from_rows(&[vec![0.3, -0.7], vec![1.1, 0.2]]).unwrap();
    let sym = DenseMatrix::vstack(&[top.clone(), top]).unwrap();
    let a = link_pred_forward(&z, &[(0, 2)], &sym, &bias).unwrap();
    let b = link_pred_forward(&z, &[(2, 0)], &sym, &bias).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-15);

    assert!(link_pred_forward(&z, &[(0, 3)], &head, &bias).is_err());
}

#[test]
fn config_validation() {
    let mut cfg = ModelConfig::new(Architecture::CdGcn, 2, 6, 6, 3);
    assert!(cfg.validate().unwrap_err().is_config());
    cfg = ModelConfig::with_defaults(Architecture::CdGcn);
    cfg.validate().unwrap();
    cfg.window = 0;
    assert!(cfg.validate().is_err());
    assert!("gcn".parse::<Architecture>().is_err());
    for arch in Architecture::ALL {
        assert_eq!(arch.name().parse::<Architecture>().unwrap(), arch);
    }
    let params = ParamSet::init(&ModelConfig::with_defaults(Architecture::TmGcn), 1).unwrap();
    assert!(ModelConfig::with_defaults(Architecture::EgcnO)
        .check_params(&params)
        .is_err());
}

#[test]
fn param_dump_round_trip() {
    for arch in Architecture::ALL {
        let cfg = ModelConfig::with_defaults(arch);
        let p = ParamSet::init(&cfg, 12).unwrap();
        let bytes = encode_params(&p);
        assert_eq!(&bytes[..4], b"DGNP");
        let back = decode_params(&bytes, &p.zeros_like()).unwrap();
        assert_eq!(back, p);
        assert!(decode_params(&bytes[..bytes.len() - 1], &p).is_err());
    }
}

#[test]
fn init_is_seeded() {
    let cfg = ModelConfig::with_defaults(Architecture::CdGcn);
    assert_eq!(
        ParamSet::init(&cfg, 3).unwrap(),
        ParamSet::init(&cfg, 3).unwrap()
    );
    assert_ne!(
        ParamSet::init(&cfg, 3).unwrap(),
        ParamSet::init(&cfg, 4).unwrap()
    );
}

#[test]
fn evolved_weights_do_not_vanish() {
    let cfg = ModelConfig::with_defaults(Architecture::EgcnO);
    for seed in 0..4 {
        let params = ParamSet::init(&cfg, seed).unwrap();
        for layer in egcn_weight_trajectory(&params, 64) {
            let last = layer.last().unwrap();
            let mean =
                last.values().iter().map(|v| v.abs()).sum::<f64>() / last.values().len() as f64;
            assert!(mean > 0.1, "seed {seed}: mean |W_64| = {mean}");
        }
    }
}
