//! Discrete-time dynamic graphs: snapshot sequences, feature frames,
//! preprocessing (edge-life and M-transform smoothing, Laplacian
//! normalization, degree features) and the synthetic generator.
//!
//! Timesteps are 1-indexed in the temporal formulas and 0-indexed in
//! storage; the conversion happens only inside this module.

mod generate;
mod io;

pub use generate::generate_random_dtdg;
pub use io::{load_edge_list, read_edge_list, save_edge_list, write_edge_list};

use crate::error::{Error, Result};
use crate::tensor::{sparse_weighted_sum, spmm, DenseMatrix, Entry, SparseMatrix};

/// Sequence of `T ≥ 1` sparse `N x N` snapshots over a fixed vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    num_vertices: usize,
    snapshots: Vec<SparseMatrix>,
}

impl DynamicGraph {
    pub fn new(num_vertices: usize, snapshots: Vec<SparseMatrix>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::invalid(
                "a dynamic graph needs at least one snapshot",
            ));
        }
        if let Some((t, s)) = snapshots
            .iter()
            .enumerate()
            .find(|(_, s)| s.dim() != num_vertices)
        {
            return Err(Error::invalid(format!(
                "snapshot {} has dim {}, expected {num_vertices}",
                t + 1,
                s.dim()
            )));
        }
        Ok(Self {
            num_vertices,
            snapshots,
        })
    }

    /// `T` empty snapshots over `N` vertices.
    pub fn empty(num_vertices: usize, timesteps: usize) -> Result<Self> {
        Self::new(
            num_vertices,
            vec![SparseMatrix::empty(num_vertices); timesteps],
        )
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    #[inline]
    pub fn num_timesteps(&self) -> usize {
        self.snapshots.len()
    }

    #[inline]
    pub fn snapshots(&self) -> &[SparseMatrix] {
        &self.snapshots
    }

    /// Snapshot at 0-indexed position `t`.
    #[inline]
    pub fn snapshot(&self, t: usize) -> &SparseMatrix {
        &self.snapshots[t]
    }

    pub fn total_nnz(&self) -> usize {
        self.snapshots.iter().map(SparseMatrix::nnz).sum()
    }

    /// Applies `f` to every snapshot.
    pub fn map_snapshots(&self, f: impl Fn(&SparseMatrix) -> SparseMatrix) -> DynamicGraph {
        DynamicGraph {
            num_vertices: self.num_vertices,
            snapshots: self.snapshots.iter().map(f).collect(),
        }
    }
}

/// `T` dense `N x F` frames with a uniform shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    frames: Vec<DenseMatrix>,
}

impl FeatureSequence {
    pub fn new(frames: Vec<DenseMatrix>) -> Result<Self> {
        if let Some(first) = frames.first() {
            if frames.iter().any(|f| f.shape() != first.shape()) {
                return Err(Error::invalid("feature frames differ in shape"));
            }
        }
        Ok(Self { frames })
    }

    #[inline]
    pub fn frames(&self) -> &[DenseMatrix] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<DenseMatrix> {
        self.frames
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    #[inline]
    pub fn frame(&self, t: usize) -> &DenseMatrix {
        &self.frames[t]
    }

    /// `(rows, cols)` shared by all frames; `(0, 0)` when empty.
    pub fn frame_shape(&self) -> (usize, usize) {
        self.frames.first().map_or((0, 0), DenseMatrix::shape)
    }
}

/// Lower-triangular banded `T x T` averaging matrix of the M-transform:
/// `M[t,k] = 1/min(w,t)` for `max(1, t-w+1) ≤ k ≤ t` (1-indexed), else 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MMatrix {
    size: usize,
    window: usize,
    matrix: DenseMatrix,
}

impl MMatrix {
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn window(&self) -> usize {
        self.window
    }

    #[inline]
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Nonzero band of 0-indexed row `t`: the first contributing 0-indexed
    /// column and the shared weight.
    #[inline]
    pub fn band(&self, t: usize) -> (usize, f64) {
        let lo = (t + 1).saturating_sub(self.window);
        (lo, self.matrix.get(t, lo))
    }
}

/// Builds the M-transform matrix for `T` timesteps and window `w`.
pub fn build_m_matrix(timesteps: usize, window: usize) -> Result<MMatrix> {
    if timesteps == 0 {
        return Err(Error::invalid("M matrix needs T >= 1"));
    }
    if window == 0 {
        return Err(Error::invalid("M matrix needs window >= 1"));
    }
    let matrix = DenseMatrix::from_fn(timesteps, timesteps, |r, c| {
        let t = r + 1;
        let k = c + 1;
        let lo = if t >= window { t - window + 1 } else { 1 };
        if lo <= k && k <= t {
            1.0 / window.min(t) as f64
        } else {
            0.0
        }
    });
    Ok(MMatrix {
        size: timesteps,
        window,
        matrix,
    })
}

/// Weighted combination `Σ_k M[t,k] · frames[k]` over the band of row `t`,
/// accumulated with `k` ascending. `frame_at(k)` resolves 0-indexed frames.
pub(crate) fn m_combine<'a>(
    m: &MMatrix,
    t: usize,
    shape: (usize, usize),
    frame_at: impl Fn(usize) -> &'a DenseMatrix,
) -> DenseMatrix {
    let (lo, weight) = m.band(t);
    let mut out = DenseMatrix::zeros(shape.0, shape.1);
    for k in lo..=t {
        out.axpy(weight, frame_at(k));
    }
    out
}

/// Mode-1 product of the feature tensor with `M`.
pub fn m_transform_features(x: &FeatureSequence, m: &MMatrix) -> Result<FeatureSequence> {
    if x.len() != m.size {
        return Err(Error::invalid(format!(
            "m_transform_features: {} frames vs M of size {}",
            x.len(),
            m.size
        )));
    }
    let shape = x.frame_shape();
    let frames = (0..x.len())
        .map(|t| m_combine(m, t, shape, |k| &x.frames[k]))
        .collect();
    Ok(FeatureSequence { frames })
}

/// Mode-1 product of the adjacency tensor with `M`; each output snapshot is
/// a canonical sparse weighted sum of the snapshots in the band.
pub fn m_transform_graph(g: &DynamicGraph, m: &MMatrix) -> Result<DynamicGraph> {
    if g.num_timesteps() != m.size {
        return Err(Error::invalid(format!(
            "m_transform_graph: {} snapshots vs M of size {}",
            g.num_timesteps(),
            m.size
        )));
    }
    let snapshots = (0..g.num_timesteps())
        .map(|t| {
            let (lo, weight) = m.band(t);
            let terms: Vec<_> = (lo..=t).map(|k| (weight, &g.snapshots[k])).collect();
            sparse_weighted_sum(&terms)
        })
        .collect::<Result<_>>()?;
    DynamicGraph::new(g.num_vertices, snapshots)
}

/// Edge-life smoothing: `A_t ← Σ_{i=max(1,t-l+1)}^{t} A_i`.
pub fn apply_edge_life(g: &DynamicGraph, life: usize) -> Result<DynamicGraph> {
    if life == 0 {
        return Err(Error::invalid("edge life must be >= 1"));
    }
    let snapshots = (0..g.num_timesteps())
        .map(|t| {
            let lo = (t + 1).saturating_sub(life);
            let terms: Vec<_> = (lo..=t).map(|k| (1.0, &g.snapshots[k])).collect();
            sparse_weighted_sum(&terms)
        })
        .collect::<Result<_>>()?;
    DynamicGraph::new(g.num_vertices, snapshots)
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D[u,u] = 1 + deg(u)`, where `deg(u)` is
/// the number of stored entries in row `u`.
pub fn normalize_laplacian(a: &SparseMatrix) -> SparseMatrix {
    let n = a.dim();
    let inv_sqrt: Vec<f64> = a
        .row_counts()
        .into_iter()
        .map(|deg| 1.0 / ((1 + deg) as f64).sqrt())
        .collect();
    let mut entries = Vec::with_capacity(a.nnz() + n);
    let src = a.entries();
    let mut i = 0;
    for u in 0..n as u32 {
        let mut diag_done = false;
        while i < src.len() && src[i].row == u {
            let e = src[i];
            if !diag_done && e.col >= u {
                let diag = if e.col == u { e.value + 1.0 } else { 1.0 };
                entries.push(Entry::new(u, u, diag));
                diag_done = true;
                if e.col == u {
                    i += 1;
                    continue;
                }
            }
            entries.push(e);
            i += 1;
        }
        if !diag_done {
            entries.push(Entry::new(u, u, 1.0));
        }
    }
    for e in &mut entries {
        e.value *= inv_sqrt[e.row as usize] * inv_sqrt[e.col as usize];
    }
    SparseMatrix::from_sorted_unchecked(n, entries)
}

/// Normalized Laplacian of every snapshot.
pub fn laplacian_sequence(g: &DynamicGraph) -> DynamicGraph {
    g.map_snapshots(normalize_laplacian)
}

/// Per-snapshot `N x 2` frames: out-degree then in-degree, counted
/// structurally.
pub fn degree_features(g: &DynamicGraph) -> FeatureSequence {
    let frames = g
        .snapshots
        .iter()
        .map(|s| {
            let out = s.row_counts();
            let inc = s.col_counts();
            DenseMatrix::from_fn(g.num_vertices, 2, |r, c| {
                if c == 0 {
                    out[r] as f64
                } else {
                    inc[r] as f64
                }
            })
        })
        .collect();
    FeatureSequence { frames }
}

/// `Ã_t · X_t` for every timestep.
pub fn aggregate_frames(laplacians: &DynamicGraph, x: &FeatureSequence) -> Result<FeatureSequence> {
    if laplacians.num_timesteps() != x.len() {
        return Err(Error::invalid(format!(
            "{} snapshots vs {} frames",
            laplacians.num_timesteps(),
            x.len()
        )));
    }
    let frames = laplacians
        .snapshots
        .iter()
        .zip(&x.frames)
        .map(|(a, f)| spmm(a, f))
        .collect::<Result<_>>()?;
    Ok(FeatureSequence { frames })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm(dim: usize, e: &[(u32, u32, f64)]) -> SparseMatrix {
        SparseMatrix::from_triplets(
            dim,
            e.iter().map(|&(r, c, v)| Entry::new(r, c, v)).collect(),
        )
        .unwrap()
    }

    fn dense_laplacian(a: &SparseMatrix) -> DenseMatrix {
        let n = a.dim();
        let mut d = a.to_dense();
        let deg = a.row_counts();
        for u in 0..n {
            d.set(u, u, d.get(u, u) + 1.0);
        }
        DenseMatrix::from_fn(n, n, |u, v| {
            d.get(u, v) / (((1 + deg[u]) * (1 + deg[v])) as f64).sqrt()
        })
    }

    #[test]
    fn laplacian_isolated_vertex() {
        assert_eq!(
            normalize_laplacian(&SparseMatrix::empty(1)).entries(),
            &[Entry::new(0, 0, 1.0)]
        );
        assert_eq!(
            normalize_laplacian(&SparseMatrix::empty(3)),
            SparseMatrix::identity(3)
        );
    }

    #[test]
    fn laplacian_single_undirected_edge() {
        let l = normalize_laplacian(&sm(2, &[(0, 1, 1.0), (1, 0, 1.0)]));
        assert_eq!(l.nnz(), 4);
        for e in l.entries() {
            assert!((e.value - 0.5).abs() < 1e-15, "{e:?}");
        }
    }

    #[test]
    fn laplacian_matches_dense_formula_with_self_loops() {
        let a = sm(
            5,
            &[
                (0, 0, 2.0),
                (0, 3, 1.0),
                (1, 4, 0.5),
                (2, 1, 1.0),
                (2, 2, 1.0),
                (4, 0, 3.0),
            ],
        );
        let l = normalize_laplacian(&a);
        l.check_canonical().unwrap();
        assert!(l.to_dense().max_abs_diff(&dense_laplacian(&a)) < 1e-15);
    }

    #[test]
    fn edge_life_examples() {
        let e1 = sm(4, &[(0, 1, 1.0)]);
        let e2 = sm(4, &[(1, 2, 1.0)]);
        let e3 = sm(4, &[(2, 3, 1.0)]);
        let g = DynamicGraph::new(4, vec![e1.clone(), e2.clone(), e3.clone()]).unwrap();
        assert_eq!(apply_edge_life(&g, 1).unwrap(), g);
        let s = apply_edge_life(&g, 2).unwrap();
        assert_eq!(s.snapshot(0), &e1);
        assert_eq!(s.snapshot(1), &sm(4, &[(0, 1, 1.0), (1, 2, 1.0)]));
        assert_eq!(s.snapshot(2), &sm(4, &[(1, 2, 1.0), (2, 3, 1.0)]));
        let empty = DynamicGraph::empty(4, 3).unwrap();
        assert_eq!(apply_edge_life(&empty, 3).unwrap(), empty);
        assert!(apply_edge_life(&g, 0).is_err());
    }

    #[test]
    fn m_matrix_examples() {
        assert_eq!(build_m_matrix(1, 1).unwrap().matrix().values(), &[1.0]);
        let m = build_m_matrix(3, 2).unwrap();
        assert_eq!(
            m.matrix().values(),
            &[1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]
        );
        let wide = build_m_matrix(4, 9).unwrap();
        for t in 0..4 {
            for k in 0..4 {
                let want = if k <= t { 1.0 / (t + 1) as f64 } else { 0.0 };
                assert_eq!(wide.matrix().get(t, k), want);
            }
        }
        assert!(build_m_matrix(0, 1).is_err());
        assert!(build_m_matrix(3, 0).is_err());
    }

    #[test]
    fn m_transform_feature_examples() {
        let x = FeatureSequence::new(vec![
            DenseMatrix::from_rows(&[vec![2.0]]).unwrap(),
            DenseMatrix::from_rows(&[vec![4.0]]).unwrap(),
        ])
        .unwrap();
        assert_eq!(
            m_transform_features(&x, &build_m_matrix(2, 1).unwrap()).unwrap(),
            x
        );
        let y = m_transform_features(&x, &build_m_matrix(2, 2).unwrap()).unwrap();
        assert_eq!(y.frame(0).values(), &[2.0]);
        assert_eq!(y.frame(1).values(), &[3.0]);
        let zeros = FeatureSequence::new(vec![DenseMatrix::zeros(3, 2); 4]).unwrap();
        assert_eq!(
            m_transform_features(&zeros, &build_m_matrix(4, 3).unwrap()).unwrap(),
            zeros
        );
        assert!(m_transform_features(&x, &build_m_matrix(3, 1).unwrap()).is_err());
    }

    #[test]
    fn m_transform_graph_examples() {
        let g = DynamicGraph::new(2, vec![sm(2, &[(0, 1, 1.0)]), SparseMatrix::empty(2)]).unwrap();
        assert_eq!(
            m_transform_graph(&g, &build_m_matrix(2, 1).unwrap()).unwrap(),
            g
        );
        let s = m_transform_graph(&g, &build_m_matrix(2, 2).unwrap()).unwrap();
        assert_eq!(s.snapshot(0), &sm(2, &[(0, 1, 1.0)]));
        assert_eq!(s.snapshot(1), &sm(2, &[(0, 1, 0.5)]));
        let empty = DynamicGraph::empty(3, 2).unwrap();
        assert_eq!(
            m_transform_graph(&empty, &build_m_matrix(2, 2).unwrap()).unwrap(),
            empty
        );
    }

    #[test]
    fn degree_feature_examples() {
        let empty = DynamicGraph::empty(3, 2).unwrap();
        for f in degree_features(&empty).frames() {
            assert_eq!(f, &DenseMatrix::zeros(3, 2));
        }
        let g = DynamicGraph::new(2, vec![sm(2, &[(0, 1, 1.0)])]).unwrap();
        assert_eq!(degree_features(&g).frame(0).values(), &[1.0, 0.0, 0.0, 1.0]);
        let loop_g = DynamicGraph::new(2, vec![sm(2, &[(0, 0, 1.0)])]).unwrap();
        assert_eq!(degree_features(&loop_g).frame(0).row(0), &[1.0, 1.0]);
    }

    #[test]
    fn graph_rejects_mismatched_snapshots() {
        assert!(DynamicGraph::new(3, vec![]).is_err());
        assert!(DynamicGraph::new(3, vec![SparseMatrix::empty(2)]).is_err());
    }
}
