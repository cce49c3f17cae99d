use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// One stored coordinate of a sparse matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub row: u32,
    pub col: u32,
    pub value: f64,
}

impl Entry {
    pub fn new(row: u32, col: u32, value: f64) -> Self {
        Self { row, col, value }
    }

    #[inline]
    pub fn index(&self) -> (u32, u32) {
        (self.row, self.col)
    }
}

/// Square sparse matrix in canonical coordinate form: entries strictly
/// sorted by `(row, col)`, no duplicates, all indices below `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    dim: usize,
    entries: Vec<Entry>,
}

impl SparseMatrix {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: (0..dim as u32).map(|i| Entry::new(i, i, 1.0)).collect(),
        }
    }

    /// Canonicalizes arbitrary triplets: sorts them and sums duplicates.
    /// Entries whose summed value is exactly zero are kept; structural
    /// presence is decided by the caller, not by the value.
    pub fn from_triplets(dim: usize, mut triplets: Vec<Entry>) -> Result<Self> {
        for e in &triplets {
            if e.row as usize >= dim || e.col as usize >= dim {
                return Err(Error::invalid(format!(
                    "entry ({}, {}) out of range for dim {dim}",
                    e.row, e.col
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::invalid(format!(
                    "entry ({}, {}) has non-finite value",
                    e.row, e.col
                )));
            }
        }
        triplets.sort_by_key(Entry::index);
        let mut entries: Vec<Entry> = Vec::with_capacity(triplets.len());
        for e in triplets {
            match entries.last_mut() {
                Some(last) if last.index() == e.index() => last.value += e.value,
                _ => entries.push(e),
            }
        }
        Ok(Self { dim, entries })
    }

    /// Wraps entries that are already canonical. Fails if they are not.
    pub fn from_sorted(dim: usize, entries: Vec<Entry>) -> Result<Self> {
        let m = Self { dim, entries };
        m.check_canonical()?;
        Ok(m)
    }

    /// Wraps entries the caller guarantees to be canonical.
    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<Entry>) -> Self {
        debug_assert!(Self {
            dim,
            entries: entries.clone()
        }
        .check_canonical()
        .is_ok());
        Self { dim, entries }
    }

    pub fn check_canonical(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[0].index() >= w[1].index() {
                return Err(Error::invalid(format!(
                    "entries not strictly sorted at ({}, {})",
                    w[1].row, w[1].col
                )));
            }
        }
        if let Some(e) = self
            .entries
            .iter()
            .find(|e| e.row as usize >= self.dim || e.col as usize >= self.dim)
        {
            return Err(Error::invalid(format!(
                "entry ({}, {}) out of range for dim {}",
                e.row, e.col, self.dim
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    pub fn indices(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().map(Entry::index)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.value)
    }

    /// Value at `(row, col)`, or `None` when the coordinate is not stored.
    pub fn get(&self, row: u32, col: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&(row, col), Entry::index)
            .ok()
            .map(|i| self.entries[i].value)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            d.set(e.row as usize, e.col as usize, e.value);
        }
        d
    }

    /// Sparse matrix holding the nonzero entries of a square dense matrix.
    pub fn from_dense(d: &DenseMatrix) -> Result<Self> {
        if d.rows() != d.cols() {
            return Err(Error::invalid("from_dense: matrix is not square"));
        }
        let mut entries = Vec::new();
        for r in 0..d.rows() {
            for c in 0..d.cols() {
                let v = d.get(r, c);
                if v != 0.0 {
                    entries.push(Entry::new(r as u32, c as u32, v));
                }
            }
        }
        Ok(Self {
            dim: d.rows(),
            entries,
        })
    }

    /// Number of stored entries per row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dim];
        for e in &self.entries {
            counts[e.row as usize] += 1;
        }
        counts
    }

    /// Number of stored entries per column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dim];
        for e in &self.entries {
            counts[e.col as usize] += 1;
        }
        counts
    }
}

/// Sparse-dense product `a · x`. Row `i` of the result accumulates
/// `v · x[j, :]` over the entries `(i, j, v)` in canonical order.
pub fn spmm(a: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if a.dim != x.rows() {
        return Err(Error::invalid(format!(
            "spmm: sparse dim {} vs dense rows {}",
            a.dim,
            x.rows()
        )));
    }
    let mut out = DenseMatrix::zeros(a.dim, x.cols());
    for e in &a.entries {
        let src = x.row(e.col as usize);
        let dst = out.row_mut(e.row as usize);
        for (d, s) in dst.iter_mut().zip(src) {
            *d += e.value * s;
        }
    }
    Ok(out)
}

/// Transposed sparse-dense product `aᵀ · x`.
pub fn spmm_transpose(a: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if a.dim != x.rows() {
        return Err(Error::invalid(format!(
            "spmm_transpose: sparse dim {} vs dense rows {}",
            a.dim,
            x.rows()
        )));
    }
    let mut out = DenseMatrix::zeros(a.dim, x.cols());
    for e in &a.entries {
        let src = x.row(e.row as usize);
        let dst = out.row_mut(e.col as usize);
        for (d, s) in dst.iter_mut().zip(src) {
            *d += e.value * s;
        }
    }
    Ok(out)
}

/// `Σ wₖ · mₖ` over sparse matrices of equal dimension. A coordinate is kept
/// iff its accumulated value is nonzero.
pub fn sparse_weighted_sum(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
    let Some(&(_, first)) = terms.first() else {
        return Err(Error::invalid("sparse_weighted_sum: empty term list"));
    };
    let dim = first.dim;
    for (w, m) in terms {
        if m.dim != dim {
            return Err(Error::invalid(format!(
                "sparse_weighted_sum: dims {} and {dim} differ",
                m.dim
            )));
        }
        if !w.is_finite() {
            return Err(Error::invalid("sparse_weighted_sum: non-finite weight"));
        }
    }
    // Pairwise k-way merge; each coordinate accumulates its terms in list order.
    let mut cursors = vec![0usize; terms.len()];
    let mut entries = Vec::new();
    loop {
        let next = terms
            .iter()
            .zip(&cursors)
            .filter_map(|((_, m), &c)| m.entries.get(c).map(Entry::index))
            .min();
        let Some(idx) = next else { break };
        let mut acc = 0.0;
        for ((w, m), c) in terms.iter().zip(cursors.iter_mut()) {
            if let Some(e) = m.entries.get(*c) {
                if e.index() == idx {
                    acc += w * e.value;
                    *c += 1;
                }
            }
        }
        if acc != 0.0 {
            entries.push(Entry::new(idx.0, idx.1, acc));
        }
    }
    Ok(SparseMatrix { dim, entries })
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

    #[test]
    fn spmm_identity_and_empty() {
        let x = DenseMatrix::from_fn(3, 2, |r, c| r as f64 - 2.0 * c as f64);
        assert_eq!(spmm(&SparseMatrix::identity(3), &x).unwrap(), x);
        assert_eq!(
            spmm(&SparseMatrix::empty(3), &x).unwrap(),
            DenseMatrix::zeros(3, 2)
        );
    }

    #[test]
    fn spmm_hand_example() {
        let a = sm(2, &[(0, 1, 2.0)]);
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(spmm(&a, &x).unwrap().values(), &[6.0, 0.0]);
    }

    #[test]
    fn spmm_dim_mismatch() {
        let x = DenseMatrix::zeros(4, 1);
        assert!(spmm(&SparseMatrix::empty(3), &x).is_err());
        assert!(spmm_transpose(&SparseMatrix::empty(3), &x).is_err());
    }

    #[test]
    fn weighted_sum_cases() {
        let a = sm(3, &[(0, 1, 1.0), (2, 2, 4.0)]);
        assert_eq!(sparse_weighted_sum(&[(1.0, &a)]).unwrap(), a);

        let p = sm(2, &[(0, 1, 1.0)]);
        let q = sm(2, &[(1, 0, 1.0)]);
        assert_eq!(
            sparse_weighted_sum(&[(1.0, &p), (1.0, &q)]).unwrap(),
            sm(2, &[(0, 1, 1.0), (1, 0, 1.0)])
        );
        assert_eq!(
            sparse_weighted_sum(&[(1.0, &p), (-1.0, &p)]).unwrap(),
            SparseMatrix::empty(2)
        );
        assert!(sparse_weighted_sum(&[(1.0, &p), (1.0, &a)]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_validate() {
        let m = sm(2, &[(1, 0, 1.0), (0, 1, 1.0), (1, 0, 2.5)]);
        assert_eq!(m.entries(), &[Entry::new(0, 1, 1.0), Entry::new(1, 0, 3.5)]);
        assert!(SparseMatrix::from_triplets(2, vec![Entry::new(2, 0, 1.0)]).is_err());
        assert!(
            SparseMatrix::from_sorted(2, vec![Entry::new(1, 0, 1.0), Entry::new(0, 1, 1.0)])
                .is_err()
        );
    }

    #[test]
    fn transpose_product_matches_dense() {
        let a = sm(3, &[(0, 2, 1.5), (1, 0, -2.0), (2, 1, 0.5), (2, 2, 3.0)]);
        let x = DenseMatrix::from_fn(3, 2, |r, c| (r + 1) as f64 * (c as f64 - 0.5));
        let want = super::super::matmul(&a.to_dense().transpose(), &x).unwrap();
        assert!(spmm_transpose(&a, &x).unwrap().max_abs_diff(&want) < 1e-14);
    }
}
