use std::collections::BTreeMap;

use proptest::prelude::*;

use dyngnn::delta::{
    apply, decode_delta_stream, diff, encode_delta_stream, naive_cost, stream_block, TransferLedger,
};
use dyngnn::dist::{plan_snapshot_partition, VertexChunks};
use dyngnn::dtdg::build_m_matrix;
use dyngnn::tensor::{sparse_weighted_sum, spmm, DenseMatrix, Entry, SparseMatrix};

fn triplets(
    dim: usize,
    max: usize,
    values: impl Strategy<Value = f64>,
) -> impl Strategy<Value = Vec<Entry>> {
    prop::collection::vec((0..dim as u32, 0..dim as u32, values), 0..=max)
        .prop_map(|v| v.into_iter().map(|(r, c, x)| Entry::new(r, c, x)).collect())
}

fn sparse(dim: usize, max: usize) -> impl Strategy<Value = SparseMatrix> {
    triplets(dim, max, -3.0..3.0f64).prop_map(move |t| SparseMatrix::from_triplets(dim, t).unwrap())
}

/// Small integer values keep every sum exact, whatever the order.
fn integer_sparse(dim: usize, max: usize) -> impl Strategy<Value = SparseMatrix> {
    triplets(dim, max, (-4i32..=4).prop_map(f64::from))
        .prop_map(move |t| SparseMatrix::from_triplets(dim, t).unwrap())
}

fn dense_of(dim: usize, entries: &[Entry]) -> Vec<f64> {
    let mut d = vec![0.0; dim * dim];
    for e in entries {
        d[e.row as usize * dim + e.col as usize] += e.value;
    }
    d
}

fn timeline(dim: usize) -> impl Strategy<Value = Vec<SparseMatrix>> {
    prop::collection::vec(sparse(dim, 40), 1..8)
}

proptest! {
    #[test]
    fn diff_then_apply_is_exact(a in sparse(12, 60), b in sparse(12, 60)) {
        let d = diff(&a, &b).unwrap();
        prop_assert_eq!(apply(&a, &d).unwrap(), b.clone());
        // the delta never ships more indices than both snapshots together
        prop_assert!(d.index_entries() <= a.nnz() + b.nnz());
        prop_assert_eq!(d.values_next.len(), b.nnz());
    }

    #[test]
    fn diff_of_equal_snapshots_is_empty(a in sparse(10, 50)) {
        let d = diff(&a, &a).unwrap();
        prop_assert_eq!(d.index_entries(), 0);
        prop_assert_eq!(apply(&a, &d).unwrap(), a);
    }

    #[test]
    fn stream_reconstructs_every_snapshot(snaps in timeline(9)) {
        let mut ledger = TransferLedger::default();
        let received: Vec<_> = stream_block(&snaps, &mut ledger).collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(&received, &snaps);
        let naive = naive_cost(&snaps);
        prop_assert_eq!(ledger.value_entries_sent, naive.value_entries_sent);
        prop_assert_eq!(ledger.snapshots_full, 1);
        prop_assert_eq!(ledger.snapshots_delta as usize, snaps.len() - 1);
    }

    #[test]
    fn delta_stream_encoding_round_trips(snaps in timeline(7)) {
        let mut deltas = vec![diff(&SparseMatrix::empty(7), &snaps[0]).unwrap()];
        for w in snaps.windows(2) {
            deltas.push(diff(&w[0], &w[1]).unwrap());
        }
        let bytes = encode_delta_stream(&deltas).unwrap();
        prop_assert_eq!(decode_delta_stream(&bytes, 7).unwrap(), deltas);
    }

    #[test]
    fn canonical_form_is_idempotent(t in triplets(8, 60, -2.0..2.0f64)) {
        let m = SparseMatrix::from_triplets(8, t).unwrap();
        prop_assert!(m.check_canonical().is_ok());
        let again = SparseMatrix::from_triplets(8, m.entries().to_vec()).unwrap();
        prop_assert_eq!(&again, &m);
        prop_assert!(m.values().all(|v| v != 0.0));
    }

    #[test]
    fn canonical_form_sums_duplicates(t in triplets(6, 40, (-4i32..=4).prop_map(f64::from))) {
        let m = SparseMatrix::from_triplets(6, t.clone()).unwrap();
        prop_assert_eq!(m.to_dense().values().to_vec(), dense_of(6, &t));
    }

    #[test]
    fn weighted_sum_commutes(
        terms in prop::collection::vec(((-3i32..=3).prop_map(f64::from), integer_sparse(7, 30)), 1..5),
        seed in any::<u64>(),
    ) {
        let refs: Vec<(f64, &SparseMatrix)> = terms.iter().map(|(w, m)| (*w, m)).collect();
        let forward = sparse_weighted_sum(&refs).unwrap();
        let mut shuffled = refs.clone();
        shuffled.rotate_left(seed as usize % refs.len());
        shuffled.reverse();
        prop_assert_eq!(&sparse_weighted_sum(&shuffled).unwrap(), &forward);

        let mut oracle = BTreeMap::new();
        for (w, m) in &terms {
            for e in m.entries() {
                *oracle.entry((e.row, e.col)).or_insert(0.0) += w * e.value;
            }
        }
        oracle.retain(|_, v| *v != 0.0);
        let got: BTreeMap<_, _> = forward.entries().iter().map(|e| ((e.row, e.col), e.value)).collect();
        prop_assert_eq!(got, oracle);
    }

    #[test]
    fn spmm_matches_dense_product(a in sparse(6, 30), x in prop::collection::vec(-2.0..2.0f64, 18)) {
        let x = DenseMatrix::from_vec(6, 3, x).unwrap();
        let y = spmm(&a, &x).unwrap();
        let d = a.to_dense();
        for i in 0..6 {
            for j in 0..3 {
                let expect: f64 = (0..6).map(|k| d.get(i, k) * x.get(k, j)).sum();
                prop_assert!((y.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn m_matrix_rows_average(t in 1usize..40, w in 1usize..10) {
        let m = build_m_matrix(t, w).unwrap();
        for i in 0..t {
            let row = m.matrix().row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let support = row.iter().filter(|v| **v != 0.0).count();
            prop_assert_eq!(support, w.min(i + 1));
            prop_assert!(row[i + 1..].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn snapshot_partition_owns_each_timestep_once(p in 1usize..6, nblk in 1usize..4, runs in 1usize..4) {
        let t = p * nblk * runs;
        let plan = plan_snapshot_partition(t, p, nblk).unwrap();
        let mut seen = vec![0; t];
        for q in 0..p {
            for s in plan.owned_all(q) {
                seen[s] += 1;
                prop_assert_eq!(plan.owner(s), q);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn vertex_chunks_cover_and_balance(n in 1usize..200, p in 1usize..16) {
        prop_assume!(p <= n);
        let chunks = VertexChunks::balanced(n, p).unwrap();
        let mut next = 0;
        let sizes: Vec<usize> = (0..p)
            .map(|q| {
                let r = chunks.chunk(q);
                assert_eq!(r.start, next);
                next = r.end;
                r.len()
            })
            .collect();
        prop_assert_eq!(next, n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
