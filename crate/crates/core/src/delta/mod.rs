//! Graph-difference encoding of consecutive snapshots.
//!
//! Given a resident snapshot `A_i` and the next snapshot `A_{i+1}`, only the
//! indices that leave (`ext_prev`), the indices that arrive (`ext_next`), and
//! every value of `A_{i+1}` are shipped. The receiver drops `ext_prev` from
//! `A_i` to obtain the common indices, merges in `ext_next`, and attaches the
//! values in canonical order.
//!
//! Transfer cost is accounted in entries (index pairs and values), not bytes.

mod dump;

pub use dump::{decode_delta_stream, encode_delta_stream, read_delta_stream, write_delta_stream};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Entry, SparseMatrix};

pub type Index = (u32, u32);

/// Difference between two snapshots of equal dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDelta {
    pub dim: usize,
    /// Indices of `A_i` absent from `A_{i+1}`, sorted.
    pub ext_prev: Vec<Index>,
    /// Indices of `A_{i+1}` absent from `A_i`, sorted.
    pub ext_next: Vec<Index>,
    /// All values of `A_{i+1}` in canonical entry order.
    pub values_next: Vec<f64>,
}

impl SnapshotDelta {
    /// Index entries this delta costs to transfer.
    pub fn index_entries(&self) -> usize {
        self.ext_prev.len() + self.ext_next.len()
    }
}

/// Cumulative transfer cost counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferLedger {
    pub index_entries_sent: u64,
    pub value_entries_sent: u64,
    pub snapshots_full: u64,
    pub snapshots_delta: u64,
}

impl TransferLedger {
    pub fn charge_full(&mut self, s: &SparseMatrix) {
        self.index_entries_sent += s.nnz() as u64;
        self.value_entries_sent += s.nnz() as u64;
        self.snapshots_full += 1;
    }

    pub fn charge_delta(&mut self, d: &SnapshotDelta) {
        self.index_entries_sent += d.index_entries() as u64;
        self.value_entries_sent += d.values_next.len() as u64;
        self.snapshots_delta += 1;
    }

    pub fn merge(&mut self, other: &TransferLedger) {
        self.index_entries_sent += other.index_entries_sent;
        self.value_entries_sent += other.value_entries_sent;
        self.snapshots_full += other.snapshots_full;
        self.snapshots_delta += other.snapshots_delta;
    }

    /// Fraction of transferred snapshots that went as deltas.
    pub fn delta_fraction(&self) -> f64 {
        let total = self.snapshots_full + self.snapshots_delta;
        if total == 0 {
            0.0
        } else {
            self.snapshots_delta as f64 / total as f64
        }
    }

    /// Bytes view: an index entry is two `u32`, a value one `f64`.
    pub fn bytes(&self) -> u64 {
        self.index_entries_sent * 8 + self.value_entries_sent * 8
    }
}

/// Linear merge of the two canonical index lists.
pub fn diff(a_i: &SparseMatrix, a_next: &SparseMatrix) -> Result<SnapshotDelta> {
    if a_i.dim() != a_next.dim() {
        return Err(Error::invalid(format!(
            "diff: dims {} and {} differ",
            a_i.dim(),
            a_next.dim()
        )));
    }
    let prev = a_i.entries();
    let next = a_next.entries();
    let (mut i, mut j) = (0, 0);
    let mut ext_prev = Vec::new();
    let mut ext_next = Vec::new();
    while i < prev.len() && j < next.len() {
        match prev[i].index().cmp(&next[j].index()) {
            Ordering::Less => {
                ext_prev.push(prev[i].index());
                i += 1;
            }
            Ordering::Greater => {
                ext_next.push(next[j].index());
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    ext_prev.extend(prev[i..].iter().map(Entry::index));
    ext_next.extend(next[j..].iter().map(Entry::index));
    Ok(SnapshotDelta {
        dim: a_next.dim(),
        ext_prev,
        ext_next,
        values_next: a_next.values().collect(),
    })
}

/// Reconstructs `A_{i+1}` from the resident `A_i` and a delta.
pub fn apply(a_i: &SparseMatrix, d: &SnapshotDelta) -> Result<SparseMatrix> {
    if a_i.dim() != d.dim {
        return Err(Error::CorruptDelta(format!(
            "delta for dim {} applied to dim {}",
            d.dim,
            a_i.dim()
        )));
    }
    check_sorted(&d.ext_prev, "ext_prev")?;
    check_sorted(&d.ext_next, "ext_next")?;

    // A^com = A_i \ ext_prev; every ext_prev index must be present in A_i.
    let mut common = Vec::with_capacity(a_i.nnz().saturating_sub(d.ext_prev.len()));
    let mut k = 0;
    for idx in a_i.indices() {
        if k < d.ext_prev.len() && d.ext_prev[k] == idx {
            k += 1;
        } else if k < d.ext_prev.len() && d.ext_prev[k] < idx {
            return Err(Error::CorruptDelta(format!(
                "ext_prev index {:?} not present in the base snapshot",
                d.ext_prev[k]
            )));
        } else {
            common.push(idx);
        }
    }
    if k < d.ext_prev.len() {
        return Err(Error::CorruptDelta(format!(
            "ext_prev index {:?} not present in the base snapshot",
            d.ext_prev[k]
        )));
    }

    // indices(A_{i+1}) = A^com ∪ ext_next, disjoint.
    let total = common.len() + d.ext_next.len();
    if total != d.values_next.len() {
        return Err(Error::CorruptDelta(format!(
            "{} reconstructed indices but {} values",
            total,
            d.values_next.len()
        )));
    }
    let dim = d.dim as u32;
    let mut entries = Vec::with_capacity(total);
    let (mut a, mut b) = (0, 0);
    let mut values = d.values_next.iter().copied();
    while a < common.len() || b < d.ext_next.len() {
        let idx = match (common.get(a), d.ext_next.get(b)) {
            (Some(c), Some(n)) if c == n => {
                return Err(Error::CorruptDelta(format!(
                    "ext_next index {n:?} already present in the common set"
                )));
            }
            (Some(c), Some(n)) if c < n => {
                a += 1;
                *c
            }
            (Some(c), None) => {
                a += 1;
                *c
            }
            (_, Some(n)) => {
                b += 1;
                *n
            }
            (None, None) => unreachable!(),
        };
        if idx.0 >= dim || idx.1 >= dim {
            return Err(Error::CorruptDelta(format!("index {idx:?} out of range")));
        }
        // counts were checked above, so a value is always available
        let value = values.next().unwrap_or_default();
        entries.push(Entry::new(idx.0, idx.1, value));
    }
    Ok(SparseMatrix::from_sorted_unchecked(d.dim, entries))
}

fn check_sorted(list: &[Index], name: &str) -> Result<()> {
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::CorruptDelta(format!(
            "{name} is not strictly sorted"
        )));
    }
    Ok(())
}

/// Streams a contiguous run of snapshots to a receiver: the first one in
/// full, every later one as a delta against the previously reconstructed
/// snapshot. Yields the receiver-side reconstruction of each snapshot and
/// charges `ledger` as it goes.
pub fn stream_block<'a>(
    snapshots: &'a [SparseMatrix],
    ledger: &'a mut TransferLedger,
) -> BlockStream<'a> {
    BlockStream {
        snapshots,
        ledger,
        pos: 0,
        resident: None,
    }
}

pub struct BlockStream<'a> {
    snapshots: &'a [SparseMatrix],
    ledger: &'a mut TransferLedger,
    pos: usize,
    resident: Option<SparseMatrix>,
}

impl Iterator for BlockStream<'_> {
    type Item = Result<SparseMatrix>;

    fn next(&mut self) -> Option<Self::Item> {
        let next = self.snapshots.get(self.pos)?;
        self.pos += 1;
        let received = match &self.resident {
            None => {
                self.ledger.charge_full(next);
                Ok(next.clone())
            }
            Some(prev) => diff(prev, next).and_then(|d| {
                self.ledger.charge_delta(&d);
                apply(prev, &d)
            }),
        };
        if let Ok(s) = &received {
            self.resident = Some(s.clone());
        }
        Some(received)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.snapshots.len() - self.pos;
        (left, Some(left))
    }
}

/// Cost of shipping every snapshot in plain (index, value) form.
pub fn naive_cost(snapshots: &[SparseMatrix]) -> TransferLedger {
    let mut ledger = TransferLedger::default();
    for s in snapshots {
        ledger.charge_full(s);
    }
    ledger
}
