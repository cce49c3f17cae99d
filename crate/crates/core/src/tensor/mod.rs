//! Dense and sparse numeric kernels.
//!
//! Every reduction runs in a fixed order (row-major, inner index ascending,
//! sparse entries in canonical order) so that two computations performing the
//! same arithmetic on the same rows agree bit for bit, however the rows are
//! distributed.

mod dense;
mod sparse;

pub use dense::{matmul, DenseMatrix};
pub(crate) use dense::{matmul_acc, matmul_nt, matmul_tn_acc};
pub use sparse::{sparse_weighted_sum, spmm, spmm_transpose, Entry, SparseMatrix};
