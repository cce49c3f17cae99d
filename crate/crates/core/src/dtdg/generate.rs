use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DynamicGraph;
use crate::error::{Error, Result};
use crate::tensor::{Entry, SparseMatrix};

/// Random DTDG for weak-scaling experiments: each of the `T` snapshots
/// independently holds `round(N·f)` distinct uniformly drawn `(u, v)` pairs
/// (self-loops allowed) with value 1.0. Fully determined by `seed`.
pub fn generate_random_dtdg(
    timesteps: usize,
    num_vertices: usize,
    density: f64,
    seed: u64,
) -> Result<DynamicGraph> {
    if timesteps == 0 || num_vertices == 0 {
        return Err(Error::invalid("generator needs T >= 1 and N >= 1"));
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::invalid(format!(
            "edge density must be > 0, got {density}"
        )));
    }
    let pairs = num_vertices
        .checked_mul(num_vertices)
        .ok_or_else(|| Error::invalid("N² overflows"))?;
    let m = (num_vertices as f64 * density).round() as usize;
    if m > pairs {
        return Err(Error::invalid(format!(
            "N·f = {m} edges exceeds the {pairs} available vertex pairs"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snapshots = (0..timesteps)
        .map(|_| {
            let mut picked = index::sample(&mut rng, pairs, m).into_vec();
            picked.sort_unstable();
            let entries = picked
                .into_iter()
                .map(|p| Entry::new((p / num_vertices) as u32, (p % num_vertices) as u32, 1.0))
                .collect();
            SparseMatrix::from_sorted_unchecked(num_vertices, entries)
        })
        .collect();
    DynamicGraph::new(num_vertices, snapshots)
}
