use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LabelSet, StepLabels};
use crate::dtdg::DynamicGraph;
use crate::error::{Error, Result};
use crate::tensor::SparseMatrix;

/// Number of positive pairs drawn from a snapshot with `nnz` edges.
pub fn positives_for(theta: f64, nnz: usize) -> usize {
    // The small slack keeps products such as 0.1 * 30 from rounding up.
    ((theta * nnz as f64 - 1e-9).ceil().max(0.0) as usize).min(nnz)
}

/// Link-prediction supervision. At each timestep, `⌈θ·nnz⌉` edges are drawn
/// without replacement (label 1) together with as many distinct vertex
/// pairs absent from that snapshot (label 0). Every timestep but the last
/// forms the training set; the last one is the test set.
pub fn sample_link_prediction_sets(
    g: &DynamicGraph,
    theta: f64,
    seed: u64,
) -> Result<(LabelSet, LabelSet)> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::config(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    let t_len = g.num_timesteps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = LabelSet::empty(t_len);
    let mut test = LabelSet::empty(t_len);
    for (t, snap) in g.snapshots().iter().enumerate() {
        let step = sample_step(snap, theta, &mut rng);
        if t + 1 == t_len {
            test.steps[t] = step;
        } else {
            train.steps[t] = step;
        }
    }
    Ok((train, test))
}

fn sample_step(snap: &SparseMatrix, theta: f64, rng: &mut ChaCha8Rng) -> StepLabels {
    let n = snap.dim();
    let k = positives_for(theta, snap.nnz());
    let mut step = StepLabels::default();
    let mut picked = index::sample(rng, snap.nnz(), k).into_vec();
    picked.sort_unstable();
    for i in picked {
        step.push(snap.entries()[i].index(), 1);
    }
    let total_pairs = n * n;
    let negatives = k.min(total_pairs - snap.nnz());
    let edges: HashSet<(u32, u32)> = snap.indices().collect();
    if negatives * 2 <= total_pairs - snap.nnz() {
        let mut seen = HashSet::with_capacity(negatives);
        while seen.len() < negatives {
            let pair = (rng.gen_range(0..n) as u32, rng.gen_range(0..n) as u32);
            if !edges.contains(&pair) && seen.insert(pair) {
                step.push(pair, 0);
            }
        }
    } else {
        // Dense snapshot: draw from the enumerated complement instead.
        let complement: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|u| (0..n as u32).map(move |v| (u, v)))
            .filter(|p| !edges.contains(p))
            .collect();
        for i in index::sample(rng, complement.len(), negatives) {
            step.push(complement[i], 0);
        }
    }
    step
}
