//! Shared fixtures for unit tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dtdg::{generate_random_dtdg, laplacian_sequence, DynamicGraph, FeatureSequence};
use crate::models::{GraphInput, ModelConfig};
use crate::tensor::DenseMatrix;
use crate::training::LabelSet;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_features(timesteps: usize, n: usize, f: usize, seed: u64) -> FeatureSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureSequence::new(
        (0..timesteps)
            .map(|_| random_matrix(&mut rng, n, f))
            .collect(),
    )
    .unwrap()
}

/// Random graph, its Laplacians and random features wrapped for `cfg`.
pub fn toy_input(
    cfg: &ModelConfig,
    timesteps: usize,
    n: usize,
    seed: u64,
) -> (DynamicGraph, GraphInput) {
    let g = generate_random_dtdg(timesteps, n, 1.5, seed).unwrap();
    let x = random_features(timesteps, n, cfg.input_len(), seed ^ 0x5eed);
    let input = GraphInput::new(cfg, laplacian_sequence(&g), x).unwrap();
    (g, input)
}

pub fn random_labels(timesteps: usize, n: usize, per_step: usize, seed: u64) -> LabelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = LabelSet::empty(timesteps);
    for step in &mut labels.steps {
        for _ in 0..per_step {
            let pair = (rng.gen_range(0..n) as u32, rng.gen_range(0..n) as u32);
            step.push(pair, rng.gen_range(0..2));
        }
    }
    labels
}
