//! Shared fixtures for the criterion benchmarks.

use woqt_core::{synth_weights, Activation, Distribution, Tensor};

/// Seeded gaussian weight matrix.
pub fn weights(rows: usize, cols: usize, seed: u64) -> Tensor {
    synth_weights(
        "w",
        rows,
        cols,
        Distribution::Gaussian {
            mean: 0.0,
            std: 0.5,
        },
        seed,
    )
    .unwrap()
}

/// Seeded activation block.
pub fn activation(m: usize, k: usize, seed: u64) -> Activation {
    let t = synth_weights(
        "a",
        m,
        k,
        Distribution::Gaussian {
            mean: 0.0,
            std: 1.0,
        },
        seed,
    )
    .unwrap();
    Activation::new(m, k, t.data().to_vec()).unwrap()
}
