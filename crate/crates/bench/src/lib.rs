// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared fixtures for the benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsbreak_core::kalman::RowSmoothingProblem;
use tsbreak_core::{DiffPath, LaggedDesign, TimeSeries};

/// Uniform white noise, `n x p`.
pub fn noise_series(n: usize, p: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TimeSeries::new(DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))).unwrap()
}

/// Design with `t` rows plus random `W` and `Omega` of matching shape.
pub fn global_fixture(
    t: usize,
    p: usize,
    lag: usize,
    seed: u64,
) -> (LaggedDesign, DiffPath, DiffPath) {
    let design = LaggedDesign::new(&noise_series(t + lag, p, seed), lag).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut path = || {
        let blocks = (0..t)
            .map(|_| DMatrix::from_fn(p, p * lag, |_, _| rng.random_range(-0.1..0.1)))
            .collect();
        DiffPath::new(blocks, lag).unwrap()
    };
    let w = path();
    let omega = path();
    (design, w, omega)
}

pub fn row_fixture(t: usize, p: usize, lag: usize, seed: u64) -> RowSmoothingProblem {
    let design = LaggedDesign::new(&noise_series(t + lag, p, seed), lag).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let bias = DMatrix::from_fn(t, p * lag, |_, _| rng.random_range(-0.1..0.1));
    RowSmoothingProblem::new(
        design.targets().column(0).into_owned(),
        design.regressors().clone(),
        bias,
        1.0,
    )
    .unwrap()
}
