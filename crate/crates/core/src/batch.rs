// SPDX-License-Identifier: Apache-2.0

//! Deterministic trial batches, data-parallel when the `parallel` feature
//! is enabled (the default).
//!
//! Scenario batteries and acceptance sweeps run thousands of independent,
//! individually-seeded trials. Each trial is a pure function of its index,
//! so the batch can fan out across threads and still produce the exact
//! output of the sequential run: results come back in index order.
//!
//! `run_indexed` dispatches on the feature; `run_indexed_seq` is always
//! sequential so benchmarks can compare the two on the same build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f(0), f(1), …, f(count - 1)` and collects the results in index
/// order. Parallel when the `parallel` feature is on; `f` must be a pure
/// function of the index for the two modes to agree.
pub fn run_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Sequential reference path, independent of the feature flag.
pub fn run_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
