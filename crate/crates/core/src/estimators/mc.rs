//! Monte Carlo harness.
//!
//! Paths run in parallel but are always reduced in ascending index order with
//! compensated summation, so results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl McResult {
    /// `|mean| ≤ sigmas · stderr`.
    pub fn consistent_with_zero(&self, sigmas: f64) -> bool {
        self.mean.abs() <= sigmas * self.stderr
    }
}

/// Neumaier compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean and standard error of `samples`, in the given order.
pub fn summarize(samples: &[f64], seed: u64) -> Result<McResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::param("n_paths", n as f64, "need at least two samples"));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::PathFailed {
            index: i as u64,
            source: Box::new(Error::Invalid("non-finite sample".into())),
        });
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
    let var = ss / (n - 1) as f64;
    Ok(McResult {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
        seed,
    })
}

/// Runs `f(index)` for every path index and returns the results in index
/// order. `workers = 0` uses rayon's global pool. The first failing index,
/// in ascending order, is reported.
pub fn mc_collect<T, F>(n_paths: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || -> Vec<Result<T>> { (0..n_paths as u64).into_par_iter().map(&f).collect() };
    let outcomes = if workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?
            .install(run)
    };
    outcomes
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::PathFailed {
                index: i as u64,
                source: Box::new(e),
            })
        })
        .collect()
}

/// `𝔼 f` over paths `0..n_paths` of an experiment with the given seed.
pub fn mc_expectation<F>(n_paths: usize, seed: u64, workers: usize, f: F) -> Result<McResult>
where
    F: Fn(u64, u64) -> Result<f64> + Sync + Send,
{
    if n_paths < 2 {
        return Err(Error::param("n_paths", n_paths as f64, "need at least two paths"));
    }
    let samples = mc_collect(n_paths, workers, |i| f(seed, i))?;
    summarize(&samples, seed)
}

/// Column-wise summaries of per-path vectors of equal length.
pub fn summarize_columns(rows: &[Vec<f64>], seed: u64) -> Result<Vec<McResult>> {
    let width = rows.first().map_or(0, Vec::len);
    let mut column = vec![0.0; rows.len()];
    (0..width)
        .map(|c| {
            for (dst, row) in column.iter_mut().zip(rows) {
                *dst = row[c];
            }
            summarize(&column, seed)
        })
        .collect()
}
