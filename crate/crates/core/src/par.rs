//! Row-parallel helpers with a sequential fallback.
//!
//! Reductions always gather per-row partials in row order and sum them
//! sequentially, so results are bit-identical across execution modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` degrades to sequential when the crate is built without the
    /// `parallel` feature.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Apply `f(row_index, row)` to each contiguous row of width `width`.
pub fn for_each_row<F>(exec: Execution, data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
        return;
    }
    let _ = exec;
    data.chunks_mut(width).enumerate().for_each(|(j, row)| f(j, row));
}

/// Fallible variant of [`for_each_row`]; the first error in row order wins.
pub fn try_for_each_row<F, E>(exec: Execution, data: &mut [f64], width: usize, f: F) -> Result<(), E>
where
    F: Fn(usize, &mut [f64]) -> Result<(), E> + Send + Sync,
    E: Send,
{
    let results: Vec<Result<(), E>> = {
        #[cfg(feature = "parallel")]
        {
            if exec.is_parallel() {
                data.par_chunks_mut(width)
                    .enumerate()
                    .map(|(j, row)| f(j, row))
                    .collect()
            } else {
                data.chunks_mut(width).enumerate().map(|(j, row)| f(j, row)).collect()
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = exec;
            data.chunks_mut(width).enumerate().map(|(j, row)| f(j, row)).collect()
        }
    };
    results.into_iter().collect()
}

/// `(0..n).map(f)` collected in index order.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Deterministic sum of `f(j)` over `0..n`.
pub fn sum_indices<F>(exec: Execution, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    map_indices(exec, n, f).into_iter().sum()
}
