//! Execution strategy for the embarrassingly parallel loops of the pipeline.
//!
//! Every parallel section in this crate is phrased as "compute item `i` for
//! `i in 0..n`, collect in index order". An [`Executor`] decides how the items
//! are scheduled; results are always returned in index order, so outputs do
//! not depend on the number of workers.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(i)` for every `i in 0..n` and return the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
