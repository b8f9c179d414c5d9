//! Execution strategy for independent, index-addressed work items.

use alloc::vec::Vec;

/// Maps `f` over `0..count` and returns results in index order.
///
/// Implementations may run items concurrently, but the output order and
/// contents must not depend on scheduling.
pub trait DrawMap: Sync {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs items one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl DrawMap for Sequential {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
