//! Thread-pool execution of independent draws.

use std::sync::Arc;

use gridstab_core::exec::DrawMap;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Runs draws on a rayon pool. Results come back in index order, so output
/// does not depend on the worker count.
#[derive(Clone, Default)]
pub struct Parallel {
    pool: Option<Arc<ThreadPool>>,
}

impl Parallel {
    /// `None` uses the global pool; `Some(n)` builds a pool of `n` workers.
    pub fn new(jobs: Option<usize>) -> Result<Self> {
        let pool = match jobs {
            None => None,
            Some(0) => return Err(Error::Validation("--jobs must be at least 1".into())),
            Some(n) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Validation(format!("cannot start {n} workers: {e}")))?,
            )),
        };
        Ok(Self { pool })
    }
}

impl DrawMap for Parallel {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let run = || (0..count).into_par_iter().map(&f).collect();
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }
}
