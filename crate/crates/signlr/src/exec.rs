use rayon::prelude::*;
use signlr_core::CopyExecutor;

use crate::error::{CliError, Result};

/// Runs copy chunks on a dedicated rayon pool. Output order follows job
/// index, so results do not depend on the thread count.
pub struct ThreadPoolExecutor {
    pool: rayon::ThreadPool,
}

impl ThreadPoolExecutor {
    /// `threads == 0` uses every available core.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Invariant(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl CopyExecutor for ThreadPoolExecutor {
    fn run<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, jobs: usize, f: F) -> Vec<T> {
        self.pool.install(|| (0..jobs).into_par_iter().map(f).collect())
    }
}
