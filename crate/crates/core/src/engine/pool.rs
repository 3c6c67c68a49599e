//! Worker pool running parallel phases over a task queue.

use std::sync::Mutex;

use crate::engine::queue::{Task, TaskQueue};
use crate::error::{Error, Result};

/// A fixed set of worker threads. One pool is created per run; phases are
/// separated by an implicit barrier (the scope join), after which the
/// caller performs the serial reduction.
pub struct WorkerPool {
    pool: rayon::ThreadPool,
    threads: usize,
}

impl WorkerPool {
    pub fn new(threads: usize) -> Result<Self> {
        let threads = threads.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::usage(format!("cannot build worker pool: {e}")))?;
        Ok(WorkerPool { pool, threads })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Runs one parallel phase: every worker repeatedly pulls a task from
    /// `queue` and applies its work function until the queue is exhausted.
    /// Outputs are returned in ascending task-index order regardless of
    /// which worker executed which task, which fixes the reduction order
    /// and makes results independent of stealing decisions.
    pub fn run_phase<P, M, W>(&self, queue: &TaskQueue, make_worker: M) -> Vec<P>
    where
        P: Send,
        M: Fn(usize) -> W + Sync,
        W: FnMut(&Task) -> P,
    {
        let slots: Vec<Mutex<Vec<(usize, P)>>> =
            (0..self.threads).map(|_| Mutex::new(Vec::new())).collect();
        self.pool.scope(|s| {
            for w in 0..self.threads {
                let slots = &slots;
                let make_worker = &make_worker;
                s.spawn(move |_| {
                    let mut work = make_worker(w);
                    let mut out = Vec::new();
                    while let Some(task) = queue.next_task(w) {
                        let p = work(&task);
                        out.push((task.index, p));
                    }
                    *slots[w].lock().unwrap() = out;
                });
            }
        });

        let mut all: Vec<(usize, P)> = slots
            .into_iter()
            .flat_map(|m| m.into_inner().unwrap())
            .collect();
        all.sort_unstable_by_key(|(i, _)| *i);
        debug_assert!(all.windows(2).all(|w| w[0].0 + 1 == w[1].0));
        all.into_iter().map(|(_, p)| p).collect()
    }
}
