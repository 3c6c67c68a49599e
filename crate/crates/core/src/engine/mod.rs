//! Parallel MM execution kernel.
//!
//! One coordinator drives T workers through barrier-separated parallel
//! phases. Shared data (the matrix, previous-iteration centroids, pruning
//! geometry) is read-only during a phase; per-row state is mutated only by
//! the task owning the row; per-task partial results are folded serially
//! in ascending task order, so results are bit-identical for a fixed
//! thread count no matter how tasks were stolen.

pub mod pool;
pub mod queue;
pub mod shards;
pub mod source;

pub use pool::WorkerPool;
pub use queue::{build_tasks, ActiveSet, SchedulerMode, Task, TaskQueue, TaskRows};
pub use shards::RowShards;
pub use source::{FetchBuf, RowBlock, Source};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::CentroidSet;
use crate::metrics::{IterationMetrics, TaskStats};

/// When an algorithm is considered converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMode {
    /// Fraction of reassigned points at most `tol`.
    Fraction,
    /// Maximum centroid drift at most `tol`.
    Drift,
    /// Never; run exactly `max_iters` iterations.
    Iterations,
}

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    /// Worker threads T.
    pub threads: usize,
    /// Locality partitions P; 0 means "same as threads".
    pub partitions: usize,
    /// Maximum active rows per task.
    pub task_size: usize,
    pub max_iters: u32,
    pub tol: f64,
    pub scheduler: SchedulerMode,
    pub convergence: ConvergenceMode,
    /// Partitions are grouped into this many locality groups for the
    /// steal-order preference (home, same group, any).
    pub locality_groups: usize,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threads: 1,
            partitions: 0,
            task_size: 8192,
            max_iters: 20,
            tol: 0.0,
            scheduler: SchedulerMode::PartitionedStealing,
            convergence: ConvergenceMode::Fraction,
            locality_groups: 1,
            seed: 1,
        }
    }
}

impl EngineConfig {
    pub fn resolved_partitions(&self) -> usize {
        if self.partitions == 0 {
            self.threads
        } else {
            self.partitions
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::usage("threads must be at least 1"));
        }
        if self.task_size == 0 {
            return Err(Error::usage("task_size must be at least 1"));
        }
        if self.tol < 0.0 {
            return Err(Error::usage("tol must be non-negative"));
        }
        Ok(())
    }
}

/// What one iteration will do.
pub struct IterationPlan {
    /// Number of barrier-separated parallel phases (1 for a merged MM
    /// step, 2 when the M-steps run separately).
    pub phases: usize,
    /// Rows the iteration touches.
    pub active: ActiveSet,
}

/// Serial results of an iteration, reported after the reduction.
#[derive(Debug, Clone, Copy)]
pub struct IterationOutcome {
    pub objective: f64,
    pub max_drift: f64,
    /// Counters from serial work (empty-cluster repair, audits).
    pub extra: TaskStats,
}

/// Snapshot handed to per-iteration observers while workers are quiescent.
#[derive(Default)]
pub struct Observation<'a> {
    pub centroids: Option<&'a CentroidSet>,
    pub assignments: Option<&'a [u32]>,
}

/// Per-iteration callback: `(iteration, state, metrics)`.
pub type Observer<'o> = &'o mut dyn FnMut(u32, &Observation<'_>, &IterationMetrics);

/// The contract an algorithm implements against the engine: a serial
/// pre-phase, one or two parallel phases over tasks, and a serial
/// fixed-order reduction.
pub trait MmAlgorithm: Sync {
    /// Partial result of one task; folded in ascending task order.
    type Partial: Send;
    /// Reusable per-worker scratch.
    type Scratch: Default + Send;

    fn n(&self) -> usize;
    fn source(&self) -> &Source;

    /// Serial maintenance before the parallel phases (geometry, bounds,
    /// sampling); returns the iteration plan.
    fn begin_iteration(&mut self, t: u32) -> Result<IterationPlan>;

    /// Processes one task. Runs concurrently; may mutate only its own
    /// rows' sharded state.
    fn run_task(
        &self,
        phase: usize,
        rows: TaskRows<'_>,
        scratch: &mut Self::Scratch,
        stats: &mut TaskStats,
    ) -> Result<Self::Partial>;

    /// Folds one phase's partials, already ordered by task index.
    fn reduce(&mut self, phase: usize, t: u32, partials: Vec<Self::Partial>) -> Result<()>;

    /// Serial epilogue: objective value, drift, extra counters.
    fn end_iteration(&mut self, t: u32) -> Result<IterationOutcome>;

    /// Allocation-formula accounting of the algorithm's auxiliary state.
    fn aux_bytes(&self) -> u64;

    /// Bytes of one task partial, for the engine's accounting.
    fn partial_bytes(&self) -> u64 {
        0
    }

    fn observe(&mut self) -> Observation<'_> {
        Observation::default()
    }
}

/// Outcome of a full run.
#[derive(Debug, Clone, Default)]
pub struct LoopSummary {
    pub iterations: u32,
    pub converged: bool,
    /// Total synchronization barriers (one per parallel phase).
    pub barriers: u64,
    pub metrics: Vec<IterationMetrics>,
}

/// Drives `alg` until convergence or `cfg.max_iters`.
pub fn run_loop<A: MmAlgorithm>(
    alg: &mut A,
    cfg: &EngineConfig,
    mut observer: Option<Observer<'_>>,
) -> Result<LoopSummary> {
    cfg.validate()?;
    let pm = alg.source().partition_map().clone();
    if pm.len() != cfg.resolved_partitions() {
        return Err(Error::usage(format!(
            "data is split into {} partitions but the engine expects {}",
            pm.len(),
            cfg.resolved_partitions()
        )));
    }
    let pool = WorkerPool::new(cfg.threads)?;
    let n = alg.n();
    let mut summary = LoopSummary::default();

    for t in 1..=cfg.max_iters {
        let started = Instant::now();
        alg.source().begin_iteration(t);
        let plan = alg.begin_iteration(t)?;
        let mut agg = TaskStats::default();
        let mut max_tasks = 0usize;

        for phase in 0..plan.phases {
            let tasks = build_tasks(&pm, &plan.active, cfg.task_size);
            max_tasks = max_tasks.max(tasks.len());
            let queue = TaskQueue::new(
                tasks,
                pm.len(),
                cfg.threads,
                cfg.locality_groups,
                cfg.scheduler,
            );
            let alg_ref: &A = alg;
            let active = &plan.active;
            let partials = pool.run_phase(&queue, |_worker| {
                let mut scratch = A::Scratch::default();
                move |task: &Task| {
                    let mut stats = TaskStats::default();
                    let rows = TaskRows { task, active };
                    let p = alg_ref.run_task(phase, rows, &mut scratch, &mut stats);
                    (p, stats)
                }
            });
            summary.barriers += 1;
            let mut ordered = Vec::with_capacity(partials.len());
            for (p, stats) in partials {
                agg.merge(&stats);
                ordered.push(p?);
            }
            alg.reduce(phase, t, ordered)?;
        }

        alg.source().end_iteration();
        let outcome = alg.end_iteration(t)?;
        agg.merge(&outcome.extra);

        let mut m = IterationMetrics {
            iter: t,
            objective: outcome.objective,
            ..Default::default()
        };
        m.absorb_stats(&agg);
        m.aux_bytes = alg.aux_bytes()
            + max_tasks as u64 * (alg.partial_bytes() + std::mem::size_of::<Task>() as u64);
        m.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        if let Some(obs) = observer.as_mut() {
            obs(t, &alg.observe(), &m);
        }
        summary.metrics.push(m);
        summary.iterations = t;

        let converged = match cfg.convergence {
            ConvergenceMode::Fraction => agg.reassigned as f64 / n as f64 <= cfg.tol,
            ConvergenceMode::Drift => outcome.max_drift <= cfg.tol,
            ConvergenceMode::Iterations => false,
        };
        if converged {
            summary.converged = true;
            break;
        }
    }
    Ok(summary)
}
