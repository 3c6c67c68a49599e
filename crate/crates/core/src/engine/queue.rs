//! Partitioned priority task queue with two-level work stealing.
//!
//! Tasks are contiguous blocks of active rows within a single locality
//! partition. Every partition has its own guarded FIFO; a worker drains its
//! home partition first, then scans partitions in its locality group, then
//! all partitions, and reports exhaustion only when every queue is empty.

use std::collections::VecDeque;
use std::sync::Mutex;

use crate::matrix::PartitionMap;

/// Scheduling policy for the parallel phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerMode {
    /// Home partition first, then same locality group, then any (default).
    PartitionedStealing,
    /// Each worker processes only the partitions it owns; no stealing.
    Static,
    /// Home partition first, then any partition in index order.
    Fifo,
}

/// The rows an iteration touches: either every row or a sorted id list.
#[derive(Debug, Clone)]
pub enum ActiveSet {
    All { n: usize },
    Ids(Vec<u32>),
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        match self {
            ActiveSet::All { n } => *n,
            ActiveSet::Ids(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row id at position `pos` of the set's ascending enumeration.
    #[inline]
    pub fn row_at(&self, pos: usize) -> usize {
        match self {
            ActiveSet::All { .. } => pos,
            ActiveSet::Ids(v) => v[pos] as usize,
        }
    }

    /// Positions of this set's rows that fall in `[row_start, row_end)`.
    fn position_bounds(&self, row_start: usize, row_end: usize) -> (usize, usize) {
        match self {
            ActiveSet::All { n } => (row_start.min(*n), row_end.min(*n)),
            ActiveSet::Ids(v) => (
                v.partition_point(|&id| (id as usize) < row_start),
                v.partition_point(|&id| (id as usize) < row_end),
            ),
        }
    }
}

/// A block of at most `task_size` active rows inside one partition,
/// executed by exactly one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    /// Global index in ascending row order; fixes the reduction order.
    pub index: usize,
    /// First active row of the block.
    pub start_row: usize,
    /// Number of active rows in the block.
    pub row_count: usize,
    /// Partition the rows live in.
    pub home_partition: usize,
    /// Position of the first row within the iteration's [`ActiveSet`].
    pub ids_start: usize,
}

/// Borrowed view resolving a task's row ids.
#[derive(Clone, Copy)]
pub struct TaskRows<'a> {
    pub task: &'a Task,
    pub active: &'a ActiveSet,
}

impl<'a> TaskRows<'a> {
    pub fn iter(&self) -> impl Iterator<Item = usize> + 'a {
        let active = self.active;
        let start = self.task.ids_start;
        (start..start + self.task.row_count).map(move |pos| active.row_at(pos))
    }

    pub fn len(&self) -> usize {
        self.task.row_count
    }

    pub fn is_empty(&self) -> bool {
        self.task.row_count == 0
    }
}

/// Splits the active rows of every partition into tasks of at most
/// `task_size` rows, indexed in ascending row order.
pub fn build_tasks(pm: &PartitionMap, active: &ActiveSet, task_size: usize) -> Vec<Task> {
    let task_size = task_size.max(1);
    let mut tasks = Vec::new();
    for range in pm.ranges() {
        let (lo, hi) = active.position_bounds(range.start, range.start + range.len);
        let m = hi - lo;
        if m == 0 {
            continue;
        }
        let chunks = m.div_ceil(task_size);
        let base = m / chunks;
        let extra = m % chunks;
        let mut pos = lo;
        for c in 0..chunks {
            let len = base + usize::from(c < extra);
            tasks.push(Task {
                index: tasks.len(),
                start_row: active.row_at(pos),
                row_count: len,
                home_partition: range.partition,
                ids_start: pos,
            });
            pos += len;
        }
        debug_assert_eq!(pos, hi);
    }
    tasks
}

/// Per-partition FIFO queues consumed by `threads` workers under `mode`.
pub struct TaskQueue {
    queues: Vec<Mutex<VecDeque<Task>>>,
    group_of: Vec<usize>,
    mode: SchedulerMode,
    threads: usize,
    num_tasks: usize,
}

impl TaskQueue {
    pub fn new(
        tasks: Vec<Task>,
        partitions: usize,
        threads: usize,
        locality_groups: usize,
        mode: SchedulerMode,
    ) -> Self {
        let num_tasks = tasks.len();
        let mut queues: Vec<VecDeque<Task>> = (0..partitions).map(|_| VecDeque::new()).collect();
        for t in tasks {
            queues[t.home_partition].push_back(t);
        }
        let groups = locality_groups.clamp(1, partitions.max(1));
        let group_of = (0..partitions).map(|p| p * groups / partitions).collect();
        TaskQueue {
            queues: queues.into_iter().map(Mutex::new).collect(),
            group_of,
            mode,
            threads: threads.max(1),
            num_tasks,
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    fn partitions(&self) -> usize {
        self.queues.len()
    }

    /// Home partition of a worker.
    pub fn home_of(&self, worker: usize) -> usize {
        worker % self.partitions()
    }

    fn pop(&self, p: usize) -> Option<Task> {
        self.queues[p].lock().unwrap().pop_front()
    }

    /// Hands `worker` its next task, or `None` once every queue it may
    /// draw from is empty.
    pub fn next_task(&self, worker: usize) -> Option<Task> {
        let parts = self.partitions();
        match self.mode {
            SchedulerMode::Static => {
                // Owner of partition p is worker p % threads.
                let mut p = worker;
                while p < parts {
                    if let Some(t) = self.pop(p) {
                        return Some(t);
                    }
                    p += self.threads;
                }
                None
            }
            SchedulerMode::Fifo => {
                let home = self.home_of(worker);
                if let Some(t) = self.pop(home) {
                    return Some(t);
                }
                (0..parts).filter(|&p| p != home).find_map(|p| self.pop(p))
            }
            SchedulerMode::PartitionedStealing => {
                let home = self.home_of(worker);
                if let Some(t) = self.pop(home) {
                    return Some(t);
                }
                // One scan for high-priority (same locality group) tasks
                // before settling for any remote partition.
                let group = self.group_of[home];
                if let Some(t) = (0..parts)
                    .filter(|&p| p != home && self.group_of[p] == group)
                    .find_map(|p| self.pop(p))
                {
                    return Some(t);
                }
                (0..parts)
                    .filter(|&p| p != home && self.group_of[p] != group)
                    .find_map(|p| self.pop(p))
            }
        }
    }
}
