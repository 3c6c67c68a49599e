//! Per-iteration instrumentation records.

/// Counters accumulated while executing one task; merged in fixed task
/// order at the iteration barrier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TaskStats {
    /// Point-centroid distance evaluations (maintenance work such as
    /// centroid geometry is tallied separately).
    pub dist_comps: u64,
    pub prune_c1: u64,
    pub prune_c2: u64,
    pub prune_c3: u64,
    pub reassigned: u64,
    pub rows_req: u64,
    pub bytes_req: u64,
    pub bytes_read: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

impl TaskStats {
    pub fn merge(&mut self, o: &TaskStats) {
        self.dist_comps += o.dist_comps;
        self.prune_c1 += o.prune_c1;
        self.prune_c2 += o.prune_c2;
        self.prune_c3 += o.prune_c3;
        self.reassigned += o.reassigned;
        self.rows_req += o.rows_req;
        self.bytes_req += o.bytes_req;
        self.bytes_read += o.bytes_read;
        self.cache_hits += o.cache_hits;
        self.cache_misses += o.cache_misses;
    }
}

/// One row of the metrics CSV; every field is a column.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationMetrics {
    pub iter: u32,
    pub wall_ms: f64,
    /// SSE for k-means variants, J for fuzzy c-means, total dissimilarity
    /// for k-medoids.
    pub objective: f64,
    pub dist_comps: u64,
    pub prune_c1: u64,
    pub prune_c2: u64,
    pub prune_c3: u64,
    pub reassigned: u64,
    pub rows_req: u64,
    pub bytes_req: u64,
    pub bytes_read: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub aux_bytes: u64,
}

/// Stable CSV header; kept in sync with [`IterationMetrics::csv_row`].
pub const CSV_HEADER: &str = "iter,wall_ms,objective,dist_comps,prune_c1,prune_c2,prune_c3,\
reassigned,rows_req,bytes_req,bytes_read,cache_hits,cache_misses,aux_bytes";

impl IterationMetrics {
    pub fn absorb_stats(&mut self, s: &TaskStats) {
        self.dist_comps += s.dist_comps;
        self.prune_c1 += s.prune_c1;
        self.prune_c2 += s.prune_c2;
        self.prune_c3 += s.prune_c3;
        self.reassigned += s.reassigned;
        self.rows_req += s.rows_req;
        self.bytes_req += s.bytes_req;
        self.bytes_read += s.bytes_read;
        self.cache_hits += s.cache_hits;
        self.cache_misses += s.cache_misses;
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.wall_ms,
            self.objective,
            self.dist_comps,
            self.prune_c1,
            self.prune_c2,
            self.prune_c3,
            self.reassigned,
            self.rows_req,
            self.bytes_req,
            self.bytes_read,
            self.cache_hits,
            self.cache_misses,
            self.aux_bytes
        )
    }
}
