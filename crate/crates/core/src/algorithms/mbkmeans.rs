//! Mini-batch k-means: each iteration samples a batch, assigns it against
//! the iteration-start centroids in parallel, then applies the per-point
//! gradient updates serially in row order with a per-centroid learning
//! rate equal to the reciprocal of its cumulative assignment count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{derive_seed, init_centroids, FlatResult, InitSpec};
use crate::dist::squared_euclidean;
use crate::engine::{
    run_loop, ActiveSet, EngineConfig, FetchBuf, IterationOutcome, IterationPlan, MmAlgorithm,
    Observation, RowShards, Source, TaskRows,
};
use crate::error::{Error, Result};
use crate::matrix::{CentroidSet, UNASSIGNED};
use crate::metrics::TaskStats;
use crate::pruning::scan_full;

/// Batch fraction per iteration, in (0, 1].
#[derive(Debug, Clone, Copy)]
pub struct BatchSpec {
    pub fraction: f64,
}

impl BatchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::usage(format!(
                "batch fraction must be in (0, 1]; got {}",
                self.fraction
            )));
        }
        Ok(())
    }

    pub fn batch_size(&self, n: usize) -> usize {
        ((self.fraction * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// One gradient step `c <- (1 - eta) c + eta v`.
#[inline]
pub fn gradient_step(c: &mut [f64], v: &[f64], eta: f64) {
    for (cj, &vj) in c.iter_mut().zip(v) {
        *cj = (1.0 - eta) * *cj + eta * vj;
    }
}

struct MiniBatch {
    source: Source,
    k: usize,
    d: usize,
    n: usize,
    batch: BatchSpec,
    seed: u64,
    cents: CentroidSet,
    /// Cumulative per-centroid assignment counts defining eta.
    cum_counts: Vec<u64>,
    assign: RowShards<u32>,
    batch_sse: f64,
}

struct BatchPartial {
    /// `(row, chosen centroid, row values)` in ascending row order.
    picks: Vec<(u32, u32)>,
    values: Vec<f64>,
    sse: f64,
}

impl MmAlgorithm for MiniBatch {
    type Partial = BatchPartial;
    type Scratch = FetchBuf;

    fn n(&self) -> usize {
        self.n
    }

    fn source(&self) -> &Source {
        &self.source
    }

    fn begin_iteration(&mut self, t: u32) -> Result<IterationPlan> {
        let b = self.batch.batch_size(self.n);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, t as u64));
        let mut sample = rand::seq::index::sample(&mut rng, self.n, b).into_vec();
        sample.sort_unstable();
        let ids: Vec<u32> = sample.into_iter().map(|i| i as u32).collect();
        self.cents.snapshot_previous();
        Ok(IterationPlan {
            phases: 1,
            active: ActiveSet::Ids(ids),
        })
    }

    fn run_task(
        &self,
        _phase: usize,
        rows: TaskRows<'_>,
        scratch: &mut FetchBuf,
        stats: &mut TaskStats,
    ) -> Result<BatchPartial> {
        scratch.ids.clear();
        scratch.ids.extend(rows.iter().map(|i| i as u32));
        let block = self.source.fetch(scratch, stats)?;
        let d = self.d;
        let mut partial = BatchPartial {
            picks: Vec::with_capacity(block.ids().len()),
            values: Vec::with_capacity(block.ids().len() * d),
            sse: 0.0,
        };
        for &iu in block.ids() {
            let v = block.row(iu as usize);
            let scan = scan_full(v, &self.cents, None, stats);
            let old = unsafe { *self.assign.row_ref(iu as usize) };
            if old != scan.best {
                stats.reassigned += 1;
                unsafe { *self.assign.row_mut(iu as usize) = scan.best };
            }
            partial.picks.push((iu, scan.best));
            partial.values.extend_from_slice(v);
            partial.sse += scan.best_d * scan.best_d;
        }
        Ok(partial)
    }

    fn reduce(&mut self, _phase: usize, _t: u32, partials: Vec<BatchPartial>) -> Result<()> {
        // The gradient step is algorithmically serial: apply updates in
        // ascending row order against the evolving centroids.
        let d = self.d;
        self.batch_sse = 0.0;
        for p in &partials {
            for (idx, &(_, c)) in p.picks.iter().enumerate() {
                let c = c as usize;
                self.cum_counts[c] += 1;
                let eta = 1.0 / self.cum_counts[c] as f64;
                let v = &p.values[idx * d..(idx + 1) * d];
                gradient_step(self.cents.centroid_mut(c), v, eta);
            }
            self.batch_sse += p.sse;
        }
        self.cents.refresh_drift();
        Ok(())
    }

    fn end_iteration(&mut self, _t: u32) -> Result<IterationOutcome> {
        Ok(IterationOutcome {
            // SSE of the sampled batch against the iteration-start
            // centroids (the full objective is computed once at the end).
            objective: self.batch_sse,
            max_drift: self.cents.max_drift(),
            extra: TaskStats::default(),
        })
    }

    fn aux_bytes(&self) -> u64 {
        self.cents.aux_bytes() + (self.cum_counts.len() * 8) as u64 + (self.n * 4) as u64
    }

    fn partial_bytes(&self) -> u64 {
        // Batch rows travel in the partials (Sculley's cached batch).
        let per_task = self.batch.batch_size(self.n).div_ceil(1.max(self.n / 8192));
        (per_task * (8 + self.d * 8) + 8) as u64
    }

    fn observe(&mut self) -> Observation<'_> {
        Observation {
            centroids: Some(&self.cents),
            assignments: Some(self.assign.as_slice()),
        }
    }
}

/// Mini-batch k-means. After the final iteration every point is assigned
/// to its nearest centroid and the exact full-data SSE is reported as
/// `final_objective`.
pub fn mbkmeans(
    source: &Source,
    k: usize,
    batch: BatchSpec,
    init: &InitSpec,
    cfg: &EngineConfig,
) -> Result<FlatResult> {
    cfg.validate()?;
    batch.validate()?;
    let mut init_stats = TaskStats::default();
    let cents = init_centroids(source, k, init, &mut init_stats)?;
    let n = source.n();
    let mut alg = MiniBatch {
        source: source.clone(),
        k,
        d: source.d(),
        n,
        batch,
        seed: init.seed,
        cents,
        cum_counts: vec![0; k],
        assign: RowShards::new(vec![UNASSIGNED; n]),
        batch_sse: 0.0,
    };
    let summary = run_loop(&mut alg, cfg, None)?;

    // Final full assignment pass against the final centroids.
    let mut final_stats = TaskStats::default();
    let mut assignments = vec![0u32; n];
    let mut counts = vec![0u64; alg.k];
    let mut sse = super::kmeans::Kahan::default();
    {
        let cents = &alg.cents;
        source.scan_all(&mut final_stats, |i, row| {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for c in 0..alg.k {
                let dist = squared_euclidean(row, cents.centroid(c));
                if dist < best_d {
                    best_d = dist;
                    best = c as u32;
                }
            }
            assignments[i] = best;
            counts[best as usize] += 1;
            sse.add(best_d);
        })?;
    }
    init_stats.merge(&final_stats);
    alg.cents.counts_mut().copy_from_slice(&counts);
    Ok(FlatResult {
        centroids: alg.cents,
        assignments,
        summary,
        final_objective: sse.value(),
        init_stats,
        min_margin: f64::INFINITY,
    })
}
