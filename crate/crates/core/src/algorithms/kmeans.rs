//! Parallel Lloyd's k-means with merged MM steps and optional pruning.
//!
//! Membership sums are maintained incrementally: when a point changes
//! cluster, its vector is subtracted from the old cluster's running sum
//! and added to the new one. Points kept by clause 1 therefore touch no
//! data at all, which is what makes pruning shed I/O in SEM mode. Because
//! the deltas depend only on assignment changes (identical whichever
//! pruning mode is active) and are folded in fixed task order, all prune
//! modes produce bit-identical centroids.

use crate::dist::{norm, squared_euclidean, squared_norm};
use crate::engine::{
    ActiveSet, FetchBuf, IterationOutcome, IterationPlan, MmAlgorithm, Observation, RowShards,
    Source, TaskRows,
};
use crate::error::{Error, Result};
use crate::matrix::{CentroidSet, UNASSIGNED};
use crate::metrics::TaskStats;
use crate::pruning::{clause1_keeps, scan_full, scan_mti, scan_ti, BoundState, PruneMode};

/// Kahan-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub struct Kmeans {
    source: Source,
    k: usize,
    d: usize,
    n: usize,
    prune: PruneMode,
    /// Renormalize centroids to the unit sphere after each update
    /// (spherical k-means on pre-normalized rows).
    spherical: bool,
    threads: usize,
    task_size: usize,
    cents: CentroidSet,
    /// Running per-cluster membership sums (k x d) and squared-norm sums.
    sums: Vec<f64>,
    sumsq: Vec<f64>,
    assign: RowShards<u32>,
    bounds: BoundState,
    iter: u32,
    /// Smallest best-vs-second-best margin seen (tracked when scanning
    /// exhaustively, i.e. in prune mode `none`).
    min_margin: f64,
    serial_stats: TaskStats,
    maintenance_dists: u64,
}

pub struct KmeansPartial {
    delta_sums: Vec<f64>,
    delta_counts: Vec<i64>,
    delta_sumsq: Vec<f64>,
    min_margin: f64,
}

#[derive(Default)]
pub struct KmeansScratch {
    fetch: FetchBuf,
}

impl Kmeans {
    pub fn new(
        source: Source,
        init: CentroidSet,
        prune: PruneMode,
        spherical: bool,
        threads: usize,
        task_size: usize,
    ) -> Result<Self> {
        let (n, d) = (source.n(), source.d());
        let k = init.k();
        if k == 0 || k > n {
            return Err(Error::usage(format!("k must be in [1, n]; got k={k}, n={n}")));
        }
        if init.d() != d {
            return Err(Error::usage("centroid dimensionality differs from data"));
        }
        Ok(Kmeans {
            source,
            k,
            d,
            n,
            prune,
            spherical,
            threads,
            task_size,
            cents: init,
            sums: vec![0.0; k * d],
            sumsq: vec![0.0; k],
            assign: RowShards::new(vec![UNASSIGNED; n]),
            bounds: BoundState::new(prune, n, k),
            iter: 0,
            min_margin: f64::INFINITY,
            serial_stats: TaskStats::default(),
            maintenance_dists: 0,
        })
    }

    pub fn centroids(&self) -> &CentroidSet {
        &self.cents
    }

    pub fn min_margin(&self) -> f64 {
        self.min_margin
    }

    pub fn into_result(self) -> (CentroidSet, Vec<u32>) {
        (self.cents, self.assign.into_inner())
    }

    pub fn maintenance_dists(&self) -> u64 {
        self.maintenance_dists
    }

    /// Current objective value: the exact SSE for resident data, the
    /// cluster-moment identity (no I/O) in SEM mode.
    pub fn current_objective(&mut self) -> f64 {
        match self.source.matrix() {
            Some(m) => {
                let assign = self.assign.as_slice();
                let mut acc = Kahan::default();
                for i in 0..m.n() {
                    let a = assign[i];
                    if a == UNASSIGNED {
                        continue;
                    }
                    acc.add(squared_euclidean(m.row(i), self.cents.centroid(a as usize)));
                }
                acc.value()
            }
            None => {
                // sum over clusters of sumsq - 2 <sum, c> + count |c|^2.
                let mut acc = Kahan::default();
                for c in 0..self.k {
                    let count = self.cents.counts()[c];
                    if count == 0 {
                        continue;
                    }
                    let cent = self.cents.centroid(c);
                    let mut dot = 0.0;
                    let mut cn = 0.0;
                    for j in 0..self.d {
                        dot += self.sums[c * self.d + j] * cent[j];
                        cn += cent[j] * cent[j];
                    }
                    acc.add(self.sumsq[c] - 2.0 * dot + count as f64 * cn);
                }
                acc.value()
            }
        }
    }

    fn apply_move(&mut self, row: usize, v: &[f64], from: u32, to: u32) {
        let d = self.d;
        let sq = squared_norm(v);
        if from != UNASSIGNED {
            let f = from as usize;
            for j in 0..d {
                self.sums[f * d + j] -= v[j];
            }
            self.sumsq[f] -= sq;
            self.cents.counts_mut()[f] -= 1;
        }
        let t = to as usize;
        for j in 0..d {
            self.sums[t * d + j] += v[j];
        }
        self.sumsq[t] += sq;
        self.cents.counts_mut()[t] += 1;
        self.assign.as_mut_slice()[row] = to;
    }

    /// Deterministic empty-cluster repair: re-seed to the point farthest
    /// from its assigned centroid (lowest row on ties), drawn only from
    /// clusters that can spare a member.
    fn repair_empty_clusters(&mut self) -> Result<()> {
        loop {
            let empty = match self.cents.counts().iter().position(|&c| c == 0) {
                Some(c) => c,
                None => return Ok(()),
            };
            let assign_snapshot = self.assign.to_vec();
            let mut stats = TaskStats::default();
            let mut far_row = usize::MAX;
            let mut far_dist = -1.0f64;
            let counts = self.cents.counts().to_vec();
            {
                let cents = &self.cents;
                self.source.scan_all(&mut stats, |i, row| {
                    let a = assign_snapshot[i] as usize;
                    if counts[a] < 2 {
                        return;
                    }
                    let dist = squared_euclidean(row, cents.centroid(a));
                    if dist > far_dist {
                        far_dist = dist;
                        far_row = i;
                    }
                })?;
            }
            self.maintenance_dists += self.n as u64;
            self.serial_stats.merge(&stats);
            if far_row == usize::MAX {
                return Err(Error::usage(
                    "cannot repair empty cluster: fewer distinct points than k",
                ));
            }
            let v = self.source.materialize_row(far_row, &mut self.serial_stats)?;
            let from = assign_snapshot[far_row];
            self.apply_move(far_row, &v, from, empty as u32);
            self.serial_stats.reassigned += 1;
            // The re-seeded centroid is the point itself; the donor is
            // recomputed from its shrunk membership.
            self.cents.centroid_mut(empty).copy_from_slice(&v);
            self.refresh_centroid(from as usize);
            // Invalidate the moved point's bounds.
            match self.prune {
                PruneMode::None => {}
                PruneMode::Mti => {
                    self.bounds.u.as_mut_slice()[far_row] = f64::INFINITY;
                }
                PruneMode::Ti => {
                    self.bounds.u.as_mut_slice()[far_row] = f64::INFINITY;
                    let k = self.k;
                    self.bounds.lower.as_mut_slice()[far_row * k..(far_row + 1) * k].fill(0.0);
                }
            }
        }
    }

    fn refresh_centroid(&mut self, c: usize) {
        let count = self.cents.counts()[c];
        if count == 0 {
            return;
        }
        let d = self.d;
        let mut cent = vec![0.0; d];
        for j in 0..d {
            cent[j] = self.sums[c * d + j] / count as f64;
        }
        if self.spherical {
            let len = norm(&cent);
            if len > 0.0 {
                for x in cent.iter_mut() {
                    *x /= len;
                }
            } else {
                cent.copy_from_slice(self.cents.previous(c));
            }
        }
        self.cents.centroid_mut(c).copy_from_slice(&cent);
    }
}

impl MmAlgorithm for Kmeans {
    type Partial = KmeansPartial;
    type Scratch = KmeansScratch;

    fn n(&self) -> usize {
        self.n
    }

    fn source(&self) -> &Source {
        &self.source
    }

    fn begin_iteration(&mut self, t: u32) -> Result<IterationPlan> {
        self.iter = t;
        if t > 1 && self.prune != PruneMode::None {
            self.maintenance_dists += self.bounds.geo.update(&self.cents);
        }
        Ok(IterationPlan {
            phases: 1,
            active: ActiveSet::All { n: self.n },
        })
    }

    fn run_task(
        &self,
        _phase: usize,
        rows: TaskRows<'_>,
        scratch: &mut KmeansScratch,
        stats: &mut TaskStats,
    ) -> Result<KmeansPartial> {
        let (k, d) = (self.k, self.d);
        let cold = self.iter == 1;
        let drift = self.cents.drift();
        let geo = &self.bounds.geo;

        // Pass 1: bound maintenance and clause-1 screening decide which
        // rows actually need their data.
        scratch.fetch.ids.clear();
        for i in rows.iter() {
            if cold || self.prune == PruneMode::None {
                scratch.fetch.ids.push(i as u32);
                continue;
            }
            // Safety: row i belongs to this task exclusively.
            let (a, u) = unsafe {
                let a = *self.assign.row_ref(i);
                let u = self.bounds.u.row_mut(i);
                *u += drift[a as usize];
                if self.prune == PruneMode::Ti {
                    let row = self.bounds.lower.range_mut(i * k, k);
                    for (c, l) in row.iter_mut().enumerate() {
                        *l = (*l - drift[c]).max(0.0);
                    }
                }
                (a, *u)
            };
            if clause1_keeps(u, geo.s[a as usize]) {
                stats.prune_c1 += 1;
            } else {
                scratch.fetch.ids.push(i as u32);
            }
        }

        // Pass 2: fetch the needed rows and run the assignment kernels.
        let mut partial = KmeansPartial {
            delta_sums: vec![0.0; k * d],
            delta_counts: vec![0; k],
            delta_sumsq: vec![0.0; k],
            min_margin: f64::INFINITY,
        };
        let block = self.source.fetch(&mut scratch.fetch, stats)?;
        for &iu in block.ids() {
            let i = iu as usize;
            let v = block.row(i);
            // Safety: single-writer per row within this task.
            let old = unsafe { *self.assign.row_ref(i) };
            let new = if cold {
                let lower_row = (self.prune == PruneMode::Ti)
                    .then(|| unsafe { self.bounds.lower.range_mut(i * k, k) });
                let scan = scan_full(v, &self.cents, lower_row, stats);
                if self.prune != PruneMode::None {
                    unsafe { *self.bounds.u.row_mut(i) = scan.best_d };
                } else {
                    partial.min_margin = partial.min_margin.min(scan.second_d - scan.best_d);
                }
                scan.best
            } else {
                match self.prune {
                    PruneMode::None => {
                        let scan = scan_full(v, &self.cents, None, stats);
                        partial.min_margin = partial.min_margin.min(scan.second_d - scan.best_d);
                        scan.best
                    }
                    PruneMode::Mti => unsafe {
                        let u = self.bounds.u.row_mut(i);
                        scan_mti(v, old, u, geo, &self.cents, stats)
                    },
                    PruneMode::Ti => unsafe {
                        let u = self.bounds.u.row_mut(i);
                        let lower = self.bounds.lower.range_mut(i * k, k);
                        scan_ti(v, old, u, lower, geo, &self.cents, stats)
                    },
                }
            };
            if new != old {
                stats.reassigned += 1;
                let sq = squared_norm(v);
                if old != UNASSIGNED {
                    let o = old as usize;
                    for j in 0..d {
                        partial.delta_sums[o * d + j] -= v[j];
                    }
                    partial.delta_counts[o] -= 1;
                    partial.delta_sumsq[o] -= sq;
                }
                let c = new as usize;
                for j in 0..d {
                    partial.delta_sums[c * d + j] += v[j];
                }
                partial.delta_counts[c] += 1;
                partial.delta_sumsq[c] += sq;
                unsafe { *self.assign.row_mut(i) = new };
            }
        }

        // Debug soundness audit: sampled clause-1 rows really are within
        // their bound (resident data only; SEM stays I/O-free).
        #[cfg(debug_assertions)]
        if !cold && self.prune != PruneMode::None {
            if let Some(m) = self.source.matrix() {
                for i in rows.iter().take(2) {
                    let (a, u) = unsafe { (*self.assign.row_ref(i), *self.bounds.u.row_ref(i)) };
                    if a != UNASSIGNED {
                        let true_d = crate::dist::euclidean(m.row(i), self.cents.centroid(a as usize));
                        debug_assert!(u >= true_d - 1e-9, "unsound bound at row {i}");
                    }
                }
            }
        }

        Ok(partial)
    }

    fn reduce(&mut self, _phase: usize, _t: u32, partials: Vec<KmeansPartial>) -> Result<()> {
        let (k, d) = (self.k, self.d);
        for p in &partials {
            for c in 0..k {
                for j in 0..d {
                    self.sums[c * d + j] += p.delta_sums[c * d + j];
                }
                self.sumsq[c] += p.delta_sumsq[c];
                let counts = self.cents.counts_mut();
                counts[c] = (counts[c] as i64 + p.delta_counts[c]) as u64;
            }
            self.min_margin = self.min_margin.min(p.min_margin);
        }
        self.cents.snapshot_previous();
        for c in 0..k {
            self.refresh_centroid(c);
        }
        self.repair_empty_clusters()?;
        self.cents.refresh_drift();
        Ok(())
    }

    fn end_iteration(&mut self, _t: u32) -> Result<IterationOutcome> {
        let objective = self.current_objective();
        Ok(IterationOutcome {
            objective,
            max_drift: self.cents.max_drift(),
            extra: std::mem::take(&mut self.serial_stats),
        })
    }

    fn aux_bytes(&self) -> u64 {
        let fetch_scratch = (self.threads * self.task_size) as u64
            * (4 + if self.source.matrix().is_none() {
                8 * self.d as u64
            } else {
                0
            });
        self.bounds.aux_bytes(self.threads)
            + self.cents.aux_bytes()
            + (self.sums.len() * 8 + self.sumsq.len() * 8) as u64
            + fetch_scratch
    }

    fn partial_bytes(&self) -> u64 {
        ((self.k * self.d + 2 * self.k) * 8 + 8) as u64
    }

    fn observe(&mut self) -> Observation<'_> {
        Observation {
            centroids: Some(&self.cents),
            assignments: Some(self.assign.as_slice()),
        }
    }
}
