//! CLARA k-medoids: each iteration runs the PAM swap step on a seeded
//! sample that always contains the current medoids, then assigns the full
//! dataset to the nearest medoid in parallel. The best medoid set by
//! full-data cost is tracked across iterations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algorithms::derive_seed;
use crate::dist::euclidean;
use crate::engine::{
    run_loop, ActiveSet, EngineConfig, FetchBuf, IterationOutcome, IterationPlan, LoopSummary,
    MmAlgorithm, Observation, RowShards, Source, TaskRows,
};
use crate::error::{Error, Result};
use crate::matrix::{CentroidSet, UNASSIGNED};
use crate::metrics::TaskStats;

#[derive(Debug, Clone, Copy)]
pub struct ClaraParams {
    /// Sample percentage in (0, 100].
    pub sample_pct: f64,
    pub seed: u64,
}

struct Clara {
    source: Source,
    k: usize,
    d: usize,
    n: usize,
    params: ClaraParams,
    medoids: Vec<u32>,
    cents: CentroidSet,
    assign: RowShards<u32>,
    full_cost: f64,
    best_cost: f64,
    best_medoids: Vec<u32>,
    serial_stats: TaskStats,
}

impl Clara {
    fn sample_size(&self) -> usize {
        ((self.params.sample_pct * self.n as f64 / 100.0).ceil() as usize).clamp(self.k, self.n)
    }

    /// Draws the iteration's sample: current medoids plus seeded distinct
    /// rows, sorted ascending.
    fn draw_sample(&self, t: u32) -> Vec<u32> {
        let m = self.sample_size();
        let mut sample: Vec<u32> = self.medoids.clone();
        sample.sort_unstable();
        if sample.len() < m {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.params.seed, t as u64));
            let picks = rand::seq::index::sample(&mut rng, self.n, m.min(self.n)).into_vec();
            for p in picks {
                if sample.len() >= m {
                    break;
                }
                let p = p as u32;
                if !self.medoids.contains(&p) {
                    sample.push(p);
                }
            }
            sample.sort_unstable();
        }
        sample
    }

    /// PAM-style swap: for each medoid in turn, trial-swap against every
    /// sample member and keep the best improvement.
    fn swap_step(&mut self, sample: &[u32]) -> Result<()> {
        let m = sample.len();
        let d = self.d;
        let mut rows = vec![0.0f64; m * d];
        {
            let mut fetch = FetchBuf::default();
            fetch.ids.extend_from_slice(sample);
            let block = self.source.fetch(&mut fetch, &mut self.serial_stats)?;
            for (pos, &id) in sample.iter().enumerate() {
                rows[pos * d..(pos + 1) * d].copy_from_slice(block.row(id as usize));
            }
        }
        let row = |pos: usize| &rows[pos * d..(pos + 1) * d];
        let medoid_pos: Vec<usize> = self
            .medoids
            .iter()
            .map(|id| sample.binary_search(id).expect("medoid in sample"))
            .collect();
        let mut medoid_pos = medoid_pos;

        // Nearest and second-nearest medoid per sample point.
        let mut near = vec![(0usize, f64::INFINITY); m]; // (medoid index, dist)
        let mut second = vec![f64::INFINITY; m];
        let recompute = |near: &mut Vec<(usize, f64)>,
                             second: &mut Vec<f64>,
                             medoid_pos: &[usize],
                             stats: &mut TaskStats| {
            for j in 0..m {
                let mut n0 = (0usize, f64::INFINITY);
                let mut d1 = f64::INFINITY;
                for (mi, &mp) in medoid_pos.iter().enumerate() {
                    let dist = euclidean(row(j), row(mp));
                    stats.dist_comps += 1;
                    if dist < n0.1 {
                        d1 = n0.1;
                        n0 = (mi, dist);
                    } else if dist < d1 {
                        d1 = dist;
                    }
                }
                near[j] = n0;
                second[j] = d1;
            }
        };
        recompute(&mut near, &mut second, &medoid_pos, &mut self.serial_stats);

        for mi in 0..self.k {
            let current_cost: f64 = near.iter().map(|&(_, dist)| dist).sum();
            let mut best: Option<(f64, usize)> = None; // (cost, candidate pos)
            for cand in 0..m {
                if medoid_pos.contains(&cand) {
                    continue;
                }
                // Cost if medoid mi were replaced by the candidate.
                let mut cost = 0.0;
                for j in 0..m {
                    let dc = euclidean(row(j), row(cand));
                    self.serial_stats.dist_comps += 1;
                    let contrib = if near[j].0 == mi {
                        dc.min(second[j])
                    } else {
                        dc.min(near[j].1)
                    };
                    cost += contrib;
                }
                if best.is_none_or(|(bc, _)| cost < bc) {
                    best = Some((cost, cand));
                }
            }
            if let Some((cost, cand)) = best {
                if cost < current_cost {
                    medoid_pos[mi] = cand;
                    recompute(&mut near, &mut second, &medoid_pos, &mut self.serial_stats);
                }
            }
        }
        self.medoids = medoid_pos.iter().map(|&p| sample[p]).collect();
        self.cents.snapshot_previous();
        for (mi, &mp) in medoid_pos.iter().enumerate() {
            self.cents.centroid_mut(mi).copy_from_slice(row(mp));
        }
        self.cents.refresh_drift();
        Ok(())
    }
}

struct ClaraPartial {
    cost: f64,
    counts: Vec<u64>,
}

impl MmAlgorithm for Clara {
    type Partial = ClaraPartial;
    type Scratch = FetchBuf;

    fn n(&self) -> usize {
        self.n
    }

    fn source(&self) -> &Source {
        &self.source
    }

    fn begin_iteration(&mut self, t: u32) -> Result<IterationPlan> {
        let sample = self.draw_sample(t);
        self.swap_step(&sample)?;
        Ok(IterationPlan {
            phases: 1,
            active: ActiveSet::All { n: self.n },
        })
    }

    fn run_task(
        &self,
        _phase: usize,
        rows: TaskRows<'_>,
        scratch: &mut FetchBuf,
        stats: &mut TaskStats,
    ) -> Result<ClaraPartial> {
        scratch.ids.clear();
        scratch.ids.extend(rows.iter().map(|i| i as u32));
        let block = self.source.fetch(scratch, stats)?;
        let mut partial = ClaraPartial {
            cost: 0.0,
            counts: vec![0; self.k],
        };
        for &iu in block.ids() {
            let i = iu as usize;
            let v = block.row(i);
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for c in 0..self.k {
                let dist = euclidean(v, self.cents.centroid(c));
                stats.dist_comps += 1;
                if dist < best_d {
                    best_d = dist;
                    best = c as u32;
                }
            }
            partial.cost += best_d;
            partial.counts[best as usize] += 1;
            unsafe {
                let a = self.assign.row_mut(i);
                if *a != best {
                    stats.reassigned += 1;
                    *a = best;
                }
            }
        }
        Ok(partial)
    }

    fn reduce(&mut self, _phase: usize, _t: u32, partials: Vec<ClaraPartial>) -> Result<()> {
        self.full_cost = 0.0;
        let counts = self.cents.counts_mut();
        counts.fill(0);
        for p in &partials {
            self.full_cost += p.cost;
            for c in 0..p.counts.len() {
                counts[c] += p.counts[c];
            }
        }
        if self.full_cost < self.best_cost {
            self.best_cost = self.full_cost;
            self.best_medoids = self.medoids.clone();
        }
        Ok(())
    }

    fn end_iteration(&mut self, _t: u32) -> Result<IterationOutcome> {
        Ok(IterationOutcome {
            objective: self.full_cost,
            max_drift: self.cents.max_drift(),
            extra: std::mem::take(&mut self.serial_stats),
        })
    }

    fn aux_bytes(&self) -> u64 {
        let m = self.sample_size();
        (self.n * 4 + m * self.d * 8 + self.k * 4) as u64 + self.cents.aux_bytes()
    }

    fn partial_bytes(&self) -> u64 {
        (8 + self.k * 8) as u64
    }

    fn observe(&mut self) -> Observation<'_> {
        Observation {
            centroids: Some(&self.cents),
            assignments: Some(self.assign.as_slice()),
        }
    }
}

/// Result of a CLARA run: the best medoid set seen, its assignment, and
/// its full-data cost (sum of dissimilarities).
#[derive(Debug)]
pub struct MedoidResult {
    pub medoids: Vec<u32>,
    pub assignments: Vec<u32>,
    pub best_cost: f64,
    pub summary: LoopSummary,
    pub init_stats: TaskStats,
}

pub fn kmedoids_clara(
    source: &Source,
    k: usize,
    params: &ClaraParams,
    cfg: &EngineConfig,
) -> Result<MedoidResult> {
    cfg.validate()?;
    let n = source.n();
    if k == 0 || k > n {
        return Err(Error::usage(format!("k must be in [1, n]; got k={k}, n={n}")));
    }
    if !(params.sample_pct > 0.0 && params.sample_pct <= 100.0) {
        return Err(Error::usage("sample_pct must be in (0, 100]"));
    }
    let sample_size = ((params.sample_pct * n as f64 / 100.0).ceil() as usize).min(n);
    if sample_size < k {
        return Err(Error::usage(format!(
            "sample of {sample_size} rows cannot hold {k} medoids"
        )));
    }

    // Initial medoids: k distinct seeded rows.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut medoids: Vec<u32> = rand::seq::index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    medoids.sort_unstable();

    let mut init_stats = TaskStats::default();
    let d = source.d();
    let mut cents = CentroidSet::new(k, d);
    for (c, &id) in medoids.iter().enumerate() {
        let v = source.materialize_row(id as usize, &mut init_stats)?;
        cents.centroid_mut(c).copy_from_slice(&v);
    }
    cents.snapshot_previous();

    let mut alg = Clara {
        source: source.clone(),
        k,
        d,
        n,
        params: *params,
        medoids,
        cents,
        assign: RowShards::new(vec![UNASSIGNED; n]),
        full_cost: f64::INFINITY,
        best_cost: f64::INFINITY,
        best_medoids: Vec::new(),
        serial_stats: TaskStats::default(),
    };
    let summary = run_loop(&mut alg, cfg, None)?;

    // Report the best medoid set; recompute its assignment if the final
    // iteration was not the best.
    let mut assignments = alg.assign.into_inner();
    let mut best_cost = alg.best_cost;
    if alg.best_medoids != alg.medoids && !alg.best_medoids.is_empty() {
        let mut stats = TaskStats::default();
        let mut vectors = vec![0.0f64; k * d];
        for (c, &id) in alg.best_medoids.iter().enumerate() {
            let v = source.materialize_row(id as usize, &mut stats)?;
            vectors[c * d..(c + 1) * d].copy_from_slice(&v);
        }
        let mut cost = 0.0;
        source.scan_all(&mut stats, |i, row| {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dist = euclidean(row, &vectors[c * d..(c + 1) * d]);
                if dist < best_d {
                    best_d = dist;
                    best = c as u32;
                }
            }
            assignments[i] = best;
            cost += best_d;
        })?;
        best_cost = cost;
        init_stats.merge(&stats);
    }
    let medoids = if alg.best_medoids.is_empty() {
        alg.medoids
    } else {
        alg.best_medoids
    };
    Ok(MedoidResult {
        medoids,
        assignments,
        best_cost,
        summary,
        init_stats,
    })
}
