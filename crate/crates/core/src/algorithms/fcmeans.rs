//! Fuzzy c-means with the M-steps split across two barriers: the first
//! parallel phase recomputes the point-major membership rows (the n x k
//! contribution structure) and the objective J; the second accumulates
//! the membership-weighted sums that define the next centroids.

use crate::algorithms::{init_centroids, InitSpec};
use crate::dist::squared_euclidean;
use crate::engine::{
    run_loop, ActiveSet, EngineConfig, FetchBuf, IterationOutcome, IterationPlan, LoopSummary,
    MmAlgorithm, Observation, RowShards, Source, TaskRows,
};
use crate::error::{Error, Result};
use crate::matrix::{CentroidSet, UNASSIGNED};
use crate::metrics::TaskStats;

/// Membership degrees of one point: `u_c = 1 / sum_j (d2_c / d2_j)^(1/(z-1))`,
/// with a crisp row when the point coincides with a centroid.
pub fn membership_row(d2: &[f64], z: f64, out: &mut [f64]) {
    let k = d2.len();
    if let Some(hit) = d2.iter().position(|&x| x == 0.0) {
        out.fill(0.0);
        out[hit] = 1.0;
        return;
    }
    let e = 1.0 / (z - 1.0);
    for c in 0..k {
        let mut denom = 0.0;
        for j in 0..k {
            denom += (d2[c] / d2[j]).powf(e);
        }
        out[c] = 1.0 / denom;
    }
}

pub struct FcmParams {
    pub z: f64,
    /// Rows per cache tile when updating the contribution structure.
    pub block: usize,
}

impl Default for FcmParams {
    fn default() -> Self {
        FcmParams { z: 2.0, block: 64 }
    }
}

struct Fcm {
    source: Source,
    k: usize,
    d: usize,
    n: usize,
    z: f64,
    block: usize,
    cents: CentroidSet,
    /// Point-major n x k membership matrix.
    memberships: RowShards<f64>,
    assign: RowShards<u32>,
    objective: f64,
}

enum FcmPartial {
    Objective(f64),
    Sums { wsums: Vec<f64>, wtot: Vec<f64> },
}

#[derive(Default)]
struct FcmScratch {
    fetch: FetchBuf,
    d2: Vec<f64>,
}

impl MmAlgorithm for Fcm {
    type Partial = FcmPartial;
    type Scratch = FcmScratch;

    fn n(&self) -> usize {
        self.n
    }

    fn source(&self) -> &Source {
        &self.source
    }

    fn begin_iteration(&mut self, _t: u32) -> Result<IterationPlan> {
        Ok(IterationPlan {
            phases: 2,
            active: ActiveSet::All { n: self.n },
        })
    }

    fn run_task(
        &self,
        phase: usize,
        rows: TaskRows<'_>,
        scratch: &mut FcmScratch,
        stats: &mut TaskStats,
    ) -> Result<FcmPartial> {
        let (k, d) = (self.k, self.d);
        scratch.fetch.ids.clear();
        scratch.fetch.ids.extend(rows.iter().map(|i| i as u32));
        let block = self.source.fetch(&mut scratch.fetch, stats)?;
        scratch.d2.resize(k, 0.0);

        if phase == 0 {
            // M1: memberships and objective, tiled over `block` rows.
            let mut j_acc = 0.0;
            for tile in block.ids().chunks(self.block.max(1)) {
                for &iu in tile {
                    let i = iu as usize;
                    let v = block.row(i);
                    for c in 0..k {
                        scratch.d2[c] = squared_euclidean(v, self.cents.centroid(c));
                    }
                    stats.dist_comps += k as u64;
                    // Safety: row i belongs to this task exclusively.
                    let mrow = unsafe { self.memberships.range_mut(i * k, k) };
                    membership_row(&scratch.d2, self.z, mrow);
                    let mut best = 0u32;
                    let mut best_u = -1.0;
                    for c in 0..k {
                        j_acc += mrow[c].powf(self.z) * scratch.d2[c];
                        if mrow[c] > best_u {
                            best_u = mrow[c];
                            best = c as u32;
                        }
                    }
                    unsafe {
                        let a = self.assign.row_mut(i);
                        if *a != best {
                            stats.reassigned += 1;
                            *a = best;
                        }
                    }
                }
            }
            Ok(FcmPartial::Objective(j_acc))
        } else {
            // M2: membership-weighted accumulation.
            let mut wsums = vec![0.0f64; k * d];
            let mut wtot = vec![0.0f64; k];
            for &iu in block.ids() {
                let i = iu as usize;
                let v = block.row(i);
                let mrow = unsafe { self.memberships.range_mut(i * k, k) };
                for c in 0..k {
                    let w = mrow[c].powf(self.z);
                    wtot[c] += w;
                    for j in 0..d {
                        wsums[c * d + j] += w * v[j];
                    }
                }
            }
            Ok(FcmPartial::Sums { wsums, wtot })
        }
    }

    fn reduce(&mut self, phase: usize, _t: u32, partials: Vec<FcmPartial>) -> Result<()> {
        if phase == 0 {
            self.objective = partials
                .iter()
                .map(|p| match p {
                    FcmPartial::Objective(j) => *j,
                    _ => unreachable!(),
                })
                .sum();
            return Ok(());
        }
        let (k, d) = (self.k, self.d);
        let mut wsums = vec![0.0f64; k * d];
        let mut wtot = vec![0.0f64; k];
        for p in &partials {
            if let FcmPartial::Sums { wsums: s, wtot: t } = p {
                for x in 0..k * d {
                    wsums[x] += s[x];
                }
                for c in 0..k {
                    wtot[c] += t[c];
                }
            }
        }
        self.cents.snapshot_previous();
        for c in 0..k {
            if wtot[c] > 0.0 {
                for j in 0..d {
                    self.cents.centroid_mut(c)[j] = wsums[c * d + j] / wtot[c];
                }
            }
        }
        self.cents.refresh_drift();
        Ok(())
    }

    fn end_iteration(&mut self, _t: u32) -> Result<IterationOutcome> {
        Ok(IterationOutcome {
            objective: self.objective,
            max_drift: self.cents.max_drift(),
            extra: TaskStats::default(),
        })
    }

    fn aux_bytes(&self) -> u64 {
        (self.n * self.k * 8 + self.n * 4) as u64 + self.cents.aux_bytes()
    }

    fn partial_bytes(&self) -> u64 {
        ((self.k * self.d + self.k) * 8) as u64
    }

    fn observe(&mut self) -> Observation<'_> {
        Observation {
            centroids: Some(&self.cents),
            assignments: Some(self.assign.as_slice()),
        }
    }
}

/// Result of a fuzzy c-means run.
#[derive(Debug)]
pub struct FcmResult {
    pub centroids: CentroidSet,
    /// Point-major n x k membership matrix.
    pub memberships: Vec<f64>,
    /// Crisp argmax view of the memberships.
    pub assignments: Vec<u32>,
    pub summary: LoopSummary,
    /// Final objective J.
    pub final_objective: f64,
    pub init_stats: TaskStats,
}

pub fn fcmeans(
    source: &Source,
    k: usize,
    params: &FcmParams,
    init: &InitSpec,
    cfg: &EngineConfig,
) -> Result<FcmResult> {
    cfg.validate()?;
    // Negated form also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(params.z > 1.0) {
        return Err(Error::usage(format!(
            "fuzziness z must exceed 1; got {}",
            params.z
        )));
    }
    let mut init_stats = TaskStats::default();
    let cents = init_centroids(source, k, init, &mut init_stats)?;
    let n = source.n();
    let mut alg = Fcm {
        source: source.clone(),
        k,
        d: source.d(),
        n,
        z: params.z,
        block: params.block,
        cents,
        memberships: RowShards::new(vec![0.0; n * k]),
        assign: RowShards::new(vec![UNASSIGNED; n]),
        objective: 0.0,
    };
    let summary = run_loop(&mut alg, cfg, None)?;
    let final_objective = summary
        .metrics
        .last()
        .map(|m| m.objective)
        .unwrap_or(f64::NAN);
    Ok(FcmResult {
        centroids: alg.cents,
        memberships: alg.memberships.into_inner(),
        assignments: alg.assign.into_inner(),
        summary,
        final_objective,
        init_stats,
    })
}
