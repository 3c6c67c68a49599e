//! Flat (non-hierarchical) MM clustering algorithms.

pub mod fcmeans;
pub mod init;
pub mod kmeans;
pub mod kmedoids;
pub mod mbkmeans;

pub use fcmeans::{fcmeans, FcmResult};
pub use init::{init_centroids, pick_by_weight, InitMethod, InitSpec};
pub use kmeans::Kmeans;
pub use kmedoids::{kmedoids_clara, MedoidResult};
pub use mbkmeans::{mbkmeans, BatchSpec};

use std::io::Write;
use std::sync::Arc;

use crate::dist::normalize_rows;
use crate::engine::{run_loop, EngineConfig, LoopSummary, Observer, Source};
use crate::error::{Error, Result};
use crate::extmem::{SemConfig, SemMatrix};
use crate::matrix::CentroidSet;
use crate::metrics::TaskStats;
use crate::pruning::PruneMode;

/// Result of a flat centroid-based run.
#[derive(Debug, Clone)]
pub struct FlatResult {
    pub centroids: CentroidSet,
    pub assignments: Vec<u32>,
    pub summary: LoopSummary,
    /// Objective after the final iteration (NaN when no iteration ran).
    pub final_objective: f64,
    /// I/O performed before the first iteration (initialization).
    pub init_stats: TaskStats,
    /// Smallest best-vs-second-best assignment margin observed; tracked
    /// only by exhaustive scans (prune mode `none`), infinity otherwise.
    pub min_margin: f64,
}

/// Derives the seed for an independent run or iteration stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 step; decorrelates consecutive stream indexes.
    let mut z = base.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lloyd's k-means via the merged MM step, with the selected prune mode.
pub fn kmeans(
    source: &Source,
    k: usize,
    init: &InitSpec,
    prune: PruneMode,
    cfg: &EngineConfig,
) -> Result<FlatResult> {
    kmeans_observed(source, k, init, prune, cfg, None)
}

pub fn kmeans_observed(
    source: &Source,
    k: usize,
    init: &InitSpec,
    prune: PruneMode,
    cfg: &EngineConfig,
    observer: Option<Observer<'_>>,
) -> Result<FlatResult> {
    run_kmeans_family(source, k, init, prune, false, cfg, observer)
}

fn run_kmeans_family(
    source: &Source,
    k: usize,
    init: &InitSpec,
    prune: PruneMode,
    spherical: bool,
    cfg: &EngineConfig,
    observer: Option<Observer<'_>>,
) -> Result<FlatResult> {
    cfg.validate()?;
    let mut init_stats = TaskStats::default();
    let cents = init_centroids(source, k, init, &mut init_stats)?;
    let mut alg = Kmeans::new(
        source.clone(),
        cents,
        prune,
        spherical,
        cfg.threads,
        cfg.task_size,
    )?;
    let summary = run_loop(&mut alg, cfg, observer)?;
    let final_objective = summary
        .metrics
        .last()
        .map(|m| m.objective)
        .unwrap_or(f64::NAN);
    let min_margin = alg.min_margin();
    let (centroids, assignments) = alg.into_result();
    Ok(FlatResult {
        centroids,
        assignments,
        summary,
        final_objective,
        init_stats,
        min_margin,
    })
}

/// Spherical k-means: rows are projected to the unit sphere once up
/// front, assignment maximizes cosine similarity (equivalently minimizes
/// Euclidean distance on the sphere), and centroids are renormalized
/// after every update. MTI pruning applies unchanged to the normalized
/// problem.
pub fn skmeans(
    source: &Source,
    k: usize,
    init: &InitSpec,
    prune: PruneMode,
    cfg: &EngineConfig,
) -> Result<FlatResult> {
    let normalized = normalized_source(source)?;
    run_kmeans_family(&normalized, k, init, prune, true, cfg, None)
}

/// Builds the unit-norm counterpart of a source. The SEM backend streams
/// a normalized sidecar store (`<store>.norm`) so resident memory stays
/// O(n); the sidecar is reused as plain row data afterwards.
pub fn normalized_source(source: &Source) -> Result<Source> {
    match source {
        Source::Mem(m) => Ok(Source::Mem(Arc::new(normalize_rows(m)?))),
        Source::Sem(s) => {
            let store = s.store();
            let side = store.path().with_extension("norm");
            let mut stats = TaskStats::default();
            {
                let mut w = std::io::BufWriter::new(std::fs::File::create(&side)?);
                let mut bad: Option<usize> = None;
                source.scan_all(&mut stats, |i, row| {
                    let len = crate::dist::norm(row);
                    if len == 0.0 && bad.is_none() {
                        bad = Some(i);
                    }
                    // Divide exactly as the in-memory normalization does,
                    // so both backends hold bit-identical rows.
                    for &x in row {
                        let v = if len == 0.0 { 0.0 } else { x / len };
                        let _ = w.write_all(&v.to_le_bytes());
                    }
                })?;
                if let Some(i) = bad {
                    return Err(Error::domain(format!("cannot normalize zero row {i}")));
                }
                w.flush()?;
            }
            let cfg = SemConfig {
                cache_mode: s.cache().mode(),
                cache_bytes: s.cache().capacity(),
                icache: s.cache().icache(),
                page_bytes: store.page_bytes(),
            };
            Ok(Source::Sem(Arc::new(SemMatrix::open(
                &side,
                s.n(),
                s.d(),
                s.partition_map().len(),
                &cfg,
            )?)))
        }
    }
}

/// k-means++: `runs` independent plusplus-initialized runs; returns the
/// run with the minimum final SSE plus every run's final SSE.
pub fn kmeanspp_multirun(
    source: &Source,
    k: usize,
    runs: usize,
    seed: u64,
    prune: PruneMode,
    cfg: &EngineConfig,
) -> Result<(FlatResult, Vec<f64>)> {
    if runs == 0 {
        return Err(Error::usage("run count must be at least 1"));
    }
    let mut best: Option<FlatResult> = None;
    let mut sses = Vec::with_capacity(runs);
    for r in 0..runs {
        let init = InitSpec {
            method: InitMethod::PlusPlus,
            seed: if r == 0 { seed } else { derive_seed(seed, r as u64) },
        };
        let result = kmeans(source, k, &init, prune, cfg)?;
        sses.push(result.final_objective);
        let better = match &best {
            None => true,
            Some(b) => result.final_objective < b.final_objective,
        };
        if better {
            best = Some(result);
        }
    }
    Ok((best.expect("runs >= 1"), sses))
}
