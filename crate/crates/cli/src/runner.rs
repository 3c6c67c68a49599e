//! Executes one configured run and writes its artifacts.

use std::path::Path;
use std::sync::Arc;

use mmcluster::algorithms::fcmeans::FcmParams;
use mmcluster::algorithms::kmedoids::ClaraParams;
use mmcluster::algorithms::{
    fcmeans, kmeans_observed, kmeanspp_multirun, kmedoids_clara, mbkmeans, skmeans, BatchSpec,
    InitMethod, InitSpec,
};
use mmcluster::engine::{ConvergenceMode, EngineConfig, SchedulerMode, Source};
use mmcluster::extmem::{CacheMode, SemConfig, SemMatrix};
use mmcluster::hier::{run_hierarchical, HierMethod, HierParams};
use mmcluster::io;
use mmcluster::metrics::{IterationMetrics, CSV_HEADER};
use mmcluster::pruning::PruneMode;

use crate::manifest::{DatasetInfo, RunManifest};

/// Everything a run produced, uniform across algorithms.
pub struct RunOutput {
    pub centroid_values: Vec<f64>,
    pub centroid_rows: usize,
    pub d: usize,
    pub assignments: Vec<u32>,
    pub metrics: Vec<IterationMetrics>,
    pub final_objective: f64,
    /// Hierarchical runs also carry the 64-bit point keys.
    pub keys: Option<Vec<u64>>,
    /// Per-iteration FNV hash of the assignment vector (flat k-means
    /// family only; used by compare's losslessness check).
    pub assign_hashes: Vec<u64>,
    /// Per-iteration bit-hash of the centroids.
    pub centroid_hashes: Vec<u64>,
}

pub fn fnv_words(words: impl Iterator<Item = u64>) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for w in words {
        for b in w.to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    hash
}

fn parse_init(name: &str) -> Result<InitMethod, String> {
    match name {
        "random" => Ok(InitMethod::RandomAssign),
        "forgy" => Ok(InitMethod::Forgy),
        "plusplus" => Ok(InitMethod::PlusPlus),
        other => Err(format!("unknown init method {other}")),
    }
}

fn parse_prune(name: &str) -> Result<PruneMode, String> {
    match name {
        "none" => Ok(PruneMode::None),
        "mti" => Ok(PruneMode::Mti),
        "ti" => Ok(PruneMode::Ti),
        other => Err(format!("unknown prune mode {other}")),
    }
}

fn parse_sched(name: &str) -> Result<SchedulerMode, String> {
    match name {
        "steal" => Ok(SchedulerMode::PartitionedStealing),
        "static" => Ok(SchedulerMode::Static),
        "fifo" => Ok(SchedulerMode::Fifo),
        other => Err(format!("unknown scheduler {other}")),
    }
}

fn parse_conv(name: &str) -> Result<ConvergenceMode, String> {
    match name {
        "fraction" => Ok(ConvergenceMode::Fraction),
        "drift" => Ok(ConvergenceMode::Drift),
        "iters" => Ok(ConvergenceMode::Iterations),
        other => Err(format!("unknown convergence mode {other}")),
    }
}

pub fn engine_config(m: &RunManifest) -> Result<EngineConfig, String> {
    Ok(EngineConfig {
        threads: m.threads,
        partitions: m.partitions,
        task_size: m.task_size,
        max_iters: m.max_iters,
        tol: m.tol,
        scheduler: parse_sched(&m.sched)?,
        convergence: parse_conv(&m.conv)?,
        locality_groups: 1,
        seed: m.seed,
    })
}

pub fn open_source(m: &RunManifest) -> Result<Source, String> {
    let cfg = engine_config(m)?;
    let parts = cfg.resolved_partitions();
    let path = Path::new(&m.dataset.path);
    match m.mode.as_str() {
        "im" => {
            let matrix =
                io::load_matrix_partitioned(path, m.dataset.n, m.dataset.d, parts)
                    .map_err(|e| e.to_string())?;
            Ok(Source::Mem(Arc::new(matrix)))
        }
        "sem" => {
            let rc_mode = match m.rc_mode.as_str() {
                "lazy" => CacheMode::Lazy,
                "lru" => CacheMode::Lru,
                other => return Err(format!("unknown rc mode {other}")),
            };
            let sem = SemMatrix::open(
                path,
                m.dataset.n,
                m.dataset.d,
                parts,
                &SemConfig {
                    cache_mode: rc_mode,
                    cache_bytes: m.rc_bytes,
                    icache: m.icache,
                    page_bytes: m.page_bytes,
                },
            )
            .map_err(|e| e.to_string())?;
            Ok(Source::Sem(Arc::new(sem)))
        }
        other => Err(format!("unknown mode {other}")),
    }
}

/// Runs the configured algorithm.
pub fn execute(m: &RunManifest) -> Result<RunOutput, String> {
    let source = open_source(m)?;
    let cfg = engine_config(m)?;
    let init = InitSpec {
        method: parse_init(&m.init)?,
        seed: m.seed,
    };
    let prune = parse_prune(&m.prune)?;
    let d = source.d();
    let err = |e: mmcluster::Error| e.to_string();

    let mut assign_hashes = Vec::new();
    let mut centroid_hashes = Vec::new();

    match m.algorithm.as_str() {
        "kmeans" | "skmeans" => {
            let mut obs = |_t: u32,
                           o: &mmcluster::engine::Observation<'_>,
                           _m: &IterationMetrics| {
                if let Some(a) = o.assignments {
                    assign_hashes.push(fnv_words(a.iter().map(|&x| x as u64)));
                }
                if let Some(c) = o.centroids {
                    centroid_hashes
                        .push(fnv_words(c.current_values().iter().map(|v| v.to_bits())));
                }
            };
            let r = if m.algorithm == "kmeans" {
                kmeans_observed(&source, m.k, &init, prune, &cfg, Some(&mut obs)).map_err(err)?
            } else {
                // skmeans drives its own normalized source; per-iteration
                // hashes come from the final state instead.
                skmeans(&source, m.k, &init, prune, &cfg).map_err(err)?
            };
            Ok(RunOutput {
                centroid_values: r.centroids.current_values().to_vec(),
                centroid_rows: m.k,
                d,
                assignments: r.assignments,
                metrics: r.summary.metrics,
                final_objective: r.final_objective,
                keys: None,
                assign_hashes,
                centroid_hashes,
            })
        }
        "kmeanspp" => {
            let (r, _sses) =
                kmeanspp_multirun(&source, m.k, m.runs, m.seed, prune, &cfg).map_err(err)?;
            Ok(RunOutput {
                centroid_values: r.centroids.current_values().to_vec(),
                centroid_rows: m.k,
                d,
                assignments: r.assignments,
                metrics: r.summary.metrics,
                final_objective: r.final_objective,
                keys: None,
                assign_hashes,
                centroid_hashes,
            })
        }
        "mbkmeans" => {
            let r = mbkmeans(
                &source,
                m.k,
                BatchSpec {
                    fraction: m.batch_frac,
                },
                &init,
                &cfg,
            )
            .map_err(err)?;
            Ok(RunOutput {
                centroid_values: r.centroids.current_values().to_vec(),
                centroid_rows: m.k,
                d,
                assignments: r.assignments,
                metrics: r.summary.metrics,
                final_objective: r.final_objective,
                keys: None,
                assign_hashes,
                centroid_hashes,
            })
        }
        "fcmeans" => {
            let r = fcmeans(
                &source,
                m.k,
                &FcmParams {
                    z: m.z,
                    block: 64,
                },
                &init,
                &cfg,
            )
            .map_err(err)?;
            Ok(RunOutput {
                centroid_values: r.centroids.current_values().to_vec(),
                centroid_rows: m.k,
                d,
                assignments: r.assignments,
                metrics: r.summary.metrics,
                final_objective: r.final_objective,
                keys: None,
                assign_hashes,
                centroid_hashes,
            })
        }
        "kmedoids" => {
            let r = kmedoids_clara(
                &source,
                m.k,
                &ClaraParams {
                    sample_pct: m.sample_pct,
                    seed: m.seed,
                },
                &cfg,
            )
            .map_err(err)?;
            let mut centroid_values = Vec::with_capacity(m.k * d);
            let mut stats = Default::default();
            for &id in &r.medoids {
                centroid_values.extend(
                    source
                        .materialize_row(id as usize, &mut stats)
                        .map_err(err)?,
                );
            }
            Ok(RunOutput {
                centroid_values,
                centroid_rows: m.k,
                d,
                assignments: r.assignments,
                metrics: r.summary.metrics,
                final_objective: r.best_cost,
                keys: None,
                assign_hashes,
                centroid_hashes,
            })
        }
        "hmeans" | "xmeans" | "gmeans" => {
            let method = match m.algorithm.as_str() {
                "hmeans" => HierMethod::HMeans { lmax: m.lmax },
                "xmeans" => HierMethod::XMeans { kmax: m.kmax },
                _ => HierMethod::GMeans {
                    kmax: m.kmax,
                    alpha: m.alpha,
                },
            };
            let r = run_hierarchical(
                &source,
                &HierParams {
                    method,
                    inner_iters: m.max_iters,
                },
                &cfg,
            )
            .map_err(err)?;
            let mut centroid_values = Vec::new();
            for &leaf in &r.leaf_ids {
                centroid_values.extend_from_slice(&r.tree.nodes[leaf as usize].centroid);
            }
            let objective = r.metrics.last().map(|mm| mm.objective).unwrap_or(f64::NAN);
            Ok(RunOutput {
                centroid_values,
                centroid_rows: r.leaf_ids.len(),
                d,
                assignments: r.assignments,
                metrics: r.metrics,
                final_objective: objective,
                keys: Some(r.keys),
                assign_hashes,
                centroid_hashes,
            })
        }
        other => Err(format!(
            "unknown algorithm {other}; expected one of kmeans, skmeans, kmeanspp, \
             mbkmeans, fcmeans, kmedoids, hmeans, xmeans, gmeans"
        )),
    }
}

/// Counter sanity: hits + misses == rows requested, and flat k-means
/// iterations never exceed n*k distance computations.
pub fn counters_sane(m: &RunManifest, out: &RunOutput) -> bool {
    let flat_kmeans = matches!(m.algorithm.as_str(), "kmeans" | "skmeans" | "kmeanspp");
    out.metrics.iter().all(|it| {
        let io_ok = it.cache_hits + it.cache_misses == it.rows_req;
        let dist_ok =
            !flat_kmeans || it.dist_comps <= (m.dataset.n as u64) * (m.k as u64);
        io_ok && dist_ok
    })
}

pub fn write_outputs(dir: &Path, m: &RunManifest, out: &RunOutput) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let err = |e: mmcluster::Error| e.to_string();
    io::save_values(&dir.join("centroids.bin"), &out.centroid_values).map_err(err)?;
    io::save_ids(&dir.join("assignments.bin"), &out.assignments).map_err(err)?;
    if let Some(keys) = &out.keys {
        io::save_keys(&dir.join("keys.bin"), keys).map_err(err)?;
    }
    let mut csv = String::with_capacity(out.metrics.len() * 96);
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for it in &out.metrics {
        csv.push_str(&it.csv_row());
        csv.push('\n');
    }
    std::fs::write(dir.join("metrics.csv"), csv).map_err(|e| e.to_string())?;
    crate::manifest::write_json(&dir.join("manifest.json"), m).map_err(|e| e.to_string())?;
    Ok(())
}

pub fn dataset_info(path: &Path, n: usize, d: usize) -> Result<DatasetInfo, String> {
    let checksum = io::fingerprint(path).map_err(|e| e.to_string())?;
    Ok(DatasetInfo {
        path: path.display().to_string(),
        n,
        d,
        checksum: format!("{checksum:016x}"),
    })
}
