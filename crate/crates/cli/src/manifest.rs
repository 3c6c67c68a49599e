//! Run and dataset manifests: everything needed to reproduce a run
//! bit-for-bit at a fixed thread count.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub n: usize,
    pub d: usize,
    /// FNV-1a fingerprint of the matrix file, hex.
    pub checksum: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: String,
    pub n: usize,
    pub d: usize,
    pub true_k: usize,
    pub separation: f64,
    pub seed: u64,
    pub checksum: String,
    pub matrix_file: String,
    pub labels_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub algorithm: String,
    pub k: usize,
    pub init: String,
    pub prune: String,
    pub sched: String,
    pub conv: String,
    pub mode: String,
    pub threads: usize,
    pub partitions: usize,
    pub task_size: usize,
    pub max_iters: u32,
    pub tol: f64,
    pub seed: u64,
    pub rc_bytes: usize,
    pub rc_mode: String,
    pub icache: u32,
    pub page_bytes: usize,
    pub z: f64,
    pub batch_frac: f64,
    pub sample_pct: f64,
    pub runs: usize,
    pub kmax: usize,
    pub lmax: u32,
    pub alpha: f64,
    pub dataset: DatasetInfo,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(value).expect("manifest serializes");
    std::fs::write(path, json)
}

pub fn read_run_manifest(path: &Path) -> Result<RunManifest, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}
