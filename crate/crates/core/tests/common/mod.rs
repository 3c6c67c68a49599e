//! Shared helpers for integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use mmcluster::algorithms::{InitMethod, InitSpec};
use mmcluster::engine::{ConvergenceMode, EngineConfig, SchedulerMode, Source};
use mmcluster::matrix::DataMatrix;
use mmcluster::synth::{generate_mixture, Mixture, MixtureSpec};

pub fn mixture_source(spec: &MixtureSpec, partitions: usize) -> (Source, Mixture) {
    let mix = generate_mixture(spec).unwrap();
    let m = mix.matrix.clone().repartitioned(partitions);
    (Source::Mem(Arc::new(m)), mix)
}

pub fn mem_source(values: Vec<f64>, n: usize, d: usize, partitions: usize) -> Source {
    Source::Mem(Arc::new(
        DataMatrix::with_partitions(values, n, d, partitions).unwrap(),
    ))
}

pub fn cfg(threads: usize, max_iters: u32) -> EngineConfig {
    EngineConfig {
        threads,
        partitions: 0,
        task_size: 512,
        max_iters,
        tol: 0.0,
        scheduler: SchedulerMode::PartitionedStealing,
        convergence: ConvergenceMode::Fraction,
        locality_groups: 1,
        seed: 1,
    }
}

pub fn forgy(seed: u64) -> InitSpec {
    InitSpec {
        method: InitMethod::Forgy,
        seed,
    }
}

pub fn plusplus(seed: u64) -> InitSpec {
    InitSpec {
        method: InitMethod::PlusPlus,
        seed,
    }
}

/// Bit-exact fingerprint of a centroid buffer.
pub fn centroid_bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

/// Serial Lloyd's oracle: exhaustive assignment (ties to lowest index)
/// and mean update, independent of the engine code paths.
pub struct LloydOracle {
    pub centroids: Vec<f64>,
    pub k: usize,
    pub d: usize,
}

impl LloydOracle {
    pub fn assign(&self, m: &DataMatrix) -> Vec<u32> {
        (0..m.n())
            .map(|i| {
                let mut best = 0u32;
                let mut best_d = f64::INFINITY;
                for c in 0..self.k {
                    let mut acc = 0.0;
                    for j in 0..self.d {
                        let diff = m.row(i)[j] - self.centroids[c * self.d + j];
                        acc += diff * diff;
                    }
                    let dist = acc.sqrt();
                    if dist < best_d {
                        best_d = dist;
                        best = c as u32;
                    }
                }
                best
            })
            .collect()
    }

    pub fn update(&mut self, m: &DataMatrix, assign: &[u32]) {
        let mut sums = vec![0.0f64; self.k * self.d];
        let mut counts = vec![0u64; self.k];
        for i in 0..m.n() {
            let c = assign[i] as usize;
            counts[c] += 1;
            for j in 0..self.d {
                sums[c * self.d + j] += m.row(i)[j];
            }
        }
        for c in 0..self.k {
            if counts[c] > 0 {
                for j in 0..self.d {
                    self.centroids[c * self.d + j] = sums[c * self.d + j] / counts[c] as f64;
                }
            }
        }
    }

    pub fn sse(&self, m: &DataMatrix, assign: &[u32]) -> f64 {
        let mut total = 0.0;
        for i in 0..m.n() {
            let c = assign[i] as usize;
            for j in 0..self.d {
                let diff = m.row(i)[j] - self.centroids[c * self.d + j];
                total += diff * diff;
            }
        }
        total
    }
}
