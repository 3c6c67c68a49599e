//! Adversarial combinations: heavy churn, systematic exact ties from
//! duplicated rows, forced empty-cluster repairs, and the SEM backend,
//! all at once. The exactness contracts must survive every mix.

mod common;

use std::sync::Arc;

use common::*;
use mmcluster::algorithms::kmeans_observed;
use mmcluster::engine::{ConvergenceMode, Source};
use mmcluster::extmem::{CacheMode, SemConfig, SemMatrix};
use mmcluster::io::save_matrix;
use mmcluster::matrix::DataMatrix;
use mmcluster::metrics::IterationMetrics;
use mmcluster::pruning::PruneMode;

/// A nasty dataset: three tight duplicate blocks (exact ties inside each),
/// plus an overlapping Gaussian cloud.
fn duplicate_heavy(seed: u64) -> DataMatrix {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    let n_dup = 300;
    for block in 0..3 {
        let base = [block as f64 * 2.0, -(block as f64), 0.5 * block as f64];
        for _ in 0..n_dup {
            values.extend_from_slice(&base); // bit-identical duplicates
        }
    }
    for _ in 0..1100 {
        for j in 0..3 {
            values.push(rng.random_range(-2.0..4.0) + j as f64 * 0.1);
        }
    }
    DataMatrix::new(values, 2000, 3).unwrap()
}

fn trace(
    source: &Source,
    k: usize,
    prune: PruneMode,
    threads: usize,
) -> (Vec<Vec<u32>>, Vec<Vec<u64>>, Vec<IterationMetrics>) {
    let mut c = cfg(threads, 20);
    c.convergence = ConvergenceMode::Iterations;
    let mut assigns = Vec::new();
    let mut cents = Vec::new();
    let mut obs = |_t: u32,
                   o: &mmcluster::engine::Observation<'_>,
                   _m: &IterationMetrics| {
        assigns.push(o.assignments.unwrap().to_vec());
        cents.push(centroid_bits(o.centroids.unwrap().current_values()));
    };
    let r = kmeans_observed(source, k, &forgy(13), prune, &c, Some(&mut obs)).unwrap();
    (assigns, cents, r.summary.metrics)
}

#[test]
fn exact_ties_and_duplicates_stay_lossless() {
    // k = 12 over 2000 points with 900 duplicates forces repeated exact
    // ties and (with forgy landing inside duplicate blocks) repeated
    // empty-cluster repairs.
    let m = duplicate_heavy(3);
    for threads in [1usize, 4] {
        let source = Source::Mem(Arc::new(m.clone().repartitioned(threads)));
        let (a_none, c_none, _) = trace(&source, 12, PruneMode::None, threads);
        let (a_mti, c_mti, _) = trace(&source, 12, PruneMode::Mti, threads);
        let (a_ti, c_ti, _) = trace(&source, 12, PruneMode::Ti, threads);
        assert_eq!(a_none, a_mti, "T={threads}: mti diverged");
        assert_eq!(a_none, a_ti, "T={threads}: ti diverged");
        assert_eq!(c_none, c_mti, "T={threads}: mti centroids diverged");
        assert_eq!(c_none, c_ti, "T={threads}: ti centroids diverged");
    }
}

#[test]
fn sem_lru_torture_matches_memory_backend() {
    let m = duplicate_heavy(5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("torture.bin");
    save_matrix(&path, &m).unwrap();
    // Deliberately tiny LRU cache: constant eviction pressure.
    let sem = Source::Sem(Arc::new(
        SemMatrix::open(
            &path,
            2000,
            3,
            8,
            &SemConfig {
                cache_mode: CacheMode::Lru,
                cache_bytes: 4096,
                icache: 3,
                page_bytes: 512,
            },
        )
        .unwrap(),
    ));
    let mem = Source::Mem(Arc::new(m.repartitioned(8)));
    for prune in [PruneMode::None, PruneMode::Mti, PruneMode::Ti] {
        let (a_mem, c_mem, _) = trace(&mem, 9, prune, 8);
        let (a_sem, c_sem, _) = trace(&sem, 9, prune, 8);
        assert_eq!(a_mem, a_sem, "{prune:?}: sem assignments diverged");
        assert_eq!(c_mem, c_sem, "{prune:?}: sem centroids diverged");
    }
}

#[test]
fn repeated_runs_under_contention_identical() {
    // Four concurrent torture runs of the same configuration must all
    // produce the same bits as a solo run.
    let m = duplicate_heavy(7);
    let source = Source::Mem(Arc::new(m.repartitioned(4)));
    let (solo_a, solo_c, _) = trace(&source, 10, PruneMode::Mti, 4);
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| s.spawn(|| trace(&source, 10, PruneMode::Mti, 4)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (a, c, _) in results {
        assert_eq!(a, solo_a);
        assert_eq!(c, solo_c);
    }
}
