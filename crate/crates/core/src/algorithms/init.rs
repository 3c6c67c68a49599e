//! Centroid initialization: random assignment, Forgy, and k-means++.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::euclidean;
use crate::engine::Source;
use crate::error::{Error, Result};
use crate::matrix::CentroidSet;
use crate::metrics::TaskStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    /// Rows are assigned to clusters uniformly; centroid = cluster mean.
    RandomAssign,
    /// k distinct rows drawn uniformly.
    Forgy,
    /// k-means++: each next centroid drawn with probability D(v)^2 / sum.
    PlusPlus,
}

#[derive(Debug, Clone, Copy)]
pub struct InitSpec {
    pub method: InitMethod,
    pub seed: u64,
}

/// Picks the index of the first weight whose running total exceeds
/// `r` (`0 <= r < total`); zero-weight entries can never be picked while
/// any positive weight remains.
pub fn pick_by_weight(weights: &[f64], r: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > r {
            return i;
        }
    }
    // Rounding pushed r to the very top; take the last positive weight.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

/// Seeds `k` centroids from the dataset. Deterministic per `spec.seed`;
/// I/O performed on the SEM backend is counted into `stats`.
pub fn init_centroids(
    source: &Source,
    k: usize,
    spec: &InitSpec,
    stats: &mut TaskStats,
) -> Result<CentroidSet> {
    let n = source.n();
    let d = source.d();
    if k == 0 || k > n {
        return Err(Error::usage(format!("k must be in [1, n]; got k={k}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.method {
        InitMethod::RandomAssign => {
            // Redraw deterministically until no cluster lands empty.
            for _ in 0..100 {
                let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
                let mut counts = vec![0u64; k];
                for &l in &labels {
                    counts[l] += 1;
                }
                if counts.contains(&0) {
                    continue;
                }
                let mut sums = vec![0.0f64; k * d];
                source.scan_all(stats, |i, row| {
                    let c = labels[i];
                    for j in 0..d {
                        sums[c * d + j] += row[j];
                    }
                })?;
                for c in 0..k {
                    for j in 0..d {
                        sums[c * d + j] /= counts[c] as f64;
                    }
                }
                return CentroidSet::from_values(sums, k, d);
            }
            Err(Error::usage(
                "random assignment kept producing an empty cluster; use forgy",
            ))
        }
        InitMethod::Forgy => {
            let picks = rand::seq::index::sample(&mut rng, n, k).into_vec();
            let mut values = vec![0.0f64; k * d];
            for (c, &row) in picks.iter().enumerate() {
                let v = source.materialize_row(row, stats)?;
                values[c * d..(c + 1) * d].copy_from_slice(&v);
            }
            CentroidSet::from_values(values, k, d)
        }
        InitMethod::PlusPlus => {
            let mut values = vec![0.0f64; k * d];
            let mut chosen = vec![false; n];
            let first = rng.random_range(0..n);
            chosen[first] = true;
            values[..d].copy_from_slice(&source.materialize_row(first, stats)?);

            // D(v): distance to the nearest chosen centroid so far.
            let mut dmin = vec![f64::INFINITY; n];
            for c in 1..k {
                let prev = values[(c - 1) * d..c * d].to_vec();
                let mut total = 0.0f64;
                let mut weights = vec![0.0f64; n];
                source.scan_all(stats, |i, row| {
                    let dist = euclidean(row, &prev);
                    if dist < dmin[i] {
                        dmin[i] = dist;
                    }
                    let w = if chosen[i] { 0.0 } else { dmin[i] * dmin[i] };
                    weights[i] = w;
                    total += w;
                })?;
                let next = if total > 0.0 {
                    pick_by_weight(&weights, rng.random::<f64>() * total)
                } else {
                    // Every remaining row duplicates a centroid; take the
                    // lowest unchosen index to keep rows distinct.
                    chosen
                        .iter()
                        .position(|&c| !c)
                        .ok_or_else(|| Error::usage("k exceeds the number of rows"))?
                };
                chosen[next] = true;
                values[c * d..(c + 1) * d].copy_from_slice(&source.materialize_row(next, stats)?);
            }
            CentroidSet::from_values(values, k, d)
        }
    }
}
