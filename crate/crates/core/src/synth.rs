//! Synthetic Gaussian mixture generation for benchmarks and tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Parameters of a seeded isotropic Gaussian mixture. `separation` is the
/// minimum inter-center distance in units of the within-cluster standard
/// deviation (which is fixed at 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub n: usize,
    pub d: usize,
    pub true_k: usize,
    pub separation: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.true_k == 0 || self.true_k > self.n {
            return Err(Error::usage(format!(
                "true_k must be in [1, n]; got true_k={}, n={}",
                self.true_k, self.n
            )));
        }
        if self.d == 0 {
            return Err(Error::usage("d must be at least 1"));
        }
        // Negated form also rejects NaN.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.separation > 0.0) {
            return Err(Error::usage("separation must be positive"));
        }
        Ok(())
    }
}

/// A generated mixture: the data matrix, the generating label of every row,
/// and the true centers (`true_k * d`, row-major).
#[derive(Debug, Clone)]
pub struct Mixture {
    pub matrix: DataMatrix,
    pub labels: Vec<u32>,
    pub centers: Vec<f64>,
}

/// Draws a mixture deterministically from `spec.seed`. Rows are assigned to
/// centers round-robin, so cluster sizes differ by at most one and every
/// contiguous row range touches all clusters.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = place_centers(&mut rng, spec);

    let mut values = vec![0.0f64; spec.n * spec.d];
    let mut labels = vec![0u32; spec.n];
    for i in 0..spec.n {
        let c = i % spec.true_k;
        labels[i] = c as u32;
        let center = &centers[c * spec.d..(c + 1) * spec.d];
        let row = &mut values[i * spec.d..(i + 1) * spec.d];
        for j in 0..spec.d {
            let noise: f64 = rng.sample(StandardNormal);
            row[j] = center[j] + noise;
        }
    }
    let matrix = DataMatrix::new(values, spec.n, spec.d)?;
    Ok(Mixture {
        matrix,
        labels,
        centers,
    })
}

/// Rejection-samples `true_k` centers in a centered cube until all pairwise
/// distances reach `separation`; the cube grows if placement stalls.
fn place_centers(rng: &mut ChaCha8Rng, spec: &MixtureSpec) -> Vec<f64> {
    let k = spec.true_k;
    let spread = spec.true_k as f64;
    let mut side = 2.5 * spec.separation * spread.powf(1.0 / spec.d as f64);
    loop {
        let mut centers: Vec<f64> = Vec::with_capacity(k * spec.d);
        let mut placed = 0usize;
        let mut attempts = 0usize;
        while placed < k {
            let candidate: Vec<f64> = (0..spec.d)
                .map(|_| rng.random_range(-side / 2.0..side / 2.0))
                .collect();
            let ok = (0..placed).all(|c| {
                crate::dist::euclidean(&candidate, &centers[c * spec.d..(c + 1) * spec.d])
                    >= spec.separation
            });
            if ok {
                centers.extend_from_slice(&candidate);
                placed += 1;
                attempts = 0;
            } else {
                attempts += 1;
                if attempts > 200 * k {
                    break;
                }
            }
        }
        if placed == k {
            return centers;
        }
        side *= 1.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::euclidean;

    fn spec() -> MixtureSpec {
        MixtureSpec {
            n: 1000,
            d: 4,
            true_k: 4,
            separation: 20.0,
            seed: 1,
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_mixture(&spec()).unwrap();
        let b = generate_mixture(&spec()).unwrap();
        assert_eq!(a.labels, b.labels);
        for (x, y) in a.matrix.values().iter().zip(b.matrix.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn single_cluster_labels_all_zero() {
        let m = generate_mixture(&MixtureSpec {
            true_k: 1,
            ..spec()
        })
        .unwrap();
        assert!(m.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn centers_respect_separation() {
        let m = generate_mixture(&spec()).unwrap();
        let d = spec().d;
        for a in 0..4 {
            for b in (a + 1)..4 {
                let dist = euclidean(&m.centers[a * d..(a + 1) * d], &m.centers[b * d..(b + 1) * d]);
                assert!(dist >= 20.0, "centers {a},{b} at distance {dist}");
            }
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(generate_mixture(&MixtureSpec {
            true_k: 0,
            ..spec()
        })
        .is_err());
        assert!(generate_mixture(&MixtureSpec {
            separation: 0.0,
            ..spec()
        })
        .is_err());
    }

    /// Serial Lloyd's oracle: one assignment pass, tie to lowest index.
    fn assign_oracle(m: &DataMatrix, centers: &[f64], k: usize) -> Vec<u32> {
        let d = m.d();
        (0..m.n())
            .map(|i| {
                let mut best = 0u32;
                let mut best_d = f64::INFINITY;
                for c in 0..k {
                    let dist = euclidean(m.row(i), &centers[c * d..(c + 1) * d]);
                    if dist < best_d {
                        best_d = dist;
                        best = c as u32;
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn separated_mixture_converges_in_one_lloyd_step() {
        let mix = generate_mixture(&spec()).unwrap();
        let (d, k) = (spec().d, spec().true_k);
        let first = assign_oracle(&mix.matrix, &mix.centers, k);

        // Means of the first assignment.
        let mut sums = vec![0.0f64; k * d];
        let mut counts = vec![0u64; k];
        for i in 0..mix.matrix.n() {
            let c = first[i] as usize;
            counts[c] += 1;
            for j in 0..d {
                sums[c * d + j] += mix.matrix.row(i)[j];
            }
        }
        for c in 0..k {
            for j in 0..d {
                sums[c * d + j] /= counts[c] as f64;
            }
        }

        // A second pass over the updated means must move no point.
        let second = assign_oracle(&mix.matrix, &sums, k);
        assert_eq!(first, second);
        // With separation 20 the generating labels are recovered exactly.
        assert_eq!(first, mix.labels);
    }
}
