//! Dissimilarity kernels and row normalization.

use crate::error::{Error, Result};
use crate::matrix::{AssignmentVector, CentroidSet, DataMatrix};

/// Squared Euclidean distance. Panics on dimension mismatch.
#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    let mut acc = 0.0;
    for j in 0..a.len() {
        let diff = a[j] - b[j];
        acc += diff * diff;
    }
    acc
}

/// Euclidean (L2) distance. Panics on dimension mismatch.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

#[inline]
pub fn squared_norm(v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in v {
        acc += x * x;
    }
    acc
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    squared_norm(v).sqrt()
}

/// Cosine dissimilarity `1 - (a . b) / (|a| |b|)`, in `[0, 2]`.
pub fn cosine_dissimilarity(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("cosine dissimilarity of a zero-norm vector"));
    }
    let mut dot = 0.0;
    for j in 0..a.len() {
        dot += a[j] * b[j];
    }
    Ok(1.0 - dot / (na * nb))
}

/// Sum of squared distances of every point to its assigned centroid.
pub fn sse(m: &DataMatrix, centroids: &CentroidSet, assign: &AssignmentVector) -> f64 {
    assert_eq!(assign.len(), m.n(), "assignment length mismatch");
    let mut total = 0.0;
    for i in 0..m.n() {
        let c = assign[i] as usize;
        total += squared_euclidean(m.row(i), centroids.centroid(c));
    }
    total
}

/// Returns a copy of `m` with every row scaled to unit L2 norm.
pub fn normalize_rows(m: &DataMatrix) -> Result<DataMatrix> {
    let d = m.d();
    let mut values = m.values().to_vec();
    for i in 0..m.n() {
        let row = &mut values[i * d..(i + 1) * d];
        let len = norm(row);
        if len == 0.0 {
            return Err(Error::domain(format!("cannot normalize zero row {i}")));
        }
        for x in row.iter_mut() {
            *x /= len;
        }
    }
    DataMatrix::with_partitions(values, m.n(), d, m.partition_map().len())
}
