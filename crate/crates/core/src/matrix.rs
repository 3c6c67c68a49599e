//! Dense row-major data matrix, centroid state, and assignment vector.

use crate::dist::euclidean;
use crate::error::{Error, Result};

/// Sentinel assignment before the first iteration of any algorithm.
pub const UNASSIGNED: u32 = u32::MAX;

/// Per-point cluster identifiers. Entries are in `[0, k)` after the first
/// completed iteration of a full-batch algorithm and [`UNASSIGNED`] before.
pub type AssignmentVector = Vec<u32>;

/// A contiguous block of rows owned by one locality partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowRange {
    pub start: usize,
    pub len: usize,
    pub partition: usize,
}

/// Disjoint, contiguous, sorted row ranges covering exactly `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    ranges: Vec<RowRange>,
}

impl PartitionMap {
    /// Splits `[0, n)` into `parts` near-equal contiguous ranges.
    pub fn even(n: usize, parts: usize) -> Self {
        let parts = parts.max(1).min(n.max(1));
        let base = n / parts;
        let extra = n % parts;
        let mut ranges = Vec::with_capacity(parts);
        let mut start = 0;
        for p in 0..parts {
            let len = base + usize::from(p < extra);
            ranges.push(RowRange {
                start,
                len,
                partition: p,
            });
            start += len;
        }
        debug_assert_eq!(start, n);
        PartitionMap { ranges }
    }

    pub fn ranges(&self) -> &[RowRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Partition owning row `i`.
    pub fn partition_of(&self, i: usize) -> usize {
        // Ranges are sorted by start; binary search on start.
        match self.ranges.binary_search_by(|r| r.start.cmp(&i)) {
            Ok(p) => self.ranges[p].partition,
            Err(p) => self.ranges[p - 1].partition,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let mut expect = 0usize;
        for (i, r) in self.ranges.iter().enumerate() {
            if r.start != expect || r.partition != i {
                return Err(Error::usage("partition map must be sorted and contiguous"));
            }
            expect += r.len;
        }
        if expect != n {
            return Err(Error::usage(format!(
                "partition map covers {expect} rows, matrix has {n}"
            )));
        }
        Ok(())
    }
}

/// Dense n x d row-major matrix of 64-bit floats, immutable after
/// construction and safe for concurrent reads.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    partitions: PartitionMap,
}

impl DataMatrix {
    /// Builds a matrix over `values` (row-major, length `n * d`) with a
    /// single partition. Rejects NaN and infinite entries.
    pub fn new(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        Self::with_partitions(values, n, d, 1)
    }

    /// Builds a matrix partitioned into `parts` contiguous row ranges.
    pub fn with_partitions(values: Vec<f64>, n: usize, d: usize, parts: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::usage("matrix dimensions must be at least 1 x 1"));
        }
        if values.len() != n * d {
            return Err(Error::format(format!(
                "expected {} values for a {n} x {d} matrix, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        let partitions = PartitionMap::even(n, parts);
        partitions.validate(n)?;
        Ok(DataMatrix {
            n,
            d,
            values,
            partitions,
        })
    }

    /// Same matrix with its rows re-grouped into `parts` partitions.
    pub fn repartitioned(mut self, parts: usize) -> Self {
        self.partitions = PartitionMap::even(self.n, parts);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn partition_map(&self) -> &PartitionMap {
        &self.partitions
    }
}

/// Current and previous centroids with membership counts and per-centroid
/// drift `f(c) = d(current[c], previous[c])`.
#[derive(Debug, Clone)]
pub struct CentroidSet {
    k: usize,
    d: usize,
    current: Vec<f64>,
    previous: Vec<f64>,
    counts: Vec<u64>,
    drift: Vec<f64>,
}

impl CentroidSet {
    pub fn new(k: usize, d: usize) -> Self {
        CentroidSet {
            k,
            d,
            current: vec![0.0; k * d],
            previous: vec![0.0; k * d],
            counts: vec![0; k],
            drift: vec![0.0; k],
        }
    }

    /// Seeds centroids from `k * d` row-major values.
    pub fn from_values(values: Vec<f64>, k: usize, d: usize) -> Result<Self> {
        if values.len() != k * d {
            return Err(Error::usage(format!(
                "expected {} centroid values, got {}",
                k * d,
                values.len()
            )));
        }
        let previous = values.clone();
        Ok(CentroidSet {
            k,
            d,
            current: values,
            previous,
            counts: vec![0; k],
            drift: vec![0.0; k],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.current[c * self.d..(c + 1) * self.d]
    }

    pub fn centroid_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.current[c * self.d..(c + 1) * self.d]
    }

    pub fn previous(&self, c: usize) -> &[f64] {
        &self.previous[c * self.d..(c + 1) * self.d]
    }

    pub fn current_values(&self) -> &[f64] {
        &self.current
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    /// Copies current centroids into the previous slots; call before an
    /// update so drift can be measured afterwards.
    pub fn snapshot_previous(&mut self) {
        self.previous.copy_from_slice(&self.current);
    }

    /// Recomputes `drift[c] = d(current[c], previous[c])` for every centroid.
    pub fn refresh_drift(&mut self) {
        for c in 0..self.k {
            self.drift[c] = euclidean(
                &self.current[c * self.d..(c + 1) * self.d],
                &self.previous[c * self.d..(c + 1) * self.d],
            );
        }
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }

    /// Exact auxiliary bytes held by this structure.
    pub fn aux_bytes(&self) -> u64 {
        (self.current.len() * 8 + self.previous.len() * 8 + self.counts.len() * 8
            + self.drift.len() * 8) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_map_covers_rows_exactly() {
        let pm = PartitionMap::even(10, 4);
        assert_eq!(pm.len(), 4);
        let lens: Vec<usize> = pm.ranges().iter().map(|r| r.len).collect();
        assert_eq!(lens, vec![3, 3, 2, 2]);
        assert_eq!(pm.ranges()[0].start, 0);
        assert_eq!(pm.ranges()[3].start, 8);
        assert_eq!(pm.partition_of(0), 0);
        assert_eq!(pm.partition_of(2), 0);
        assert_eq!(pm.partition_of(3), 1);
        assert_eq!(pm.partition_of(9), 3);
    }

    #[test]
    fn partition_map_more_parts_than_rows() {
        let pm = PartitionMap::even(2, 8);
        assert_eq!(pm.len(), 2);
    }

    #[test]
    fn matrix_rejects_nan() {
        let err = DataMatrix::new(vec![1.0, f64::NAN, 3.0, 4.0], 2, 2).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn matrix_rejects_size_mismatch() {
        let err = DataMatrix::new(vec![1.0, 2.0, 3.0], 2, 2).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn matrix_rejects_empty() {
        assert!(DataMatrix::new(vec![], 0, 3).is_err());
    }

    #[test]
    fn row_access() {
        let m = DataMatrix::new(vec![1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        assert_eq!(m.row(0), &[1.0, 2.0]);
        assert_eq!(m.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn drift_zero_iff_unchanged() {
        let mut c = CentroidSet::from_values(vec![1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        c.snapshot_previous();
        c.refresh_drift();
        assert_eq!(c.drift(), &[0.0, 0.0]);
        c.centroid_mut(1)[0] += 3.0;
        c.refresh_drift();
        assert_eq!(c.drift()[0], 0.0);
        assert_eq!(c.drift()[1], 3.0);
    }
}
