//! File-backed row store with request-vs-read accounting.
//!
//! The backing file is the crate's binary matrix format: row `i` occupies
//! bytes `[i*d*8, (i+1)*d*8)`. Reads happen at page granularity (default
//! 4 KB), so serving scattered rows reads more bytes than requested; both
//! quantities are counted.

use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub const DEFAULT_PAGE_BYTES: usize = 4096;

#[derive(Debug, Default)]
struct StoreCounters {
    rows_requested: AtomicU64,
    bytes_requested: AtomicU64,
    pages_read: AtomicU64,
    bytes_read: AtomicU64,
}

/// Read-only row store over an on-disk matrix. Safe for concurrent reads.
#[derive(Debug)]
pub struct RowStore {
    file: File,
    path: PathBuf,
    n: usize,
    d: usize,
    page_bytes: usize,
    counters: StoreCounters,
}

/// Cumulative I/O totals of a store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreTotals {
    pub rows_requested: u64,
    pub bytes_requested: u64,
    pub pages_read: u64,
    pub bytes_read: u64,
}

impl RowStore {
    pub fn open(path: &Path, n: usize, d: usize, page_bytes: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::usage("row store dimensions must be at least 1 x 1"));
        }
        if page_bytes == 0 {
            return Err(Error::usage("page size must be positive"));
        }
        let file = File::open(path)?;
        let expect = (n * d * 8) as u64;
        let len = file.metadata()?.len();
        if len != expect {
            return Err(Error::format(format!(
                "{} is {len} bytes, expected {expect} for a {n} x {d} row store",
                path.display()
            )));
        }
        Ok(RowStore {
            file,
            path: path.to_path_buf(),
            n,
            d,
            page_bytes,
            counters: StoreCounters::default(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn page_bytes(&self) -> usize {
        self.page_bytes
    }

    pub fn row_bytes(&self) -> usize {
        self.d * 8
    }

    pub fn totals(&self) -> StoreTotals {
        StoreTotals {
            rows_requested: self.counters.rows_requested.load(Ordering::Relaxed),
            bytes_requested: self.counters.bytes_requested.load(Ordering::Relaxed),
            pages_read: self.counters.pages_read.load(Ordering::Relaxed),
            bytes_read: self.counters.bytes_read.load(Ordering::Relaxed),
        }
    }

    /// Counts a batch of row requests (cache hits and misses alike).
    pub fn note_request(&self, rows: u64) {
        self.counters
            .rows_requested
            .fetch_add(rows, Ordering::Relaxed);
        self.counters
            .bytes_requested
            .fetch_add(rows * self.row_bytes() as u64, Ordering::Relaxed);
    }

    /// Reads the rows `ids` (sorted ascending, unique) from disk,
    /// delivering each as `(position_in_ids, values)`. Touched pages are
    /// counted once per call and fetched in contiguous runs; accounting is
    /// `bytes_read = pages * page_bytes`. Returns `(pages, bytes_read)`.
    pub fn read_rows(
        &self,
        ids: &[u32],
        mut sink: impl FnMut(usize, &[f64]),
    ) -> Result<(u64, u64)> {
        if ids.is_empty() {
            return Ok((0, 0));
        }
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]), "ids must be sorted");
        let rowb = self.row_bytes();
        let page = self.page_bytes as u64;
        let file_len = (self.n * rowb) as u64;

        // Merge the pages of consecutive rows into contiguous page runs;
        // a row's pages always land in a single run.
        let mut runs: Vec<(u64, u64)> = Vec::new(); // inclusive page spans
        for &id in ids {
            let id = id as usize;
            if id >= self.n {
                return Err(Error::usage(format!(
                    "row {id} out of range for store of {} rows",
                    self.n
                )));
            }
            let first = (id * rowb) as u64 / page;
            let last = ((id + 1) * rowb - 1) as u64 / page;
            match runs.last_mut() {
                Some(run) if first <= run.1 + 1 => run.1 = run.1.max(last),
                _ => runs.push((first, last)),
            }
        }
        let pages: u64 = runs.iter().map(|(a, b)| b - a + 1).sum();
        let bytes_read = pages * page;
        self.counters.pages_read.fetch_add(pages, Ordering::Relaxed);
        self.counters
            .bytes_read
            .fetch_add(bytes_read, Ordering::Relaxed);

        let mut buf: Vec<u8> = Vec::new();
        let mut row = vec![0.0f64; self.d];
        let mut pos = 0usize;
        for &(first, last) in &runs {
            let run_start = first * page;
            let run_end = ((last + 1) * page).min(file_len);
            buf.resize((run_end - run_start) as usize, 0);
            self.file.read_exact_at(&mut buf, run_start)?;
            while pos < ids.len() {
                let start = ids[pos] as u64 * rowb as u64;
                if start >= run_end {
                    break;
                }
                let off = (start - run_start) as usize;
                for (j, chunk) in buf[off..off + rowb].chunks_exact(8).enumerate() {
                    row[j] = f64::from_le_bytes(chunk.try_into().unwrap());
                }
                sink(pos, &row);
                pos += 1;
            }
        }
        debug_assert_eq!(pos, ids.len());
        Ok((pages, bytes_read))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::save_values;

    fn store_with(n: usize, d: usize, page: usize) -> (tempfile::TempDir, RowStore) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.bin");
        let values: Vec<f64> = (0..n * d).map(|v| v as f64).collect();
        save_values(&path, &values).unwrap();
        let store = RowStore::open(&path, n, d, page).unwrap();
        (dir, store)
    }

    #[test]
    fn two_rows_one_page() {
        // d=8 rows are 64 bytes; rows 0 and 1 share the first 4 KB page.
        let (_dir, store) = store_with(128, 8, 4096);
        store.note_request(2);
        let mut got = Vec::new();
        let (pages, bytes) = store
            .read_rows(&[0, 1], |pos, row| got.push((pos, row[0])))
            .unwrap();
        assert_eq!(pages, 1);
        assert_eq!(bytes, 4096);
        assert_eq!(got, vec![(0, 0.0), (1, 8.0)]);
        let t = store.totals();
        assert_eq!(t.bytes_requested, 2 * 8 * 8);
        assert_eq!(t.bytes_read, 4096);
    }

    #[test]
    fn scattered_rows_touch_separate_pages() {
        let (_dir, store) = store_with(1024, 8, 4096);
        // Rows 0 and 512: pages 0 and 8.
        let (pages, bytes) = store.read_rows(&[0, 512], |_, _| {}).unwrap();
        assert_eq!(pages, 2);
        assert_eq!(bytes, 2 * 4096);
    }

    #[test]
    fn row_straddling_pages_is_read_whole() {
        // d=3 rows are 24 bytes; with 32-byte pages row 1 spans pages 0-1.
        let (_dir, store) = store_with(8, 3, 32);
        let mut vals = Vec::new();
        let (pages, _) = store
            .read_rows(&[1], |_, row| vals.extend_from_slice(row))
            .unwrap();
        assert_eq!(pages, 2);
        assert_eq!(vals, vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn out_of_range_is_usage_error() {
        let (_dir, store) = store_with(4, 2, 4096);
        assert!(store.read_rows(&[4], |_, _| {}).is_err());
    }

    #[test]
    fn wrong_size_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.bin");
        save_values(&path, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            RowStore::open(&path, 2, 2, 4096),
            Err(Error::Format(_))
        ));
    }
}
