//! Semi-external-memory mode: the data matrix lives on disk while
//! algorithm state stays in memory. Rows are served through the
//! partitioned row cache; requests and page-granular reads are both
//! counted so I/O savings can be measured.

pub mod cache;
pub mod store;

pub use cache::{refresh_due, ActivationTrace, CacheMode, RowCache};
pub use store::{RowStore, StoreTotals, DEFAULT_PAGE_BYTES};

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::PartitionMap;
use crate::metrics::TaskStats;

/// Settings for opening a [`SemMatrix`].
#[derive(Debug, Clone, Copy)]
pub struct SemConfig {
    pub cache_mode: CacheMode,
    pub cache_bytes: usize,
    pub icache: u32,
    pub page_bytes: usize,
}

impl Default for SemConfig {
    fn default() -> Self {
        SemConfig {
            cache_mode: CacheMode::Lazy,
            cache_bytes: 64 << 20,
            icache: 5,
            page_bytes: DEFAULT_PAGE_BYTES,
        }
    }
}

/// A matrix whose row data lives in a [`RowStore`] on disk, fronted by a
/// [`RowCache`] partitioned like the row space.
pub struct SemMatrix {
    store: RowStore,
    cache: RowCache,
    partitions: PartitionMap,
}

impl SemMatrix {
    pub fn open(path: &Path, n: usize, d: usize, parts: usize, cfg: &SemConfig) -> Result<Self> {
        let store = RowStore::open(path, n, d, cfg.page_bytes)?;
        let partitions = PartitionMap::even(n, parts);
        let cache = RowCache::new(cfg.cache_mode, cfg.cache_bytes, cfg.icache, partitions.len(), d);
        Ok(SemMatrix {
            store,
            cache,
            partitions,
        })
    }

    pub fn n(&self) -> usize {
        self.store.n()
    }

    pub fn d(&self) -> usize {
        self.store.d()
    }

    pub fn partition_map(&self) -> &PartitionMap {
        &self.partitions
    }

    pub fn store(&self) -> &RowStore {
        &self.store
    }

    pub fn cache(&self) -> &RowCache {
        &self.cache
    }

    /// Serves the sorted row ids `ids` into `out` (`ids.len() * d` values,
    /// in id order). Each row comes from the cache (hit) or from the store
    /// (miss); misses are read in page-aligned runs with pages counted
    /// once per call. In LRU mode misses are inserted immediately; in lazy
    /// mode they are recorded only during a refresh iteration.
    pub fn request_rows(&self, ids: &[u32], out: &mut Vec<f64>, stats: &mut TaskStats) -> Result<()> {
        let d = self.d();
        out.clear();
        out.resize(ids.len() * d, 0.0);
        if ids.is_empty() {
            return Ok(());
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.n()) {
            return Err(Error::usage(format!(
                "row {bad} out of range for a {} row matrix",
                self.n()
            )));
        }
        stats.rows_req += ids.len() as u64;
        stats.bytes_req += (ids.len() * d * 8) as u64;
        self.store.note_request(ids.len() as u64);

        let mut miss_ids: Vec<u32> = Vec::new();
        let mut miss_pos: Vec<usize> = Vec::new();
        for (pos, &id) in ids.iter().enumerate() {
            let part = self.partitions.partition_of(id as usize);
            let slot = &mut out[pos * d..(pos + 1) * d];
            if self.cache.get(part, id, slot) {
                stats.cache_hits += 1;
            } else {
                stats.cache_misses += 1;
                miss_ids.push(id);
                miss_pos.push(pos);
            }
        }

        if !miss_ids.is_empty() {
            let (_, bytes) = self.store.read_rows(&miss_ids, |mpos, row| {
                let pos = miss_pos[mpos];
                out[pos * d..(pos + 1) * d].copy_from_slice(row);
                let id = miss_ids[mpos];
                let part = self.partitions.partition_of(id as usize);
                self.cache.offer(part, id, row);
            })?;
            stats.bytes_read += bytes;
        }
        Ok(())
    }

    /// Starts iteration `iter`: flushes the lazy cache when a refresh is due.
    pub fn begin_iteration(&self, iter: u32) {
        if self.cache.mode() == CacheMode::Lazy && refresh_due(iter, self.cache.icache()) {
            self.cache.begin_refresh();
        }
    }

    /// Ends the iteration: applies a pending lazy repopulation, if any.
    pub fn end_iteration(&self) {
        if self.cache.is_refreshing() {
            self.cache.finish_refresh();
        }
    }
}
