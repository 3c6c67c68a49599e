//! Partitioned row cache with lazy and LRU update modes.
//!
//! The cache is split into one slice per locality partition so population
//! never contends across partitions. In lazy mode the contents change only
//! at refresh iterations (flush, then repopulate from the rows active at
//! that iteration) and stay static in between; refresh gaps double
//! (`I, 3I, 7I, 15I, ...`). In LRU mode every miss is inserted and the
//! least recently used rows are evicted.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    Lazy,
    Lru,
}

/// Row ids that requested their data during one iteration.
#[derive(Debug, Clone, Default)]
pub struct ActivationTrace {
    pub iter: u32,
    pub active: Vec<u32>,
}

/// True exactly at iterations `(2^j - 1) * icache` for `j >= 1`
/// (`icache, 3*icache, 7*icache, ...`), so the gap after the j-th refresh
/// is `2^j * icache`.
pub fn refresh_due(iter: u32, icache: u32) -> bool {
    if icache == 0 || iter == 0 || !iter.is_multiple_of(icache) {
        return false;
    }
    let q = iter / icache;
    q >= 1 && (q + 1).is_power_of_two()
}

/// Rows collected during a refresh iteration, per partition.
type PendingRows = Vec<(u32, Box<[f64]>)>;

const NIL: usize = usize::MAX;

struct Slot {
    id: u32,
    data: Box<[f64]>,
    prev: usize,
    next: usize,
}

/// One partition's entries plus an intrusive LRU list over the slot arena.
struct CachePart {
    map: HashMap<u32, usize>,
    slots: Vec<Slot>,
    free: Vec<usize>,
    head: usize,
    tail: usize,
    bytes: usize,
}

impl CachePart {
    fn new() -> Self {
        CachePart {
            map: HashMap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
            bytes: 0,
        }
    }

    fn unlink(&mut self, s: usize) {
        let (prev, next) = (self.slots[s].prev, self.slots[s].next);
        if prev != NIL {
            self.slots[prev].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.slots[next].prev = prev;
        } else {
            self.tail = prev;
        }
    }

    fn push_front(&mut self, s: usize) {
        self.slots[s].prev = NIL;
        self.slots[s].next = self.head;
        if self.head != NIL {
            self.slots[self.head].prev = s;
        }
        self.head = s;
        if self.tail == NIL {
            self.tail = s;
        }
    }

    fn get(&mut self, id: u32, touch: bool, out: &mut [f64]) -> bool {
        match self.map.get(&id) {
            Some(&s) => {
                out.copy_from_slice(&self.slots[s].data);
                if touch {
                    self.unlink(s);
                    self.push_front(s);
                }
                true
            }
            None => false,
        }
    }

    fn insert(&mut self, id: u32, data: &[f64], row_bytes: usize, quota: usize) {
        if row_bytes > quota || self.map.contains_key(&id) {
            return;
        }
        while self.bytes + row_bytes > quota {
            let victim = self.tail;
            debug_assert_ne!(victim, NIL);
            self.unlink(victim);
            self.map.remove(&self.slots[victim].id);
            self.bytes -= self.slots[victim].data.len() * 8;
            self.free.push(victim);
        }
        let s = match self.free.pop() {
            Some(s) => {
                self.slots[s].id = id;
                self.slots[s].data = data.into();
                s
            }
            None => {
                self.slots.push(Slot {
                    id,
                    data: data.into(),
                    prev: NIL,
                    next: NIL,
                });
                self.slots.len() - 1
            }
        };
        self.map.insert(id, s);
        self.push_front(s);
        self.bytes += row_bytes;
    }

    fn flush(&mut self) {
        self.map.clear();
        self.slots.clear();
        self.free.clear();
        self.head = NIL;
        self.tail = NIL;
        self.bytes = 0;
    }
}

/// The partitioned row cache. Lookups may come from any worker; writes are
/// serialized per partition (and in lazy mode happen only between
/// iterations, while workers are quiescent).
pub struct RowCache {
    mode: CacheMode,
    capacity: usize,
    quota: usize,
    icache: u32,
    row_bytes: usize,
    parts: Vec<Mutex<CachePart>>,
    refreshing: AtomicBool,
    pending: Vec<Mutex<PendingRows>>,
}

impl RowCache {
    pub fn new(mode: CacheMode, capacity_bytes: usize, icache: u32, partitions: usize, d: usize) -> Self {
        let partitions = partitions.max(1);
        RowCache {
            mode,
            capacity: capacity_bytes,
            quota: capacity_bytes / partitions,
            icache,
            row_bytes: d * 8,
            parts: (0..partitions).map(|_| Mutex::new(CachePart::new())).collect(),
            refreshing: AtomicBool::new(false),
            pending: (0..partitions).map(|_| Mutex::new(Vec::new())).collect(),
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn icache(&self) -> u32 {
        self.icache
    }

    pub fn partitions(&self) -> usize {
        self.parts.len()
    }

    /// Copies row `id` into `out` if cached. LRU mode refreshes recency.
    pub fn get(&self, partition: usize, id: u32, out: &mut [f64]) -> bool {
        let touch = self.mode == CacheMode::Lru;
        self.parts[partition].lock().unwrap().get(id, touch, out)
    }

    /// Offers a freshly-read row for caching. In LRU mode it is inserted
    /// immediately (evicting stale rows); in lazy mode it is recorded only
    /// while a refresh iteration is in progress and applied at the next
    /// [`RowCache::finish_refresh`].
    pub fn offer(&self, partition: usize, id: u32, data: &[f64]) {
        match self.mode {
            CacheMode::Lru => {
                self.parts[partition]
                    .lock()
                    .unwrap()
                    .insert(id, data, self.row_bytes, self.quota);
            }
            CacheMode::Lazy => {
                if self.refreshing.load(Ordering::Acquire) {
                    self.pending[partition]
                        .lock()
                        .unwrap()
                        .push((id, data.into()));
                }
            }
        }
    }

    /// Starts a lazy refresh iteration: flushes every partition and begins
    /// collecting the iteration's active rows.
    pub fn begin_refresh(&self) {
        for p in &self.parts {
            p.lock().unwrap().flush();
        }
        for p in &self.pending {
            p.lock().unwrap().clear();
        }
        self.refreshing.store(true, Ordering::Release);
    }

    pub fn is_refreshing(&self) -> bool {
        self.refreshing.load(Ordering::Acquire)
    }

    /// Ends a lazy refresh iteration: repopulates each partition from the
    /// rows collected during the iteration, lowest row ids first, until
    /// the partition quota is filled.
    pub fn finish_refresh(&self) {
        for (part, pending) in self.parts.iter().zip(&self.pending) {
            let mut rows = std::mem::take(&mut *pending.lock().unwrap());
            rows.sort_unstable_by_key(|(id, _)| *id);
            rows.dedup_by_key(|(id, _)| *id);
            let mut part = part.lock().unwrap();
            for (id, data) in rows {
                if part.bytes + self.row_bytes > self.quota {
                    break;
                }
                part.insert(id, &data, self.row_bytes, self.quota);
            }
        }
        self.refreshing.store(false, Ordering::Release);
    }

    /// Flush-and-repopulate in one step from an activation trace, taking
    /// row data from `fetch` and `partition_of` to place each row.
    pub fn refresh(
        &self,
        trace: &ActivationTrace,
        partition_of: impl Fn(u32) -> usize,
        mut fetch: impl FnMut(u32) -> Box<[f64]>,
    ) {
        self.begin_refresh();
        let mut ids = trace.active.clone();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            let data = fetch(id);
            self.pending[partition_of(id)]
                .lock()
                .unwrap()
                .push((id, data));
        }
        self.finish_refresh();
    }

    pub fn bytes_cached(&self) -> usize {
        self.parts.iter().map(|p| p.lock().unwrap().bytes).sum()
    }

    /// Sorted key set per partition, for staticity checks.
    pub fn key_snapshot(&self) -> Vec<Vec<u32>> {
        self.parts
            .iter()
            .map(|p| {
                let mut keys: Vec<u32> = p.lock().unwrap().map.keys().copied().collect();
                keys.sort_unstable();
                keys
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refresh_schedule_doubles_gaps() {
        let due: Vec<u32> = (1..=120).filter(|&t| refresh_due(t, 5)).collect();
        assert_eq!(due, vec![5, 15, 35, 75]);
        assert!(!refresh_due(10, 5));
        assert!(!refresh_due(0, 5));
        let gaps: Vec<u32> = due.windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(gaps, vec![10, 20, 40]);
    }

    #[test]
    fn zero_capacity_stays_empty() {
        let cache = RowCache::new(CacheMode::Lru, 0, 5, 2, 4);
        cache.offer(0, 7, &[1.0; 4]);
        let mut out = [0.0; 4];
        assert!(!cache.get(0, 7, &mut out));
        assert_eq!(cache.bytes_cached(), 0);
    }

    #[test]
    fn lru_evicts_least_recently_used() {
        // Quota of 2 rows (d=4 -> 32 bytes per row; capacity 64, 1 part).
        let cache = RowCache::new(CacheMode::Lru, 64, 5, 1, 4);
        cache.offer(0, 1, &[1.0; 4]);
        cache.offer(0, 2, &[2.0; 4]);
        let mut out = [0.0; 4];
        assert!(cache.get(0, 1, &mut out)); // 1 is now most recent
        cache.offer(0, 3, &[3.0; 4]); // evicts 2
        assert!(cache.get(0, 1, &mut out));
        assert!(!cache.get(0, 2, &mut out));
        assert!(cache.get(0, 3, &mut out));
    }

    #[test]
    fn lazy_ignores_offers_outside_refresh() {
        let cache = RowCache::new(CacheMode::Lazy, 1024, 5, 1, 4);
        cache.offer(0, 1, &[1.0; 4]);
        let mut out = [0.0; 4];
        assert!(!cache.get(0, 1, &mut out));
    }

    #[test]
    fn lazy_refresh_repopulates_lowest_ids_first() {
        // Quota 2 rows in one partition; three active rows -> ids 1, 2 win.
        let cache = RowCache::new(CacheMode::Lazy, 64, 5, 1, 4);
        let trace = ActivationTrace {
            iter: 5,
            active: vec![9, 2, 1],
        };
        cache.refresh(&trace, |_| 0, |id| vec![id as f64; 4].into_boxed_slice());
        assert_eq!(cache.key_snapshot(), vec![vec![1, 2]]);
        let mut out = [0.0; 4];
        assert!(cache.get(0, 1, &mut out));
        assert_eq!(out, [1.0; 4]);
        assert!(!cache.get(0, 9, &mut out));
    }

    #[test]
    fn full_capacity_refresh_hits_every_repeat() {
        let cache = RowCache::new(CacheMode::Lazy, 4096, 5, 2, 4);
        let trace = ActivationTrace {
            iter: 5,
            active: (0..32).collect(),
        };
        cache.refresh(&trace, |id| (id % 2) as usize, |id| {
            vec![id as f64; 4].into_boxed_slice()
        });
        let mut out = [0.0; 4];
        for id in 0..32 {
            assert!(cache.get((id % 2) as usize, id, &mut out), "row {id}");
        }
    }
}
