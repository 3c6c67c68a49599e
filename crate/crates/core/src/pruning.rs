//! Lossless distance-computation pruning.
//!
//! Two exact pruning schemes over the same upper-bound machinery:
//!
//! - **MTI** keeps one upper bound per point plus the k x k centroid
//!   geometry (`O(n + k^2)` auxiliary memory). Clause 1 keeps a point in
//!   its cluster with zero distance computations (and zero I/O in SEM
//!   mode); on failure the bound is tightened once and remaining
//!   candidates are screened against half the inter-centroid distance.
//! - **TI** (the Elkan baseline) additionally keeps an n x k lower-bound
//!   matrix, pruning more distance computations at `O(nk)` memory and
//!   per-iteration maintenance cost.
//!
//! Both schemes assign every point to its exact nearest centroid (ties to
//! the lowest index), so enabling them never changes results.

use crate::dist::euclidean;
use crate::engine::RowShards;
use crate::matrix::CentroidSet;
use crate::metrics::TaskStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneMode {
    None,
    Mti,
    Ti,
}

/// Inter-centroid distances and per-centroid safe radii
/// `s[c] = min_{c' != c} d(c, c') / 2`.
#[derive(Debug, Clone, Default)]
pub struct Geometry {
    pub cdist: Vec<f64>,
    pub s: Vec<f64>,
    k: usize,
}

impl Geometry {
    pub fn new(k: usize) -> Self {
        Geometry {
            cdist: vec![0.0; k * k],
            s: vec![f64::INFINITY; k],
            k,
        }
    }

    #[inline]
    pub fn cdist_between(&self, a: usize, b: usize) -> f64 {
        self.cdist[a * self.k + b]
    }

    /// Recomputes the full geometry; returns the number of centroid pair
    /// distances evaluated (maintenance work, not point-centroid counts).
    pub fn update(&mut self, cents: &CentroidSet) -> u64 {
        let k = cents.k();
        debug_assert_eq!(k, self.k);
        for a in 0..k {
            self.cdist[a * k + a] = 0.0;
            for b in (a + 1)..k {
                let d = euclidean(cents.centroid(a), cents.centroid(b));
                self.cdist[a * k + b] = d;
                self.cdist[b * k + a] = d;
            }
        }
        for c in 0..k {
            let mut m = f64::INFINITY;
            for o in 0..k {
                if o != c {
                    m = m.min(self.cdist[c * k + o]);
                }
            }
            self.s[c] = 0.5 * m; // s stays +inf for k == 1
        }
        (k * (k - 1) / 2) as u64
    }
}

/// Computes `(cdist, s)` for a centroid set in one call.
pub fn update_centroid_geometry(cents: &CentroidSet) -> Geometry {
    let mut geo = Geometry::new(cents.k());
    geo.update(cents);
    geo
}

/// Clause 1: the point keeps its cluster, no distances computed.
#[inline]
pub fn clause1_keeps(u: f64, s_assigned: f64) -> bool {
    u <= s_assigned
}

/// Inflates upper bounds by each point's assigned-centroid drift,
/// preserving soundness by the triangle inequality.
pub fn inflate_bounds(u: &mut [f64], assign: &[u32], drift: &[f64]) {
    for (ui, &a) in u.iter_mut().zip(assign) {
        *ui += drift[a as usize];
    }
}

/// Exhaustive scan: computes all `k` distances, ties to the lowest index.
/// Returns `(assignment, distance)`.
#[inline]
pub fn scan_all(v: &[f64], cents: &CentroidSet, stats: &mut TaskStats) -> (u32, f64) {
    let s = scan_full(v, cents, None, stats);
    (s.best, s.best_d)
}

/// Result of an exhaustive scan with the runner-up distance.
#[derive(Debug, Clone, Copy)]
pub struct FullScan {
    pub best: u32,
    pub best_d: f64,
    /// Distance to the second-nearest centroid (infinity for k = 1);
    /// `second_d - best_d` is the point's assignment margin.
    pub second_d: f64,
}

/// Exhaustive scan that also tracks the runner-up and, when a lower-bound
/// row is supplied, seeds it with every computed distance (the TI cold
/// start).
pub fn scan_full(
    v: &[f64],
    cents: &CentroidSet,
    mut lower: Option<&mut [f64]>,
    stats: &mut TaskStats,
) -> FullScan {
    let mut best = 0u32;
    let mut best_d = f64::INFINITY;
    let mut second_d = f64::INFINITY;
    for c in 0..cents.k() {
        let d = euclidean(v, cents.centroid(c));
        stats.dist_comps += 1;
        if let Some(row) = lower.as_deref_mut() {
            row[c] = d;
        }
        if d < best_d {
            second_d = best_d;
            best_d = d;
            best = c as u32;
        } else if d < second_d {
            second_d = d;
        }
    }
    FullScan {
        best,
        best_d,
        second_d,
    }
}

/// MTI scan after a clause-1 failure: tightens the bound once, then
/// screens every other centroid against half its distance to the current
/// assignment. `u` holds the inflated bound on entry and the exact
/// distance to the returned assignment on exit.
pub fn scan_mti(
    v: &[f64],
    assigned: u32,
    u: &mut f64,
    geo: &Geometry,
    cents: &CentroidSet,
    stats: &mut TaskStats,
) -> u32 {
    let k = cents.k();
    let u_stale = *u;
    let assigned = assigned as usize;
    let mut best = assigned;
    let mut best_d = euclidean(v, cents.centroid(best));
    stats.dist_comps += 1;
    for c in 0..k {
        // The assigned centroid's distance is the tightened bound itself;
        // it can never displace the running best again.
        if c == best || c == assigned {
            continue;
        }
        let half = 0.5 * geo.cdist_between(best, c);
        if best_d <= half {
            if u_stale <= half {
                stats.prune_c2 += 1;
            } else {
                stats.prune_c3 += 1;
            }
            continue;
        }
        let d = euclidean(v, cents.centroid(c));
        stats.dist_comps += 1;
        if d < best_d || (d == best_d && c < best) {
            best_d = d;
            best = c;
        }
    }
    *u = best_d;
    best as u32
}

/// Elkan scan after a clause-1 failure: like [`scan_mti`] but candidates
/// are additionally screened against per-centroid lower bounds, and the
/// tightening itself is skipped while no candidate survives the stale
/// screen. Computed distances refresh `lower`.
pub fn scan_ti(
    v: &[f64],
    assigned: u32,
    u: &mut f64,
    lower: &mut [f64],
    geo: &Geometry,
    cents: &CentroidSet,
    stats: &mut TaskStats,
) -> u32 {
    let k = cents.k();
    let assigned = assigned as usize;
    let mut best = assigned;
    let mut best_d = *u; // stale until tightened
    let mut tight = false;
    for c in 0..k {
        if c == best || c == assigned {
            continue;
        }
        let half = 0.5 * geo.cdist_between(best, c);
        if best_d <= half.max(lower[c]) {
            if tight {
                stats.prune_c3 += 1;
            } else {
                stats.prune_c2 += 1;
            }
            continue;
        }
        if !tight {
            best_d = euclidean(v, cents.centroid(best));
            stats.dist_comps += 1;
            lower[best] = best_d;
            tight = true;
            if best_d <= half.max(lower[c]) {
                stats.prune_c3 += 1;
                continue;
            }
        }
        let d = euclidean(v, cents.centroid(c));
        stats.dist_comps += 1;
        lower[c] = d;
        if d < best_d || (d == best_d && c < best) {
            best_d = d;
            best = c;
        }
    }
    if !tight {
        // Every candidate was screened out by bounds alone; the point
        // provably keeps its assignment and u keeps its inflated value.
        return assigned as u32;
    }
    *u = best_d;
    best as u32
}

/// Outcome of a full per-point MTI step including clause 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointOutcome {
    /// Kept by clause 1; zero distance computations, no data needed.
    KeptByClause1,
    Assigned(u32),
}

/// Full per-point MTI step: clause 1, then the candidate scan.
pub fn assign_point_mti(
    v: &[f64],
    assigned: u32,
    u: &mut f64,
    geo: &Geometry,
    cents: &CentroidSet,
    stats: &mut TaskStats,
) -> PointOutcome {
    if clause1_keeps(*u, geo.s[assigned as usize]) {
        stats.prune_c1 += 1;
        return PointOutcome::KeptByClause1;
    }
    PointOutcome::Assigned(scan_mti(v, assigned, u, geo, cents, stats))
}

/// Auxiliary pruning state for one run: upper bounds, and for TI the
/// per-point lower-bound rows. Bound entries are sharded per row and
/// mutated only by the task owning the row.
pub struct BoundState {
    pub mode: PruneMode,
    pub u: RowShards<f64>,
    /// Flat n x k lower bounds (TI only, empty otherwise).
    pub lower: RowShards<f64>,
    pub geo: Geometry,
    n: usize,
    k: usize,
}

impl BoundState {
    pub fn new(mode: PruneMode, n: usize, k: usize) -> Self {
        let (u_len, l_len) = match mode {
            PruneMode::None => (0, 0),
            PruneMode::Mti => (n, 0),
            PruneMode::Ti => (n, n * k),
        };
        BoundState {
            mode,
            u: RowShards::new(vec![f64::INFINITY; u_len]),
            lower: RowShards::new(vec![0.0; l_len]),
            geo: Geometry::new(k),
            n,
            k,
        }
    }

    /// Exact auxiliary allocation in bytes for a given thread count
    /// (per-thread counter blocks included, the data matrix excluded).
    pub fn aux_bytes(&self, threads: usize) -> u64 {
        measure_aux_memory(self.mode, self.n, self.k, threads)
    }
}

/// Allocation-formula auxiliary memory of a pruning state: assignments,
/// upper bounds, centroid geometry, lower-bound matrix (TI), and one
/// counter block per thread.
pub fn measure_aux_memory(mode: PruneMode, n: usize, k: usize, threads: usize) -> u64 {
    let assign = 4 * n as u64;
    let counters = (threads as u64) * std::mem::size_of::<TaskStats>() as u64;
    match mode {
        PruneMode::None => assign + counters,
        PruneMode::Mti => assign + 8 * n as u64 + 8 * (k * k) as u64 + 8 * k as u64 + counters,
        PruneMode::Ti => {
            assign
                + 8 * n as u64
                + 8 * (k * k) as u64
                + 8 * k as u64
                + 8 * (n * k) as u64
                + counters
        }
    }
}
