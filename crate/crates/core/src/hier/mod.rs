//! Iterative divisive hierarchical clustering (H-means, X-means, G-means).
//!
//! The engine is iterative rather than recursive: every inner 2-means
//! round runs over contiguous row blocks spanning *all* splitting leaves
//! at once, accumulating into per-task per-leaf slots. Rows are never
//! shuffled; a point's leaf lives in the leading 32 bits of its 64-bit
//! key and its row index in the trailing bits. Cluster spawning at a
//! partitioning step only rewrites that membership metadata.

pub mod split;

pub use split::{
    ad_corrected, ad_critical_value, anderson_darling_a2, anderson_darling_decision,
    bic_one_center, bic_two_center, split_decision_bic,
};

use std::collections::HashMap;

use crate::dist::{euclidean, squared_euclidean};
use crate::engine::{
    build_tasks, ActiveSet, EngineConfig, FetchBuf, RowShards, Source, Task, TaskQueue, TaskRows,
    WorkerPool,
};
use crate::error::{Error, Result};
use crate::matrix::PartitionMap;
use crate::metrics::{IterationMetrics, TaskStats};

#[inline]
pub fn make_key(leaf: u32, row: u32) -> u64 {
    ((leaf as u64) << 32) | row as u64
}

#[inline]
pub fn key_leaf(key: u64) -> u32 {
    (key >> 32) as u32
}

#[inline]
pub fn key_row(key: u64) -> u32 {
    key as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    /// A leaf that may still split.
    Active,
    /// A leaf whose membership is frozen (split declined or cap reached).
    Converged,
    /// An interior node replaced by its children.
    Parent,
}

#[derive(Debug, Clone)]
pub struct HNode {
    pub id: u32,
    pub parent: Option<u32>,
    pub centroid: Vec<f64>,
    pub count: u64,
    pub level: u32,
    pub state: NodeState,
}

/// Binary forest over cluster ids; node ids are indexes into `nodes`.
#[derive(Debug, Clone, Default)]
pub struct HTree {
    pub nodes: Vec<HNode>,
}

impl HTree {
    pub fn leaf_ids(&self) -> Vec<u32> {
        self.nodes
            .iter()
            .filter(|n| n.state != NodeState::Parent)
            .map(|n| n.id)
            .collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.state != NodeState::Parent)
            .count()
    }

    pub fn active_ids(&self) -> Vec<u32> {
        self.nodes
            .iter()
            .filter(|n| n.state == NodeState::Active)
            .map(|n| n.id)
            .collect()
    }

    /// Replaces a leaf by two children, allocating the next two ids.
    pub fn spawn(
        &mut self,
        parent: u32,
        centroids: [Vec<f64>; 2],
        counts: [u64; 2],
    ) -> Result<(u32, u32)> {
        if self.nodes.len() + 2 > u32::MAX as usize {
            return Err(Error::capacity("node id space exhausted"));
        }
        let level = self.nodes[parent as usize].level + 1;
        let id0 = self.nodes.len() as u32;
        let id1 = id0 + 1;
        let [c0, c1] = centroids;
        self.nodes[parent as usize].state = NodeState::Parent;
        self.nodes.push(HNode {
            id: id0,
            parent: Some(parent),
            centroid: c0,
            count: counts[0],
            level,
            state: NodeState::Active,
        });
        self.nodes.push(HNode {
            id: id1,
            parent: Some(parent),
            centroid: c1,
            count: counts[1],
            level,
            state: NodeState::Active,
        });
        Ok((id0, id1))
    }
}

/// One monotone bit per leaf: set when the leaf may no longer split or
/// move points.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceBitmap {
    bits: Vec<bool>,
}

impl ConvergenceBitmap {
    pub fn set(&mut self, id: u32) {
        if self.bits.len() <= id as usize {
            self.bits.resize(id as usize + 1, false);
        }
        self.bits[id as usize] = true;
    }

    pub fn get(&self, id: u32) -> bool {
        self.bits.get(id as usize).copied().unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HierMethod {
    /// Split every leaf until `lmax` partitioning levels.
    HMeans { lmax: u32 },
    /// Split while the two-center BIC wins, up to `kmax` leaves.
    XMeans { kmax: usize },
    /// Split while the Anderson-Darling test rejects normality at
    /// `alpha`, up to `kmax` leaves.
    GMeans { kmax: usize, alpha: f64 },
}

impl HierMethod {
    fn kmax(&self) -> Option<usize> {
        match self {
            HierMethod::HMeans { .. } => None,
            HierMethod::XMeans { kmax } | HierMethod::GMeans { kmax, .. } => Some(*kmax),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            HierMethod::HMeans { lmax } if lmax < 1 => {
                Err(Error::usage("lmax must be at least 1"))
            }
            HierMethod::XMeans { kmax } if kmax < 1 => {
                Err(Error::usage("kmax must be at least 1"))
            }
            HierMethod::GMeans { kmax, alpha } => {
                if kmax < 1 {
                    return Err(Error::usage("kmax must be at least 1"));
                }
                ad_critical_value(alpha).map(|_| ())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HierParams {
    pub method: HierMethod,
    /// Inner 2-means iterations between partitioning steps.
    pub inner_iters: u32,
}

#[derive(Debug, Clone)]
pub struct HierResult {
    pub tree: HTree,
    pub bitmap: ConvergenceBitmap,
    /// Per-point composite keys (leaf id << 32 | row).
    pub keys: Vec<u64>,
    /// Dense leaf index per point, leaves ordered by ascending node id.
    pub assignments: Vec<u32>,
    /// Node ids of the final leaves, ascending.
    pub leaf_ids: Vec<u32>,
    pub metrics: Vec<IterationMetrics>,
    pub split_rounds: u32,
    pub barriers: u64,
    pub init_stats: TaskStats,
}

/// Per-slot accumulator of the inner 2-means phases.
struct InnerPartial {
    sums: Vec<f64>,   // slots * 2 * d
    counts: Vec<u64>, // slots * 2
    sse: f64,
    reassigned: u64,
    /// Farthest (distance, row) from the assigned child per slot.
    far: Vec<(f64, u64)>,
}

/// Per-slot accumulator of the split-decision phase.
struct DecisionPartial {
    m: Vec<u64>,
    sse_one: Vec<f64>,
    sse_two: Vec<f64>,
    counts: Vec<u64>, // slots * 2
    projections: Vec<Vec<f64>>,
}

struct HierDriver {
    pm: PartitionMap,
    pool: WorkerPool,
    cfg: EngineConfig,
    n: usize,
    metrics: Vec<IterationMetrics>,
    barriers: u64,
    iter: u32,
}

impl HierDriver {
    /// Runs one parallel phase over all rows, merging stats and folding
    /// partials in ascending task order.
    fn phase<P: Send>(
        &mut self,
        objective: f64,
        work: impl Fn(TaskRows<'_>, &mut FetchBuf, &mut TaskStats) -> Result<P> + Sync,
    ) -> Result<Vec<P>> {
        let active = ActiveSet::All { n: self.n };
        let tasks = build_tasks(&self.pm, &active, self.cfg.task_size);
        let queue = TaskQueue::new(
            tasks,
            self.pm.len(),
            self.cfg.threads,
            self.cfg.locality_groups,
            self.cfg.scheduler,
        );
        let started = std::time::Instant::now();
        let work = &work;
        let active_ref = &active;
        let raw = self.pool.run_phase(&queue, |_w| {
            let mut fetch = FetchBuf::default();
            move |task: &Task| {
                let mut stats = TaskStats::default();
                let rows = TaskRows {
                    task,
                    active: active_ref,
                };
                let p = work(rows, &mut fetch, &mut stats);
                (p, stats)
            }
        });
        self.barriers += 1;
        self.iter += 1;
        let mut agg = TaskStats::default();
        let mut out = Vec::with_capacity(raw.len());
        for (p, stats) in raw {
            agg.merge(&stats);
            out.push(p?);
        }
        let mut m = IterationMetrics {
            iter: self.iter,
            objective,
            ..Default::default()
        };
        m.absorb_stats(&agg);
        m.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        m.aux_bytes = (self.n * (8 + 1)) as u64; // keys + child choices
        self.metrics.push(m);
        Ok(out)
    }
}

/// Runs a divisive hierarchical method. Row data is never reordered;
/// leaves spawn by rewriting key metadata between inner 2-means rounds.
pub fn run_hierarchical(
    source: &Source,
    params: &HierParams,
    cfg: &EngineConfig,
) -> Result<HierResult> {
    cfg.validate()?;
    params.method.validate()?;
    if params.inner_iters < 1 {
        return Err(Error::usage("inner iteration cap must be at least 1"));
    }
    let n = source.n();
    let d = source.d();
    if n > u32::MAX as usize {
        return Err(Error::capacity("row ids larger than 32 bits"));
    }
    let pm = source.partition_map().clone();
    if pm.len() != cfg.resolved_partitions() {
        return Err(Error::usage(format!(
            "data is split into {} partitions but the engine expects {}",
            pm.len(),
            cfg.resolved_partitions()
        )));
    }

    // Root: the global mean.
    let mut init_stats = TaskStats::default();
    let mut mean = vec![0.0f64; d];
    source.scan_all(&mut init_stats, |_, row| {
        for j in 0..d {
            mean[j] += row[j];
        }
    })?;
    for x in mean.iter_mut() {
        *x /= n as f64;
    }
    let mut tree = HTree::default();
    tree.nodes.push(HNode {
        id: 0,
        parent: None,
        centroid: mean,
        count: n as u64,
        level: 0,
        state: NodeState::Active,
    });
    let mut bitmap = ConvergenceBitmap::default();
    let keys = RowShards::new((0..n).map(|i| make_key(0, i as u32)).collect());
    let child_of = RowShards::new(vec![0u8; n]);

    let mut driver = HierDriver {
        pm,
        pool: WorkerPool::new(cfg.threads)?,
        cfg: *cfg,
        n,
        metrics: Vec::new(),
        barriers: 0,
        iter: 0,
    };
    let mut split_rounds = 0u32;

    loop {
        // Candidate leaves for this partitioning step.
        let mut candidates = tree.active_ids();
        if let HierMethod::HMeans { lmax } = params.method {
            for &id in &candidates {
                if tree.nodes[id as usize].level >= lmax {
                    tree.nodes[id as usize].state = NodeState::Converged;
                    bitmap.set(id);
                }
            }
            candidates = tree.active_ids();
        }
        if let Some(kmax) = params.method.kmax() {
            if tree.leaf_count() >= kmax {
                for id in candidates.drain(..) {
                    tree.nodes[id as usize].state = NodeState::Converged;
                    bitmap.set(id);
                }
            }
        }
        if candidates.is_empty() {
            break;
        }

        let slot_of: HashMap<u32, usize> = candidates
            .iter()
            .enumerate()
            .map(|(s, &id)| (id, s))
            .collect();
        let slots = candidates.len();
        let leaf_cents: Vec<Vec<f64>> = candidates
            .iter()
            .map(|&id| tree.nodes[id as usize].centroid.clone())
            .collect();

        // Farthest point from each candidate's centroid (split axis).
        let far_partials = driver.phase(0.0, |rows, fetch, stats| {
            fetch.ids.clear();
            let mut row_slots: Vec<usize> = Vec::new();
            for i in rows.iter() {
                let leaf = key_leaf(unsafe { *keys.row_ref(i) });
                if let Some(&s) = slot_of.get(&leaf) {
                    fetch.ids.push(i as u32);
                    row_slots.push(s);
                }
            }
            let block = source.fetch(fetch, stats)?;
            let mut far = vec![(-1.0f64, u64::MAX); slots];
            let mut counts = vec![0u64; slots];
            for (pos, &iu) in block.ids().iter().enumerate() {
                let s = row_slots[pos];
                let dist = euclidean(block.row(iu as usize), &leaf_cents[s]);
                stats.dist_comps += 1;
                counts[s] += 1;
                if dist > far[s].0 || (dist == far[s].0 && (iu as u64) < far[s].1) {
                    far[s] = (dist, iu as u64);
                }
            }
            Ok((far, counts))
        })?;
        let mut far = vec![(-1.0f64, u64::MAX); slots];
        let mut leaf_sizes = vec![0u64; slots];
        for (pf, pc) in far_partials {
            for s in 0..slots {
                let (dist, row) = pf[s];
                if dist > far[s].0 || (dist == far[s].0 && row < far[s].1) {
                    far[s] = (dist, row);
                }
                leaf_sizes[s] += pc[s];
            }
        }

        // Degenerate leaves (single point or all-identical) converge now.
        let mut survivors: Vec<usize> = Vec::new();
        for s in 0..slots {
            if leaf_sizes[s] < 2 || far[s].0 <= 0.0 {
                let id = candidates[s];
                tree.nodes[id as usize].state = NodeState::Converged;
                bitmap.set(id);
            } else {
                survivors.push(s);
            }
        }
        if survivors.is_empty() {
            continue;
        }

        // Seed children along the centroid-to-farthest-point axis.
        let mut serial_stats = TaskStats::default();
        let mut children: Vec<[Vec<f64>; 2]> = Vec::with_capacity(slots);
        for s in 0..slots {
            if !survivors.contains(&s) {
                children.push([leaf_cents[s].clone(), leaf_cents[s].clone()]);
                continue;
            }
            let fv = source.materialize_row(far[s].1 as usize, &mut serial_stats)?;
            let mut c0 = leaf_cents[s].clone();
            let mut c1 = leaf_cents[s].clone();
            for j in 0..d {
                let delta = 0.5 * (fv[j] - leaf_cents[s][j]);
                c0[j] += delta;
                c1[j] -= delta;
            }
            children.push([c0, c1]);
        }
        let survivor_set: Vec<bool> = (0..slots).map(|s| survivors.contains(&s)).collect();

        // Inner 2-means over every splitting leaf simultaneously.
        let mut child_counts = vec![0u64; slots * 2];
        for inner in 0..params.inner_iters {
            let children_ref = &children;
            let survivor_ref = &survivor_set;
            let cold = inner == 0;
            let partials = driver.phase(0.0, |rows, fetch, stats| {
                fetch.ids.clear();
                let mut row_slots: Vec<usize> = Vec::new();
                for i in rows.iter() {
                    let leaf = key_leaf(unsafe { *keys.row_ref(i) });
                    if let Some(&s) = slot_of.get(&leaf) {
                        if survivor_ref[s] {
                            fetch.ids.push(i as u32);
                            row_slots.push(s);
                        }
                    }
                }
                let block = source.fetch(fetch, stats)?;
                let mut p = InnerPartial {
                    sums: vec![0.0; slots * 2 * d],
                    counts: vec![0; slots * 2],
                    sse: 0.0,
                    reassigned: 0,
                    far: vec![(-1.0, u64::MAX); slots],
                };
                for (pos, &iu) in block.ids().iter().enumerate() {
                    let i = iu as usize;
                    let s = row_slots[pos];
                    let v = block.row(i);
                    let d0 = euclidean(v, &children_ref[s][0]);
                    let d1 = euclidean(v, &children_ref[s][1]);
                    stats.dist_comps += 2;
                    let choice = u8::from(d1 < d0);
                    let dist = if choice == 1 { d1 } else { d0 };
                    // Safety: row i belongs to this task exclusively.
                    unsafe {
                        let slot = child_of.row_mut(i);
                        if cold || *slot != choice {
                            p.reassigned += 1;
                        }
                        *slot = choice;
                    }
                    let c = s * 2 + choice as usize;
                    for j in 0..d {
                        p.sums[c * d + j] += v[j];
                    }
                    p.counts[c] += 1;
                    p.sse += dist * dist;
                    if dist > p.far[s].0 || (dist == p.far[s].0 && (iu as u64) < p.far[s].1) {
                        p.far[s] = (dist, iu as u64);
                    }
                }
                Ok(p)
            })?;

            // Fold in task order and update child centroids.
            let mut sums = vec![0.0f64; slots * 2 * d];
            let mut counts = vec![0u64; slots * 2];
            let mut reassigned = 0u64;
            let mut far_child = vec![(-1.0f64, u64::MAX); slots];
            let mut sse = 0.0;
            for p in partials {
                for x in 0..slots * 2 * d {
                    sums[x] += p.sums[x];
                }
                for x in 0..slots * 2 {
                    counts[x] += p.counts[x];
                }
                reassigned += p.reassigned;
                sse += p.sse;
                for s in 0..slots {
                    if p.far[s].0 > far_child[s].0
                        || (p.far[s].0 == far_child[s].0 && p.far[s].1 < far_child[s].1)
                    {
                        far_child[s] = p.far[s];
                    }
                }
            }
            driver.metrics.last_mut().expect("phase pushed").objective = sse;

            let mut max_drift = 0.0f64;
            for &s in &survivors {
                for c in 0..2 {
                    let idx = s * 2 + c;
                    let count = counts[idx];
                    let prev = children[s][c].clone();
                    if count > 0 {
                        for j in 0..d {
                            children[s][c][j] = sums[idx * d + j] / count as f64;
                        }
                    } else {
                        // Empty child: re-seed to the farthest point from
                        // the surviving child.
                        let fv =
                            source.materialize_row(far_child[s].1 as usize, &mut serial_stats)?;
                        children[s][c].copy_from_slice(&fv);
                    }
                    max_drift = max_drift.max(euclidean(&children[s][c], &prev));
                }
            }
            child_counts.copy_from_slice(&counts);
            let _ = reassigned;
            if inner > 0 && max_drift <= cfg.tol {
                break;
            }
        }

        // Split decisions.
        let mut decisions = vec![false; slots];
        match params.method {
            HierMethod::HMeans { .. } => {
                for &s in &survivors {
                    decisions[s] = true;
                }
            }
            HierMethod::XMeans { .. } | HierMethod::GMeans { .. } => {
                let needs_proj = matches!(params.method, HierMethod::GMeans { .. });
                let children_ref = &children;
                let survivor_ref = &survivor_set;
                let axes: Vec<Vec<f64>> = (0..slots)
                    .map(|s| {
                        (0..d)
                            .map(|j| children[s][0][j] - children[s][1][j])
                            .collect()
                    })
                    .collect();
                let axes_ref = &axes;
                let partials = driver.phase(0.0, |rows, fetch, stats| {
                    fetch.ids.clear();
                    let mut row_slots: Vec<usize> = Vec::new();
                    for i in rows.iter() {
                        let leaf = key_leaf(unsafe { *keys.row_ref(i) });
                        if let Some(&s) = slot_of.get(&leaf) {
                            if survivor_ref[s] {
                                fetch.ids.push(i as u32);
                                row_slots.push(s);
                            }
                        }
                    }
                    let block = source.fetch(fetch, stats)?;
                    let mut p = DecisionPartial {
                        m: vec![0; slots],
                        sse_one: vec![0.0; slots],
                        sse_two: vec![0.0; slots],
                        counts: vec![0; slots * 2],
                        projections: vec![Vec::new(); slots],
                    };
                    for (pos, &iu) in block.ids().iter().enumerate() {
                        let i = iu as usize;
                        let s = row_slots[pos];
                        let v = block.row(i);
                        let choice = unsafe { *child_of.row_ref(i) } as usize;
                        p.m[s] += 1;
                        p.counts[s * 2 + choice] += 1;
                        p.sse_one[s] += squared_euclidean(v, &leaf_cents[s]);
                        p.sse_two[s] += squared_euclidean(v, &children_ref[s][choice]);
                        stats.dist_comps += 2;
                        if needs_proj {
                            let mut proj = 0.0;
                            for j in 0..d {
                                proj += v[j] * axes_ref[s][j];
                            }
                            p.projections[s].push(proj);
                        }
                    }
                    Ok(p)
                })?;
                let mut m = vec![0u64; slots];
                let mut sse_one = vec![0.0f64; slots];
                let mut sse_two = vec![0.0f64; slots];
                let mut counts = vec![0u64; slots * 2];
                let mut projections: Vec<Vec<f64>> = vec![Vec::new(); slots];
                for p in partials {
                    for s in 0..slots {
                        m[s] += p.m[s];
                        sse_one[s] += p.sse_one[s];
                        sse_two[s] += p.sse_two[s];
                        counts[s * 2] += p.counts[s * 2];
                        counts[s * 2 + 1] += p.counts[s * 2 + 1];
                        projections[s].extend_from_slice(&p.projections[s]);
                    }
                }
                driver.metrics.last_mut().expect("phase pushed").objective =
                    sse_two.iter().sum();
                for &s in &survivors {
                    decisions[s] = match params.method {
                        HierMethod::XMeans { .. } => split_decision_bic(
                            m[s],
                            d,
                            sse_one[s],
                            sse_two[s],
                            [counts[s * 2], counts[s * 2 + 1]],
                        ),
                        HierMethod::GMeans { alpha, .. } => {
                            let axis_len = crate::dist::norm(&axes[s]);
                            axis_len > 0.0
                                && anderson_darling_decision(&projections[s], alpha)?
                        }
                        HierMethod::HMeans { .. } => unreachable!(),
                    };
                }
            }
        }

        // Apply decisions in ascending leaf order, respecting the cap;
        // spawning only touches tree metadata, key rewriting is deferred
        // until every split of this round is recorded.
        let mut spawned: HashMap<u32, [u32; 2]> = HashMap::new();
        for &s in &survivors {
            let id = candidates[s];
            let cap_hit = params
                .method
                .kmax()
                .is_some_and(|kmax| tree.leaf_count() >= kmax);
            if decisions[s] && !cap_hit {
                let ids = tree.spawn(
                    id,
                    [children[s][0].clone(), children[s][1].clone()],
                    [child_counts[s * 2], child_counts[s * 2 + 1]],
                )?;
                spawned.insert(id, [ids.0, ids.1]);
            } else {
                tree.nodes[id as usize].state = NodeState::Converged;
                bitmap.set(id);
            }
        }

        if !spawned.is_empty() {
            // Metadata-only parallel block: rewrite the leading key bits.
            let spawned_ref = &spawned;
            let child_ref = &child_of;
            let keys_ref = &keys;
            driver.phase(0.0, |rows, _fetch, _stats| {
                for i in rows.iter() {
                    // Safety: row i belongs to this task exclusively.
                    unsafe {
                        let key = keys_ref.row_mut(i);
                        if let Some(ids) = spawned_ref.get(&key_leaf(*key)) {
                            let child = *child_ref.row_ref(i) as usize;
                            *key = make_key(ids[child], key_row(*key));
                        }
                    }
                }
                Ok(())
            })?;
            split_rounds += 1;
        }
        init_stats.merge(&serial_stats);
    }

    // Dense leaf indexes in ascending node-id order.
    let mut keys = keys;
    let keys_vec = keys.to_vec();
    let leaf_ids = tree.leaf_ids();
    let dense: HashMap<u32, u32> = leaf_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i as u32))
        .collect();
    let assignments: Vec<u32> = keys_vec.iter().map(|&k| dense[&key_leaf(k)]).collect();

    // Refresh leaf counts from the final membership.
    for node in tree.nodes.iter_mut() {
        if node.state != NodeState::Parent {
            node.count = 0;
        }
    }
    for &k in &keys_vec {
        tree.nodes[key_leaf(k) as usize].count += 1;
    }

    Ok(HierResult {
        tree,
        bitmap,
        keys: keys_vec,
        assignments,
        leaf_ids,
        metrics: driver.metrics,
        split_rounds,
        barriers: driver.barriers,
        init_stats,
    })
}
