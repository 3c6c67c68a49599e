//! Hierarchical engine behavior: split decisions, key encoding, and
//! model selection on generated mixtures.

mod common;

use common::*;
use mmcluster::hier::{
    key_leaf, key_row, make_key, run_hierarchical, HierMethod, HierParams, NodeState,
};
use mmcluster::synth::MixtureSpec;

fn params(method: HierMethod) -> HierParams {
    HierParams {
        method,
        inner_iters: 20,
    }
}

#[test]
fn point_key_round_trip() {
    let key = make_key(7, 123_456);
    assert_eq!(key_leaf(key), 7);
    assert_eq!(key_row(key), 123_456);
}

#[test]
fn hmeans_one_level_splits_once() {
    let spec = MixtureSpec {
        n: 400,
        d: 3,
        true_k: 2,
        separation: 8.0,
        seed: 5,
    };
    let (source, _) = mixture_source(&spec, 2);
    let r = run_hierarchical(&source, &params(HierMethod::HMeans { lmax: 1 }), &cfg(2, 20))
        .unwrap();
    assert_eq!(r.leaf_ids.len(), 2);
    assert_eq!(r.split_rounds, 1);
    // Root became a parent; children are converged leaves.
    assert_eq!(r.tree.nodes[0].state, NodeState::Parent);
    // Keys recover row ids and name current leaves.
    for (i, &k) in r.keys.iter().enumerate() {
        assert_eq!(key_row(k) as usize, i);
        assert!(r.leaf_ids.contains(&key_leaf(k)));
    }
    // Leaf counts partition the rows.
    let total: u64 = r
        .tree
        .nodes
        .iter()
        .filter(|n| n.state != NodeState::Parent)
        .map(|n| n.count)
        .sum();
    assert_eq!(total, 400);
}

#[test]
fn identical_points_single_leaf() {
    let values: Vec<f64> = (0..50).flat_map(|_| [3.0, 1.0]).collect();
    let source = mem_source(values, 50, 2, 1);
    for method in [
        HierMethod::HMeans { lmax: 4 },
        HierMethod::XMeans { kmax: 8 },
        HierMethod::GMeans {
            kmax: 8,
            alpha: 0.0001,
        },
    ] {
        let r = run_hierarchical(&source, &params(method), &cfg(1, 20)).unwrap();
        assert_eq!(r.leaf_ids.len(), 1, "{method:?}");
        assert_eq!(r.split_rounds, 0, "{method:?}");
        assert!(r.assignments.iter().all(|&a| a == 0));
    }
}

#[test]
fn two_distinct_points_split_to_singletons() {
    let source = mem_source(vec![0.0, 0.0, 4.0, 0.0], 2, 2, 1);
    let r = run_hierarchical(&source, &params(HierMethod::HMeans { lmax: 3 }), &cfg(1, 20))
        .unwrap();
    assert_eq!(r.leaf_ids.len(), 2);
    assert_ne!(r.assignments[0], r.assignments[1]);
}

#[test]
fn hmeans_leaf_count_doubles_per_level() {
    let spec = MixtureSpec {
        n: 1600,
        d: 4,
        true_k: 8,
        separation: 20.0,
        seed: 17,
    };
    let (source, _) = mixture_source(&spec, 2);
    let r = run_hierarchical(&source, &params(HierMethod::HMeans { lmax: 3 }), &cfg(2, 20))
        .unwrap();
    assert_eq!(r.leaf_ids.len(), 8);
    assert_eq!(r.split_rounds, 3);
}

#[test]
fn xmeans_recovers_separated_blob_count() {
    let spec = MixtureSpec {
        n: 1600,
        d: 4,
        true_k: 8,
        separation: 20.0,
        seed: 23,
    };
    let (source, mix) = mixture_source(&spec, 2);
    let r = run_hierarchical(&source, &params(HierMethod::XMeans { kmax: 32 }), &cfg(2, 20))
        .unwrap();
    assert_eq!(r.leaf_ids.len(), 8);
    // The recovered leaves coincide with the generating labels.
    let mut map = std::collections::HashMap::new();
    for i in 0..1600 {
        let e = map.entry(r.assignments[i]).or_insert(mix.labels[i]);
        assert_eq!(*e, mix.labels[i], "leaf split a generating blob");
    }
}

#[test]
fn gmeans_recovers_separated_blob_count() {
    let spec = MixtureSpec {
        n: 1600,
        d: 4,
        true_k: 8,
        separation: 20.0,
        seed: 31,
    };
    let (source, _) = mixture_source(&spec, 2);
    let r = run_hierarchical(
        &source,
        &params(HierMethod::GMeans {
            kmax: 32,
            alpha: 0.0001,
        }),
        &cfg(2, 20),
    )
    .unwrap();
    assert_eq!(r.leaf_ids.len(), 8);
}

#[test]
fn kmax_caps_leaf_count() {
    let spec = MixtureSpec {
        n: 1600,
        d: 4,
        true_k: 8,
        separation: 20.0,
        seed: 37,
    };
    let (source, _) = mixture_source(&spec, 2);
    for kmax in [1, 3, 5] {
        let r = run_hierarchical(&source, &params(HierMethod::XMeans { kmax }), &cfg(2, 20))
            .unwrap();
        assert!(r.leaf_ids.len() <= kmax, "kmax {kmax}: {}", r.leaf_ids.len());
    }
}

#[test]
fn spawned_ids_are_sequential_and_parent_inactive() {
    let spec = MixtureSpec {
        n: 200,
        d: 2,
        true_k: 2,
        separation: 15.0,
        seed: 41,
    };
    let (source, _) = mixture_source(&spec, 1);
    let r = run_hierarchical(&source, &params(HierMethod::HMeans { lmax: 1 }), &cfg(1, 20))
        .unwrap();
    assert_eq!(r.tree.nodes.len(), 3);
    assert_eq!(r.tree.nodes[1].id, 1);
    assert_eq!(r.tree.nodes[2].id, 2);
    assert_eq!(r.tree.nodes[1].parent, Some(0));
    assert_eq!(r.tree.nodes[2].parent, Some(0));
    // Children's counts sum to the parent's former count.
    assert_eq!(r.tree.nodes[1].count + r.tree.nodes[2].count, 200);
    // Converged leaves are recorded in the bitmap.
    for &leaf in &r.leaf_ids {
        assert!(r.bitmap.get(leaf));
    }
}

#[test]
fn assignments_partition_rows_across_levels() {
    let spec = MixtureSpec {
        n: 900,
        d: 3,
        true_k: 4,
        separation: 12.0,
        seed: 47,
    };
    let (source, _) = mixture_source(&spec, 4);
    let r = run_hierarchical(&source, &params(HierMethod::XMeans { kmax: 16 }), &cfg(4, 20))
        .unwrap();
    let mut counts = vec![0u64; r.leaf_ids.len()];
    for &a in &r.assignments {
        counts[a as usize] += 1;
    }
    assert_eq!(counts.iter().sum::<u64>(), 900);
    assert!(counts.iter().all(|&c| c > 0));
}

#[test]
fn invalid_caps_are_usage_errors() {
    let source = mem_source(vec![0.0, 1.0, 2.0, 3.0], 2, 2, 1);
    assert!(run_hierarchical(
        &source,
        &params(HierMethod::HMeans { lmax: 0 }),
        &cfg(1, 20)
    )
    .is_err());
    assert!(run_hierarchical(
        &source,
        &params(HierMethod::XMeans { kmax: 0 }),
        &cfg(1, 20)
    )
    .is_err());
}
