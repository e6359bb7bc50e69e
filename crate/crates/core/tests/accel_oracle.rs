mod common;

use common::isomorphic;
use graphalign::accel::{c_serial, cg_parallel, d0_score, g_parallel, align_to_center, AccelConfig};
use graphalign::generators::{gen_community, random_permutation};
use graphalign::multi::{align, Method, MultiAlignConfig};
use graphalign::{permute_graph, GraphSet, LabeledGraph, RngSeed};
use proptest::prelude::*;

fn source8() -> LabeledGraph {
    gen_community(&[4, 4], 0.8, 0.15, RngSeed(11)).unwrap()
}

fn permuted_copies(g: &LabeledGraph, n: usize, seed: u64) -> GraphSet {
    let graphs = (0..n)
        .map(|i| {
            if i == 0 {
                g.clone()
            } else {
                permute_graph(g, &random_permutation(g.m(), RngSeed(seed + i as u64))).unwrap()
            }
        })
        .collect();
    GraphSet::new("copies", graphs)
}

fn cfg(method: Method, k: usize, c: usize) -> AccelConfig {
    AccelConfig {
        group_size: k,
        clusters: c,
        inner: MultiAlignConfig {
            method,
            ..MultiAlignConfig::default()
        },
        ..AccelConfig::default()
    }
}

#[test]
fn identical_graphs_give_the_graph() {
    let g = source8();
    let set = GraphSet::new("same", vec![g.clone(); 5]);
    for method in [Method::Galign, Method::Fermat] {
        let c = cfg(method, 2, 2);
        assert_eq!(&g_parallel(&set, &c).unwrap().center.hard, &g);
        assert_eq!(&c_serial(&set, &c).unwrap().center.hard, &g);
        assert_eq!(&cg_parallel(&set, &c).unwrap().center.hard, &g);
    }
}

#[test]
fn four_graphs_two_per_group() {
    let set = permuted_copies(&source8(), 4, 30);
    let res = g_parallel(&set, &cfg(Method::Galign, 2, 2)).unwrap();
    let groups: Vec<usize> = res.stages.iter().map(|s| s.groups).collect();
    assert_eq!(groups, vec![2, 1]);
    assert_eq!(res.stage_centers[0].len(), 2);
    for (g, p) in set.graphs.iter().zip(&res.permutations) {
        assert_eq!(permute_graph(g, p).unwrap().adj(), res.center.hard.adj());
    }
    assert!(isomorphic(&res.center.hard, &source8()));
}

#[test]
fn small_sets_run_one_direct_alignment() {
    let set = permuted_copies(&source8(), 3, 40);
    let c = cfg(Method::Galign, 4, 2);
    let accel = g_parallel(&set, &c).unwrap();
    let direct = align(&set, &c.inner).unwrap();
    assert_eq!(accel.stages.len(), 1);
    assert_eq!(accel.center, direct.center);
    assert_eq!(accel.permutations, direct.permutations);

    let cs = c_serial(&set, &c).unwrap();
    let cg = cg_parallel(&set, &c).unwrap();
    assert_eq!(cs.center, cg.center);
    assert_eq!(cs.permutations, cg.permutations);
}

#[test]
fn one_cluster_is_a_direct_alignment() {
    let set = permuted_copies(&source8(), 3, 50);
    let c = cfg(Method::Fermat, 4, 1);
    let cs = c_serial(&set, &c).unwrap();
    let direct = align(&set, &c.inner).unwrap();
    assert_eq!(cs.center, direct.center);
}

#[test]
fn swapped_clusters_are_recovered() {
    // A triangle and a 4-cycle-with-chord, listed in opposite orders.
    let a = LabeledGraph::from_edges(7, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (5, 6), (3, 6), (3, 5)]).unwrap();
    let b = LabeledGraph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (4, 5), (5, 6), (4, 6)]).unwrap();
    let set = GraphSet::new("swap", vec![a.clone(), b]);
    for method in [Method::Galign, Method::Fermat] {
        let res = c_serial(&set, &cfg(method, 4, 2)).unwrap();
        assert_eq!(res.center.hard.edge_count(), 8);
        assert!(isomorphic(&res.center.hard, &a));
    }
    let tri = LabeledGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
    let swapped = permute_graph(&tri, &graphalign::Permutation::new(vec![3, 4, 5, 0, 1, 2]).unwrap()).unwrap();
    let res = c_serial(&GraphSet::new("k3s", vec![tri.clone(), swapped]), &cfg(Method::Galign, 4, 2)).unwrap();
    assert_eq!(res.center.hard.edge_count(), 6);
    assert_eq!(res.center.hard, tri);
}

#[test]
fn pipelines_recover_permuted_copies() {
    let g = source8();
    for n in [3, 5] {
        let set = permuted_copies(&g, n, 100 * n as u64);
        for method in [Method::Galign, Method::Fermat] {
            let cs = c_serial(&set, &cfg(method, 2, 2)).unwrap();
            assert!(isomorphic(&cs.center.hard, &g), "c-serial {method:?} n={n}");
            let cg = cg_parallel(&set, &cfg(method, 2, 2)).unwrap();
            assert!(isomorphic(&cg.center.hard, &g), "cg-parallel {method:?} n={n}");
        }
    }
}

#[test]
fn composed_cluster_permutations_align_copies() {
    let g = source8();
    let set = permuted_copies(&g, 4, 7);
    let res = c_serial(&set, &cfg(Method::Galign, 4, 2)).unwrap();
    let perms = res.permutations;
    assert!(perms[0].is_identity());
    assert_eq!(d0_score(&set, &perms, &res.center.hard).unwrap(), 0.0);
}

#[test]
fn aligning_to_the_center_beats_identity() {
    let base = gen_community(&[5, 5, 6], 0.7, 0.05, RngSeed(2)).unwrap();
    let set = permuted_copies(&base, 6, 60);
    let c = cfg(Method::Galign, 3, 2);
    let res = g_parallel(&set, &c).unwrap();
    let perms = align_to_center(&set, &res.center.hard, &c.pairwise, 1).unwrap();
    let ident = vec![graphalign::Permutation::identity(16); 6];
    let aligned = d0_score(&set, &perms, &res.center.hard).unwrap();
    let unaligned = d0_score(&set, &ident, &res.center.hard).unwrap();
    assert!(aligned < unaligned, "{aligned} vs {unaligned}");
}

#[test]
fn worker_count_does_not_change_output() {
    let base = gen_community(&[4, 5], 0.7, 0.1, RngSeed(9)).unwrap();
    let set = permuted_copies(&base, 7, 80);
    for method in [Method::Galign, Method::Fermat] {
        let one = cfg(method, 2, 2);
        let four = AccelConfig { workers: 4, ..one };
        let a = cg_parallel(&set, &one).unwrap();
        let b = cg_parallel(&set, &four).unwrap();
        assert_eq!(a.center, b.center);
        assert_eq!(a.stage_centers, b.stage_centers);
        let a = g_parallel(&set, &one).unwrap();
        let b = g_parallel(&set, &four).unwrap();
        assert_eq!(a.center, b.center);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn recursion_depth_is_logarithmic(n in 1usize..14, k in 2usize..5) {
        let g = LabeledGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let set = GraphSet::new("p3", vec![g.clone(); n]);
        let res = g_parallel(&set, &cfg(Method::Fermat, k, 2)).unwrap();
        let bound = (n as f64).log(k as f64).ceil() as usize + 1;
        prop_assert!(res.stages.len() <= bound.max(1));
        prop_assert_eq!(res.stage_centers.last().unwrap().len(), 1);
        prop_assert_eq!(&res.center.hard, &g);
    }
}
