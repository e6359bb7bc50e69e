//! Synthetic graph families and edge-noise perturbation.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{LabeledGraph, Permutation};
use crate::rng::RngSeed;

/// Stochastic block graph: each community is an independent G(s, p) sample,
/// then `floor(inter_frac * |V|)` distinct inter-community edges are added
/// uniformly at random.
pub fn gen_community(sizes: &[usize], p: f64, inter_frac: f64, seed: RngSeed) -> Result<LabeledGraph> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("community sizes are empty".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("community size 0".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} not in [0, 1]")));
    }
    if !(inter_frac >= 0.0 && inter_frac.is_finite()) {
        return Err(Error::InvalidParameter(format!("inter-community fraction {inter_frac}")));
    }
    let m: usize = sizes.iter().sum();
    let mut rng = seed.rng();
    let mut community = Vec::with_capacity(m);
    let mut edges = Vec::new();
    let mut offset = 0;
    for (c, &s) in sizes.iter().enumerate() {
        community.extend(std::iter::repeat(c).take(s));
        for u in 0..s {
            for v in (u + 1)..s {
                if rng.gen::<f64>() < p {
                    edges.push((offset + u, offset + v));
                }
            }
        }
        offset += s;
    }

    let inter = (inter_frac * m as f64).floor() as usize;
    if inter > 0 {
        let cross: Vec<(usize, usize)> = (0..m)
            .flat_map(|u| ((u + 1)..m).map(move |v| (u, v)))
            .filter(|&(u, v)| community[u] != community[v])
            .collect();
        if inter > cross.len() {
            return Err(Error::InvalidParameter(format!(
                "{inter} inter-community edges requested, only {} cross pairs exist",
                cross.len()
            )));
        }
        let mut picked = index::sample(&mut rng, cross.len(), inter).into_vec();
        picked.sort_unstable();
        edges.extend(picked.into_iter().map(|i| cross[i]));
    }
    LabeledGraph::from_edges(m, &edges)
}

/// `rows x cols` 4-neighbour lattice; node `(r, c)` has index `r * cols + c`.
pub fn gen_grid(rows: usize, cols: usize) -> Result<LabeledGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(format!("grid {rows}x{cols} has no nodes")));
    }
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            if c + 1 < cols {
                edges.push((u, u + 1));
            }
            if r + 1 < rows {
                edges.push((u, u + cols));
            }
        }
    }
    LabeledGraph::from_edges(rows * cols, &edges)
}

/// Barabási–Albert graph with `attach` edges per new node, reduced to the
/// `hops`-neighbourhood of a uniformly chosen centre. Nodes of the ego graph
/// are relabeled in increasing order of their original index.
pub fn gen_ego_ba(total_nodes: usize, attach: usize, hops: usize, seed: RngSeed) -> Result<LabeledGraph> {
    if attach == 0 || total_nodes <= attach {
        return Err(Error::InvalidParameter(format!(
            "Barabási–Albert needs total_nodes > attach >= 1 (got {total_nodes}, {attach})"
        )));
    }
    let mut rng = seed.rng();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); total_nodes];
    // seed graph: star on attach + 1 nodes
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * attach * total_nodes);
    for v in 1..=attach {
        nbrs[0].push(v);
        nbrs[v].push(0);
        repeated.push(0);
        repeated.push(v);
    }
    for v in (attach + 1)..total_nodes {
        let mut targets = BTreeSet::new();
        while targets.len() < attach {
            targets.insert(*repeated.choose(&mut rng).expect("non-empty"));
        }
        for &t in &targets {
            nbrs[v].push(t);
            nbrs[t].push(v);
            repeated.push(t);
            repeated.push(v);
        }
    }

    let center = rng.gen_range(0..total_nodes);
    let mut depth = vec![usize::MAX; total_nodes];
    depth[center] = 0;
    let mut queue = VecDeque::from([center]);
    while let Some(u) = queue.pop_front() {
        if depth[u] == hops {
            continue;
        }
        for &w in &nbrs[u] {
            if depth[w] == usize::MAX {
                depth[w] = depth[u] + 1;
                queue.push_back(w);
            }
        }
    }
    let nodes: Vec<usize> = (0..total_nodes).filter(|&v| depth[v] != usize::MAX).collect();
    let mut local = vec![usize::MAX; total_nodes];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let mut edges = Vec::new();
    for &u in &nodes {
        for &w in &nbrs[u] {
            if local[w] != usize::MAX && u < w {
                edges.push((local[u], local[w]));
            }
        }
    }
    LabeledGraph::from_edges(nodes.len(), &edges)
}

/// Removes `round(rho * |E|)` edges uniformly at random and re-adds the same
/// number among the pairs absent from the input graph. Edge count is preserved.
pub fn perturb(g: &LabeledGraph, rho: f64, seed: RngSeed) -> Result<LabeledGraph> {
    if !g.is_binary() {
        return Err(Error::InvalidGraph("perturbation requires a binary graph".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("perturbation fraction {rho} not in [0, 1]")));
    }
    let m = g.m();
    let edges = g.edges();
    let k = (rho * edges.len() as f64).round() as usize;
    if k == 0 {
        return Ok(g.clone());
    }
    let absent: Vec<(usize, usize)> = (0..m)
        .flat_map(|u| ((u + 1)..m).map(move |v| (u, v)))
        .filter(|&(u, v)| g.adj()[(u, v)] == 0.0)
        .collect();
    if k > absent.len() {
        return Err(Error::NotEnoughAbsentPairs {
            needed: k,
            available: absent.len(),
        });
    }
    let mut rng = seed.rng();
    let removed: BTreeSet<usize> = index::sample(&mut rng, edges.len(), k).into_iter().collect();
    let added = index::sample(&mut rng, absent.len(), k);
    let mut out: Vec<(usize, usize)> = edges
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, &e)| e)
        .collect();
    out.extend(added.into_iter().map(|i| absent[i]));
    LabeledGraph::from_edges(m, &out)?.with_features(g.features().cloned())
}

/// Uniformly random permutation of `m` nodes.
pub fn random_permutation(m: usize, seed: RngSeed) -> Permutation {
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut seed.rng());
    Permutation::new(perm).expect("shuffle is a bijection")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn community_complete_and_empty() {
        let k3 = gen_community(&[3], 1.0, 0.0, RngSeed(1)).unwrap();
        assert_eq!(k3.m(), 3);
        assert_eq!(k3.edge_count(), 3);
        let e = gen_community(&[2, 2], 0.0, 0.0, RngSeed(1)).unwrap();
        assert_eq!(e.m(), 4);
        assert_eq!(e.edge_count(), 0);
    }

    #[test]
    fn community_errors() {
        assert!(gen_community(&[], 0.5, 0.0, RngSeed(0)).is_err());
        assert!(gen_community(&[3], 1.5, 0.0, RngSeed(0)).is_err());
        assert!(gen_community(&[3], -0.1, 0.0, RngSeed(0)).is_err());
    }

    #[test]
    fn community_edge_expectation() {
        // E[intra] = 0.7 * (C(5,2) + C(15,2) + C(17,2)) = 175.7, inter = floor(0.05 * 37) = 1
        let sizes = [5, 15, 17];
        let pairs = [10.0, 105.0, 136.0];
        let expected: f64 = pairs.iter().sum::<f64>() * 0.7;
        assert!((expected - 175.7).abs() < 1e-9);
        let inter = (0.05 * 37f64).floor() as usize;
        let mut total = 0.0;
        for s in 0..200 {
            let g = gen_community(&sizes, 0.7, 0.05, RngSeed(s)).unwrap();
            assert_eq!(g.m(), 37);
            total += (g.edge_count() - inter) as f64;
        }
        let mean = total / 200.0;
        assert!((mean - expected).abs() / expected < 0.05, "mean {mean}");
    }

    #[test]
    fn community_inter_edges_cross_only() {
        let g = gen_community(&[3, 3], 0.0, 1.0, RngSeed(9)).unwrap();
        assert_eq!(g.edge_count(), 6);
        for (u, v) in g.edges() {
            assert!(u < 3 && v >= 3);
        }
    }

    #[test]
    fn grid_counts() {
        let g = gen_grid(6, 6).unwrap();
        assert_eq!((g.m(), g.edge_count()), (36, 60));
        let g = gen_grid(1, 1).unwrap();
        assert_eq!((g.m(), g.edge_count()), (1, 0));
        let g = gen_grid(2, 2).unwrap();
        assert_eq!((g.m(), g.edge_count()), (4, 4));
        for (r, c) in [(3, 7), (5, 2), (1, 9)] {
            assert_eq!(gen_grid(r, c).unwrap().edge_count(), 2 * r * c - r - c);
        }
        assert!(gen_grid(0, 3).is_err());
    }

    #[test]
    fn ego_ba_cases() {
        let g = gen_ego_ba(3, 1, 2, RngSeed(4)).unwrap();
        assert_eq!(g.m(), 3);
        assert_eq!(g.edge_count(), 2);
        let g = gen_ego_ba(50, 3, 0, RngSeed(4)).unwrap();
        assert_eq!(g.m(), 1);
        let g = gen_ego_ba(950, 5, 1, RngSeed(11)).unwrap();
        assert!(g.m() >= 6);
        assert!(gen_ego_ba(5, 5, 1, RngSeed(0)).is_err());
        assert_eq!(gen_ego_ba(200, 2, 1, RngSeed(3)).unwrap(), gen_ego_ba(200, 2, 1, RngSeed(3)).unwrap());
    }

    #[test]
    fn perturb_cases() {
        let g = gen_grid(4, 4).unwrap();
        assert_eq!(perturb(&g, 0.0, RngSeed(1)).unwrap(), g);
        let k3 = gen_community(&[3], 1.0, 0.0, RngSeed(0)).unwrap();
        assert!(matches!(
            perturb(&k3, 1.0, RngSeed(0)),
            Err(Error::NotEnoughAbsentPairs { .. })
        ));
        assert!(perturb(&g, 1.2, RngSeed(0)).is_err());
        for s in 0..100 {
            let h = perturb(&g, 0.1 + (s % 5) as f64 * 0.1, RngSeed(s)).unwrap();
            assert_eq!(h.m(), g.m());
            assert_eq!(h.edge_count(), g.edge_count());
        }
        let h = perturb(&g, 0.5, RngSeed(2)).unwrap();
        assert_ne!(h, g);
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = gen_community(&[5, 15, 17], 0.7, 0.05, RngSeed(42)).unwrap();
        let b = gen_community(&[5, 15, 17], 0.7, 0.05, RngSeed(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(perturb(&a, 0.1, RngSeed(1)).unwrap(), perturb(&b, 0.1, RngSeed(1)).unwrap());
        assert_eq!(random_permutation(10, RngSeed(3)), random_permutation(10, RngSeed(3)));
    }
}
