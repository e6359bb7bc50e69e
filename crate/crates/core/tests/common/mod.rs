//! Brute-force oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use graphalign::{permute_graph, LabeledGraph, Permutation};
use nalgebra::DMatrix;

/// Every permutation of `0..m`, in lexicographic order.
pub fn all_permutations(m: usize) -> Vec<Permutation> {
    fn rec(p: &mut Vec<usize>, k: usize, out: &mut Vec<Permutation>) {
        if k == p.len() {
            out.push(Permutation::new(p.clone()).unwrap());
            return;
        }
        for i in k..p.len() {
            p[k..=i].rotate_right(1);
            rec(p, k + 1, out);
            p[k..=i].rotate_left(1);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..m).collect(), 0, &mut out);
    out
}

/// Calls `f` on every tuple `(id, π_2, ..., π_n)`.
fn for_each_tuple(n: usize, m: usize, f: &mut impl FnMut(&[Permutation])) {
    let perms = all_permutations(m);
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut tuple = vec![Permutation::identity(m)];
        tuple.extend(idx.iter().map(|&k| perms[k].clone()));
        f(&tuple);
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < perms.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// `min Σ_{i<j} ‖A_i P_ij − P_ij A_j‖²` over consistent permutation tuples.
pub fn galign_brute_force(adjs: &[DMatrix<f64>]) -> f64 {
    let m = adjs[0].nrows();
    let mut best = f64::INFINITY;
    for_each_tuple(adjs.len(), m, &mut |t| {
        let aligned: Vec<DMatrix<f64>> = adjs
            .iter()
            .zip(t)
            .map(|(a, p)| p.to_matrix().transpose() * a * p.to_matrix())
            .collect();
        let mut total = 0.0;
        for i in 0..aligned.len() {
            for j in (i + 1)..aligned.len() {
                total += (&aligned[i] - &aligned[j]).norm_squared();
            }
        }
        best = best.min(total);
    });
    best
}

/// `min Σ ‖A_i P_i − P_i A₀‖²` over permutations `P_i` and real `A₀`.
pub fn fermat_brute_force(adjs: &[DMatrix<f64>]) -> f64 {
    let m = adjs[0].nrows();
    let mut best = f64::INFINITY;
    for_each_tuple(adjs.len(), m, &mut |t| {
        let aligned: Vec<DMatrix<f64>> = adjs
            .iter()
            .zip(t)
            .map(|(a, p)| p.to_matrix().transpose() * a * p.to_matrix())
            .collect();
        let mean = aligned.iter().fold(DMatrix::zeros(m, m), |s, a| s + a) / aligned.len() as f64;
        let total: f64 = aligned.iter().map(|a| (a - &mean).norm_squared()).sum();
        best = best.min(total);
    });
    best
}

/// Brute-force isomorphism test.
pub fn isomorphic(g: &LabeledGraph, h: &LabeledGraph) -> bool {
    if g.m() != h.m() || g.edge_count() != h.edge_count() {
        return false;
    }
    let mut dg = g.degrees();
    let mut dh = h.degrees();
    dg.sort_unstable();
    dh.sort_unstable();
    if dg != dh {
        return false;
    }
    all_permutations(g.m())
        .iter()
        .any(|p| permute_graph(g, p).unwrap().adj() == h.adj())
}
