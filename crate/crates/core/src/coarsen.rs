//! Spectral coarsening: Laplacian eigenmap embedding, k-means, super-node graph.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::linalg::sym_eigen;
use crate::rng::RngSeed;

/// k-means++ restarts; the run with the lowest inertia is kept.
pub const KMEANS_RESTARTS: usize = 50;
/// Lloyd iterations per restart.
pub const KMEANS_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Coarsening {
    /// `c x c` super-node graph: intra-cluster edge counts on the diagonal,
    /// inter-cluster counts off it, divided by the largest entry.
    pub coarse: LabeledGraph,
    /// Unscaled edge counts behind `coarse`.
    pub counts: DMatrix<f64>,
    /// Cluster id of each node. Ids are numbered by first occurrence.
    pub assignment: Vec<usize>,
}

impl Coarsening {
    pub fn clusters(&self) -> usize {
        self.counts.nrows()
    }

    /// Nodes of cluster `k` in ascending order.
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&u| self.assignment[u] == k)
            .collect()
    }
}

pub fn coarsen(g: &LabeledGraph, c: usize, seed: RngSeed) -> Result<Coarsening> {
    let m = g.m();
    if c == 0 || c > m {
        return Err(Error::InvalidParameter(format!(
            "cannot form {c} clusters from {m} nodes"
        )));
    }
    let assignment = if c == m {
        (0..m).collect()
    } else if c == 1 {
        vec![0; m]
    } else {
        let z = laplacian_embedding(g, c)?;
        relabel_by_first_occurrence(&kmeans(&z, c, seed))
    };
    build(g, c, assignment)
}

/// Rows are nodes; columns are the eigenvectors of `L = D − A` for its `c`
/// smallest eigenvalues. On a connected graph the first one is constant and
/// does not affect k-means distances; on a disconnected graph the null space
/// holds the component indicators.
pub fn laplacian_embedding(g: &LabeledGraph, c: usize) -> Result<DMatrix<f64>> {
    let m = g.m();
    let a = g.adj();
    let lap = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            (0..m).filter(|&k| k != i).map(|k| a[(i, k)]).sum()
        } else {
            -a[(i, j)]
        }
    });
    let (_, vecs) = sym_eigen(&lap)?;
    Ok(vecs.columns(0, c.min(m)).into_owned())
}

fn sq_dist(z: &DMatrix<f64>, u: usize, centers: &DMatrix<f64>, k: usize) -> f64 {
    (0..z.ncols()).map(|d| (z[(u, d)] - centers[(k, d)]).powi(2)).sum()
}

/// Best of [`KMEANS_RESTARTS`] k-means++ runs on the rows of `z`.
pub fn kmeans(z: &DMatrix<f64>, k: usize, seed: RngSeed) -> Vec<usize> {
    let mut rng = seed.rng();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (inertia, labels) = lloyd(z, k, &mut rng);
        if best.as_ref().map_or(true, |(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.expect("at least one restart").1
}

fn plus_plus_init(z: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = z.nrows();
    let mut centers = DMatrix::zeros(k, z.ncols());
    let first = rng.gen_range(0..m);
    centers.row_mut(0).copy_from(&z.row(first));
    let mut d2: Vec<f64> = (0..m).map(|u| sq_dist(z, u, &centers, 0)).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = m - 1;
            for (u, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = u;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.gen_range(0..m)
        };
        centers.row_mut(j).copy_from(&z.row(pick));
        for (u, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(z, u, &centers, j));
        }
    }
    centers
}

fn lloyd(z: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let m = z.nrows();
    let mut centers = plus_plus_init(z, k, rng);
    let mut labels = vec![usize::MAX; m];
    for _ in 0..KMEANS_ITERS {
        let mut next: Vec<usize> = (0..m)
            .map(|u| {
                (0..k)
                    .map(|j| (j, sq_dist(z, u, &centers, j)))
                    .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
                    .0
            })
            .collect();
        repair_empty(z, k, &mut next, &centers);
        let changed = next != labels;
        labels = next;
        centers = means(z, k, &labels);
        if !changed {
            break;
        }
    }
    let inertia = (0..m).map(|u| sq_dist(z, u, &centers, labels[u])).sum();
    (inertia, labels)
}

/// Moves the point farthest from its center in the largest cluster into each
/// empty cluster.
fn repair_empty(z: &DMatrix<f64>, k: usize, labels: &mut [usize], centers: &DMatrix<f64>) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).fold(0, |b, j| if sizes[j] > sizes[b] { j } else { b });
        let far = (0..labels.len())
            .filter(|&u| labels[u] == largest)
            .map(|u| (u, sq_dist(z, u, centers, largest)))
            .fold((usize::MAX, -1.0), |b, c| if c.1 > b.1 { c } else { b })
            .0;
        labels[far] = empty;
    }
}

fn means(z: &DMatrix<f64>, k: usize, labels: &[usize]) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(k, z.ncols());
    let mut counts = vec![0.0; k];
    for (u, &l) in labels.iter().enumerate() {
        counts[l] += 1.0;
        for d in 0..z.ncols() {
            c[(l, d)] += z[(u, d)];
        }
    }
    for l in 0..k {
        if counts[l] > 0.0 {
            for d in 0..z.ncols() {
                c[(l, d)] /= counts[l];
            }
        }
    }
    c
}

fn relabel_by_first_occurrence(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn build(g: &LabeledGraph, c: usize, assignment: Vec<usize>) -> Result<Coarsening> {
    let mut counts = DMatrix::zeros(c, c);
    for (u, v, w) in g.entries() {
        if u == v {
            continue;
        }
        let (r, s) = (assignment[u], assignment[v]);
        if r == s {
            counts[(r, r)] += w;
        } else {
            counts[(r, s)] += w;
            counts[(s, r)] += w;
        }
    }
    let max = counts.max();
    let coarse = if max > 0.0 { &counts / max } else { counts.clone() };
    Ok(Coarsening {
        coarse: LabeledGraph::new(coarse, None)?,
        counts,
        assignment,
    })
}
