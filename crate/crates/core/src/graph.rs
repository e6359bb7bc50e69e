//! Dense undirected graphs, node permutations and doubly stochastic matrices.
//!
//! Graphs are stored as dense symmetric weight matrices. Binary graphs carry
//! weights in `{0, 1}`; padded graphs and coarse graphs carry fractional
//! weights, and coarse graphs may also carry diagonal (intra-cluster) weight.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance on negative entries of a doubly stochastic matrix.
pub const DS_NONNEG_TOL: f64 = 1e-9;
/// Tolerance on row and column sums of a doubly stochastic matrix.
pub const DS_SUM_TOL: f64 = 1e-7;

/// Undirected weighted graph with optional node features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    adj: DMatrix<f64>,
    features: Option<DMatrix<f64>>,
    is_binary: bool,
}

impl LabeledGraph {
    /// Builds a graph from a symmetric adjacency matrix with weights in `[0, 1]`.
    pub fn new(adj: DMatrix<f64>, features: Option<DMatrix<f64>>) -> Result<Self> {
        if adj.nrows() != adj.ncols() {
            return Err(Error::InvalidGraph(format!(
                "adjacency is {}x{}, not square",
                adj.nrows(),
                adj.ncols()
            )));
        }
        if adj.nrows() == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        let m = adj.nrows();
        for i in 0..m {
            for j in 0..m {
                let w = adj[(i, j)];
                if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidGraph(format!(
                        "weight {w} at ({i}, {j}) outside [0, 1]"
                    )));
                }
                if j > i && w != adj[(j, i)] {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency not symmetric at ({i}, {j}): {w} vs {}",
                        adj[(j, i)]
                    )));
                }
            }
        }
        if let Some(x) = &features {
            if x.nrows() != m {
                return Err(Error::DimensionMismatch(format!(
                    "feature matrix has {} rows for {m} nodes",
                    x.nrows()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGraph("non-finite feature value".into()));
            }
        }
        let is_binary = adj.iter().all(|&w| w == 0.0 || w == 1.0);
        Ok(Self {
            adj,
            features,
            is_binary,
        })
    }

    /// Binary graph on `m` nodes with the given undirected edges.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = DMatrix::zeros(m, m);
        for &(u, v) in edges {
            if u >= m || v >= m {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {m} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self loop at node {u}")));
            }
            adj[(u, v)] = 1.0;
            adj[(v, u)] = 1.0;
        }
        Self::new(adj, None)
    }

    pub fn empty(m: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(m, m), None)
    }

    /// Number of nodes.
    pub fn m(&self) -> usize {
        self.adj.nrows()
    }

    pub fn adj(&self) -> &DMatrix<f64> {
        &self.adj
    }

    pub fn features(&self) -> Option<&DMatrix<f64>> {
        self.features.as_ref()
    }

    /// Node features, falling back to one-hot node indicators.
    pub fn features_or_one_hot(&self) -> DMatrix<f64> {
        self.features
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.m(), self.m()))
    }

    pub fn with_features(mut self, features: Option<DMatrix<f64>>) -> Result<Self> {
        if let Some(x) = &features {
            if x.nrows() != self.m() {
                return Err(Error::DimensionMismatch(format!(
                    "feature matrix has {} rows for {} nodes",
                    x.nrows(),
                    self.m()
                )));
            }
        }
        self.features = features;
        Ok(self)
    }

    pub fn is_binary(&self) -> bool {
        self.is_binary
    }

    pub fn into_adj(self) -> DMatrix<f64> {
        self.adj
    }

    /// Nonzero entries `(u, v, w)` with `u <= v`, in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.m();
        (0..m).flat_map(move |u| {
            (u..m).filter_map(move |v| {
                let w = self.adj[(u, v)];
                (w != 0.0).then_some((u, v, w))
            })
        })
    }

    /// Off-diagonal edges `(u, v)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.entries()
            .filter(|&(u, v, _)| u != v)
            .map(|(u, v, _)| (u, v))
            .collect()
    }

    /// Number of off-diagonal nonzero pairs.
    pub fn edge_count(&self) -> usize {
        self.entries().filter(|&(u, v, _)| u != v).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let m = self.m();
        (0..m)
            .map(|u| (0..m).filter(|&v| v != u && self.adj[(u, v)] != 0.0).count())
            .collect()
    }

    /// Frobenius norm of the adjacency matrix.
    pub fn norm(&self) -> f64 {
        self.adj.norm()
    }

    /// Induced subgraph on `nodes`, relabeled in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Result<LabeledGraph> {
        let k = nodes.len();
        let adj = DMatrix::from_fn(k, k, |i, j| self.adj[(nodes[i], nodes[j])]);
        let features = self
            .features
            .as_ref()
            .map(|x| DMatrix::from_fn(k, x.ncols(), |i, j| x[(nodes[i], j)]));
        LabeledGraph::new(adj, features)
    }
}

/// Ordered collection of graphs with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    pub name: String,
    pub graphs: Vec<LabeledGraph>,
}

impl GraphSet {
    pub fn new(name: impl Into<String>, graphs: Vec<LabeledGraph>) -> Self {
        Self {
            name: name.into(),
            graphs,
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Common node count, if every graph has the same size.
    pub fn common_size(&self) -> Option<usize> {
        let m = self.graphs.first()?.m();
        self.graphs.iter().all(|g| g.m() == m).then_some(m)
    }

    pub(crate) fn require_common_size(&self, min_graphs: usize) -> Result<usize> {
        if self.graphs.len() < min_graphs {
            return Err(Error::InvalidParameter(format!(
                "need at least {min_graphs} graphs, got {}",
                self.graphs.len()
            )));
        }
        self.common_size().ok_or_else(|| {
            Error::DimensionMismatch(
                "graphs have different node counts; pad with dummy nodes first".into(),
            )
        })
    }
}

/// Node bijection `perm[a]` = image of node `a`.
///
/// As a matrix, `P[a, perm[a]] = 1`, so `PᵀAP` moves node `a` of `A` to
/// position `perm[a]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    perm: Vec<usize>,
}

impl Permutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let m = perm.len();
        let mut seen = vec![false; m];
        for (a, &p) in perm.iter().enumerate() {
            if p >= m {
                return Err(Error::InvalidPermutation(format!(
                    "image {p} of node {a} out of range for size {m}"
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidPermutation(format!(
                    "image {p} used twice"
                )));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            perm: (0..m).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.perm
    }

    pub fn image(&self, a: usize) -> usize {
        self.perm[a]
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(a, &p)| a == p)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (a, &p) in self.perm.iter().enumerate() {
            inv[p] = a;
        }
        Self { perm: inv }
    }

    /// Applies `self` first, then `next`. As matrices this is `self · next`.
    pub fn then(&self, next: &Permutation) -> Self {
        assert_eq!(self.len(), next.len(), "permutation sizes differ");
        Self {
            perm: self.perm.iter().map(|&p| next.perm[p]).collect(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.len();
        let mut p = DMatrix::zeros(m, m);
        for (a, &b) in self.perm.iter().enumerate() {
            p[(a, b)] = 1.0;
        }
        p
    }

    /// Reads a 0/1 permutation matrix back into index form.
    pub fn from_matrix(p: &DMatrix<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::InvalidPermutation("matrix not square".into()));
        }
        let mut perm = Vec::with_capacity(p.nrows());
        for a in 0..p.nrows() {
            let row: Vec<usize> = (0..p.ncols()).filter(|&b| p[(a, b)] == 1.0).collect();
            if row.len() != 1 || (0..p.ncols()).any(|b| p[(a, b)] != 0.0 && p[(a, b)] != 1.0) {
                return Err(Error::InvalidPermutation(format!(
                    "row {a} is not a unit vector"
                )));
            }
            perm.push(row[0]);
        }
        Self::new(perm)
    }
}

/// Matrix in the Birkhoff polytope (nonnegative, unit row and column sums).
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    mat: DMatrix<f64>,
}

impl DoublyStochastic {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        Self::check(&mat, DS_NONNEG_TOL, DS_SUM_TOL)?;
        Ok(Self { mat })
    }

    /// Wraps a matrix the caller constructed to be feasible (convex
    /// combinations of vertices, projections).
    pub(crate) fn new_unchecked(mat: DMatrix<f64>) -> Self {
        debug_assert!(Self::check(&mat, 1e-6, 1e-6).is_ok());
        Self { mat }
    }

    /// Checks feasibility with explicit tolerances.
    pub fn check(mat: &DMatrix<f64>, nonneg_tol: f64, sum_tol: f64) -> Result<()> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotDoublyStochastic("not square".into()));
        }
        if let Some(v) = mat.iter().find(|v| !v.is_finite() || **v < -nonneg_tol) {
            return Err(Error::NotDoublyStochastic(format!("entry {v}")));
        }
        for i in 0..mat.nrows() {
            let r = mat.row(i).sum();
            let c = mat.column(i).sum();
            if (r - 1.0).abs() > sum_tol || (c - 1.0).abs() > sum_tol {
                return Err(Error::NotDoublyStochastic(format!(
                    "row/column {i} sums to {r}/{c}"
                )));
            }
        }
        Ok(())
    }

    pub fn identity(m: usize) -> Self {
        Self {
            mat: DMatrix::identity(m, m),
        }
    }

    /// The barycenter `J/m` of the polytope.
    pub fn uniform(m: usize) -> Self {
        Self {
            mat: DMatrix::from_element(m, m, 1.0 / m as f64),
        }
    }

    pub fn from_permutation(p: &Permutation) -> Self {
        Self { mat: p.to_matrix() }
    }

    pub fn m(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose(),
        }
    }
}

/// Conjugates `g` by `p`: `Ã = PᵀAP`, `X̃ = PᵀX`.
pub fn permute_graph(g: &LabeledGraph, p: &Permutation) -> Result<LabeledGraph> {
    let m = g.m();
    if p.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "permutation of size {} for graph with {m} nodes",
            p.len()
        )));
    }
    let inv = p.inverse();
    let src = inv.as_slice();
    let adj = DMatrix::from_fn(m, m, |x, y| g.adj[(src[x], src[y])]);
    let features = g
        .features
        .as_ref()
        .map(|f| DMatrix::from_fn(m, f.ncols(), |x, k| f[(src[x], k)]));
    Ok(LabeledGraph {
        adj,
        features,
        is_binary: g.is_binary,
    })
}

/// Expands every graph to the largest node count. Dummy nodes connect to
/// every other node (dummy or real) with `dummy_weight`; their feature rows
/// are zero.
pub fn pad_with_dummies(set: &GraphSet, dummy_weight: f64) -> Result<GraphSet> {
    if !(dummy_weight > 0.0 && dummy_weight < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "dummy weight {dummy_weight} not in (0, 1)"
        )));
    }
    let m_max = set.graphs.iter().map(LabeledGraph::m).max().unwrap_or(0);
    let graphs = set
        .graphs
        .iter()
        .map(|g| pad_graph(g, m_max, dummy_weight))
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphSet::new(set.name.clone(), graphs))
}

pub(crate) fn pad_graph(g: &LabeledGraph, m_new: usize, dummy_weight: f64) -> Result<LabeledGraph> {
    let m = g.m();
    if m >= m_new {
        return Ok(g.clone());
    }
    let adj = DMatrix::from_fn(m_new, m_new, |i, j| {
        if i < m && j < m {
            g.adj[(i, j)]
        } else if i == j {
            0.0
        } else {
            dummy_weight
        }
    });
    let features = g.features.as_ref().map(|f| {
        DMatrix::from_fn(m_new, f.ncols(), |i, k| if i < m { f[(i, k)] } else { 0.0 })
    });
    LabeledGraph::new(adj, features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> LabeledGraph {
        LabeledGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn rejects_asymmetric_and_out_of_range() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        assert!(LabeledGraph::new(a.clone(), None).is_err());
        a[(1, 0)] = 1.5;
        a[(0, 1)] = 1.5;
        assert!(LabeledGraph::new(a, None).is_err());
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert!(p.then(&p.inverse()).is_identity());
        assert_eq!(Permutation::from_matrix(&p.to_matrix()).unwrap(), p);
    }

    #[test]
    fn permute_identity_is_noop() {
        let g = path3();
        assert_eq!(permute_graph(&g, &Permutation::identity(3)).unwrap(), g);
    }

    #[test]
    fn permute_path_swap_ends() {
        let g = path3();
        let swap = Permutation::new(vec![2, 1, 0]).unwrap();
        let h = permute_graph(&g, &swap).unwrap();
        // 0-1-2 relabeled by 0<->2 is 2-1-0: same edge set
        assert_eq!(h.edges(), vec![(0, 1), (1, 2)]);
        let g2 = LabeledGraph::from_edges(3, &[(0, 1)]).unwrap();
        let h2 = permute_graph(&g2, &swap).unwrap();
        assert_eq!(h2.edges(), vec![(1, 2)]);
    }

    #[test]
    fn permute_matches_matrix_conjugation() {
        let g = LabeledGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let p = Permutation::new(vec![3, 0, 2, 1]).unwrap();
        let pm = p.to_matrix();
        let expect = pm.transpose() * g.adj() * &pm;
        assert_eq!(permute_graph(&g, &p).unwrap().adj(), &expect);
    }

    #[test]
    fn permute_features_rows() {
        let x = DMatrix::from_row_slice(3, 1, &[10.0, 20.0, 30.0]);
        let g = path3().with_features(Some(x.clone())).unwrap();
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        let h = permute_graph(&g, &p).unwrap();
        let expect = p.to_matrix().transpose() * x;
        assert_eq!(h.features().unwrap(), &expect);
    }

    #[test]
    fn permute_size_mismatch() {
        assert!(permute_graph(&path3(), &Permutation::identity(4)).is_err());
    }

    #[test]
    fn pad_two_and_three() {
        let a = LabeledGraph::from_edges(2, &[(0, 1)]).unwrap();
        let b = path3();
        let set = GraphSet::new("s", vec![a.clone(), b.clone()]);
        let out = pad_with_dummies(&set, 0.01).unwrap();
        assert_eq!(out.common_size(), Some(3));
        let pa = &out.graphs[0];
        assert_eq!(pa.adj()[(2, 0)], 0.01);
        assert_eq!(pa.adj()[(2, 1)], 0.01);
        assert_eq!(pa.adj()[(2, 2)], 0.0);
        assert_eq!(pa.adj().view((0, 0), (2, 2)), a.adj().view((0, 0), (2, 2)));
        assert_eq!(out.graphs[1], b);
    }

    #[test]
    fn pad_equal_sizes_and_empty() {
        let set = GraphSet::new("s", vec![path3(), path3()]);
        assert_eq!(pad_with_dummies(&set, 0.01).unwrap(), set);
        let empty = GraphSet::new("e", vec![]);
        assert!(pad_with_dummies(&empty, 0.01).unwrap().is_empty());
        assert!(pad_with_dummies(&set, 0.0).is_err());
    }

    #[test]
    fn pad_zero_feature_rows() {
        let a = LabeledGraph::from_edges(2, &[(0, 1)])
            .unwrap()
            .with_features(Some(DMatrix::from_element(2, 2, 1.0)))
            .unwrap();
        let set = GraphSet::new("s", vec![a, path3()]);
        let out = pad_with_dummies(&set, 0.01).unwrap();
        let x = out.graphs[0].features().unwrap();
        assert_eq!(x.nrows(), 3);
        assert_eq!(x.row(2).sum(), 0.0);
    }

    #[test]
    fn doubly_stochastic_checks() {
        assert!(DoublyStochastic::new(DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, 0.6])).is_ok());
        assert!(DoublyStochastic::new(DMatrix::from_row_slice(2, 2, &[0.6, 0.5, 0.4, 0.6])).is_err());
        assert!(DoublyStochastic::new(DMatrix::from_row_slice(2, 2, &[1.1, -0.1, -0.1, 1.1])).is_err());
    }
}
