//! Pairwise graph distance over doubly stochastic alignments.
//!
//! The solver minimizes `f(P) = ‖AP − PB‖²_F + β·tr(PᵀD)` over the Birkhoff
//! polytope by Frank–Wolfe, starting from the identity. The linear
//! minimization oracle is a linear assignment on the gradient. The reported
//! distance re-evaluates `‖AP − PB‖_F + β·tr(PᵀD)` at the final iterate.

use nalgebra::DMatrix;

use crate::assignment;
use crate::error::{Error, Result};
use crate::graph::{DoublyStochastic, LabeledGraph, Permutation};
use crate::linalg::dot;

/// Node embeddings, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(DMatrix<f64>);

impl Embedding {
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("embedding has non-finite entries".into()));
        }
        Ok(Self(z))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }
}

/// `D[a, b]` = Euclidean distance between node `a` of one graph and node `b` of the other.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissimilarity(DMatrix<f64>);

impl Dissimilarity {
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        if d.nrows() != d.ncols() {
            return Err(Error::DimensionMismatch("dissimilarity must be square".into()));
        }
        if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "dissimilarity entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(d))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

fn check_same_shape(za: &Embedding, zb: &Embedding) -> Result<()> {
    if za.0.shape() != zb.0.shape() {
        return Err(Error::DimensionMismatch(format!(
            "embeddings are {:?} and {:?}",
            za.0.shape(),
            zb.0.shape()
        )));
    }
    Ok(())
}

fn row_distance(za: &DMatrix<f64>, a: usize, zb: &DMatrix<f64>, b: usize) -> f64 {
    (0..za.ncols())
        .map(|k| (za[(a, k)] - zb[(b, k)]).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn node_dissimilarity(za: &Embedding, zb: &Embedding) -> Result<Dissimilarity> {
    check_same_shape(za, zb)?;
    let m = za.rows();
    Ok(Dissimilarity(DMatrix::from_fn(m, m, |a, b| {
        row_distance(&za.0, a, &zb.0, b)
    })))
}

/// `Σ_a ‖zi[a] − z0[a]‖₂`, the trace of the node dissimilarity between the two embeddings.
pub fn joint_embedding_penalty(zi: &Embedding, z0: &Embedding) -> Result<f64> {
    check_same_shape(zi, z0)?;
    Ok((0..zi.rows()).map(|a| row_distance(&zi.0, a, &z0.0, a)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `γ_t = 2 / (t + 2)`.
    Diminishing,
    /// Exact minimization of the quadratic along the Frank–Wolfe direction.
    LineSearch,
}

#[derive(Debug, Clone, Copy)]
pub struct PairAlignConfig {
    pub beta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub step_rule: StepRule,
}

impl Default for PairAlignConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            max_iters: 2000,
            tol: 1e-7,
            step_rule: StepRule::LineSearch,
        }
    }
}

impl PairAlignConfig {
    fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta {} must be >= 0", self.beta)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol {} must be > 0", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PairAlignResult {
    /// `‖AP − PB‖_F + β·tr(PᵀD)` at the returned alignment.
    pub distance: f64,
    pub alignment: DoublyStochastic,
    pub iterations: usize,
    /// Solver objective `‖AP − PB‖²_F + β·tr(PᵀD)` after each iterate.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl PairAlignResult {
    /// Final value of the (squared) solver objective.
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Relaxed distance between two equal-size graphs.
pub fn pairwise_distance(
    a: &LabeledGraph,
    b: &LabeledGraph,
    d: Option<&Dissimilarity>,
    cfg: &PairAlignConfig,
) -> Result<PairAlignResult> {
    if a.m() != b.m() {
        return Err(Error::DimensionMismatch(format!(
            "graphs have {} and {} nodes",
            a.m(),
            b.m()
        )));
    }
    solve_pairwise(a.adj(), b.adj(), d.map(Dissimilarity::matrix), cfg, None)
}

/// `(A S)` for a permutation matrix `S`: column `perm[x]` of the result is column `x` of `A`.
fn mul_right_perm(a: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let m = a.nrows();
    let mut out = DMatrix::zeros(m, m);
    for (x, &y) in perm.iter().enumerate() {
        out.set_column(y, &a.column(x));
    }
    out
}

/// `(S B)` for a permutation matrix `S`: row `x` of the result is row `perm[x]` of `B`.
fn mul_left_perm(perm: &[usize], b: &DMatrix<f64>) -> DMatrix<f64> {
    let m = b.nrows();
    let mut out = DMatrix::zeros(m, m);
    for (x, &y) in perm.iter().enumerate() {
        out.set_row(x, &b.row(y));
    }
    out
}

/// Frank–Wolfe on adjacency matrices, optionally warm-started from `init`
/// (which must be doubly stochastic).
pub fn solve_pairwise(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: Option<&DMatrix<f64>>,
    cfg: &PairAlignConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<PairAlignResult> {
    cfg.validate()?;
    let m = a.nrows();
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "adjacency shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if let Some(d) = d {
        if d.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!(
                "dissimilarity is {:?}, graphs have {m} nodes",
                d.shape()
            )));
        }
    }
    let beta = if d.is_some() { cfg.beta } else { 0.0 };
    let linear = |p: &DMatrix<f64>| d.map_or(0.0, |d| beta * dot(p, d));

    let mut p = match init {
        Some(p0) => p0.clone(),
        None => DMatrix::identity(m, m),
    };
    let mut resid = a * &p - &p * b;
    let mut f = resid.norm_squared() + linear(&p);
    let mut trace = vec![f];
    let mut best = (f, p.clone());
    let mut converged = false;
    let mut iterations = 0;
    let at = a.transpose();
    let bt = b.transpose();

    for t in 0..cfg.max_iters {
        if f == 0.0 {
            converged = true;
            break;
        }
        let mut grad = (&at * &resid - &resid * &bt) * 2.0;
        if let Some(d) = d {
            grad += d * beta;
        }
        let vertex = assignment::solve(&grad)?.perm;
        let s = vertex.as_slice();
        let grad_at_vertex: f64 = s.iter().enumerate().map(|(x, &y)| grad[(x, y)]).sum();
        let gap = dot(&p, &grad) - grad_at_vertex;
        if gap < cfg.tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        let resid_vertex = mul_right_perm(a, s) - mul_left_perm(s, b);
        let resid_dir = &resid_vertex - &resid;
        let mut dir_linear = -linear(&p);
        if let Some(d) = d {
            dir_linear += beta * s.iter().enumerate().map(|(x, &y)| d[(x, y)]).sum::<f64>();
        }
        let gamma = match cfg.step_rule {
            StepRule::Diminishing => 2.0 / (t as f64 + 2.0),
            StepRule::LineSearch => {
                let denom = resid_dir.norm_squared();
                let slope = dot(&resid, &resid_dir) + 0.5 * dir_linear;
                if denom < 1e-14 {
                    if slope < 0.0 {
                        1.0
                    } else {
                        converged = true;
                        break;
                    }
                } else {
                    (-slope / denom).clamp(0.0, 1.0)
                }
            }
        };
        iterations = t + 1;
        // P ← (1 − γ)P + γS
        p *= 1.0 - gamma;
        for (x, &y) in s.iter().enumerate() {
            p[(x, y)] += gamma;
        }
        resid = &resid + &resid_dir * gamma;
        let f_new = resid.norm_squared() + linear(&p);
        trace.push(f_new);
        if f_new < best.0 {
            best = (f_new, p.clone());
        }
        let decrease = f - f_new;
        f = f_new;
        if cfg.step_rule == StepRule::LineSearch && decrease >= 0.0 && decrease < cfg.tol * f.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let p = if cfg.step_rule == StepRule::LineSearch { p } else { best.1 };
    let resid = a * &p - &p * b;
    let distance = resid.norm() + linear(&p);
    Ok(PairAlignResult {
        distance,
        alignment: DoublyStochastic::new_unchecked(p),
        iterations,
        objective_trace: trace,
        converged,
    })
}

/// Nearest permutation in Frobenius norm (maximizes `tr(P̃ᵀP)`), ties broken
/// towards the lexicographically smallest permutation.
pub fn project_to_permutation(p: &DoublyStochastic) -> Permutation {
    project_matrix_to_permutation(p.matrix())
}

pub(crate) fn project_matrix_to_permutation(p: &DMatrix<f64>) -> Permutation {
    let cost = -p;
    assignment::solve_lexicographic(&cost)
        .expect("finite square matrix")
        .perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::permute_graph;

    fn k3() -> LabeledGraph {
        LabeledGraph::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap()
    }

    fn p3() -> LabeledGraph {
        LabeledGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn dissimilarity_examples() {
        let za = Embedding::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0])).unwrap();
        let zb = Embedding::new(DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 1.0, 1.0])).unwrap();
        let d = node_dissimilarity(&za, &zb).unwrap();
        assert_eq!(d.matrix()[(0, 0)], 5.0);
        assert_eq!(d.matrix()[(1, 1)], 0.0);
        let same = node_dissimilarity(&za, &za).unwrap();
        assert!(same.matrix().diagonal().iter().all(|&v| v == 0.0));
        let scaled = node_dissimilarity(
            &Embedding::new(za.matrix() * -3.0).unwrap(),
            &Embedding::new(zb.matrix() * -3.0).unwrap(),
        )
        .unwrap();
        assert!((scaled.matrix() - d.matrix() * 3.0).norm() < 1e-12);
        let bad = Embedding::new(DMatrix::zeros(3, 2)).unwrap();
        assert!(node_dissimilarity(&za, &bad).is_err());
    }

    #[test]
    fn joint_penalty_examples() {
        let zi = Embedding::new(DMatrix::from_row_slice(1, 2, &[3.0, 4.0])).unwrap();
        let z0 = Embedding::new(DMatrix::from_row_slice(1, 2, &[0.0, 0.0])).unwrap();
        assert_eq!(joint_embedding_penalty(&zi, &z0).unwrap(), 5.0);
        assert_eq!(joint_embedding_penalty(&zi, &zi).unwrap(), 0.0);
        let a = Embedding::new(DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        let b = Embedding::new(DMatrix::from_row_slice(3, 2, &[0.0, 2.0, 1.0, 1.0, 5.0, 9.0])).unwrap();
        let rows = [2usize, 0, 1];
        let pa = Embedding::new(DMatrix::from_fn(3, 2, |i, k| a.matrix()[(rows[i], k)])).unwrap();
        let pb = Embedding::new(DMatrix::from_fn(3, 2, |i, k| b.matrix()[(rows[i], k)])).unwrap();
        let v = joint_embedding_penalty(&a, &b).unwrap();
        assert!((joint_embedding_penalty(&pa, &pb).unwrap() - v).abs() < 1e-12);
        let d = node_dissimilarity(&a, &b).unwrap();
        assert!((d.matrix().trace() - v).abs() < 1e-12);
    }

    #[test]
    fn identical_graphs_distance_zero() {
        let g = LabeledGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 3)]).unwrap();
        let r = pairwise_distance(&g, &g, None, &PairAlignConfig::default()).unwrap();
        assert!(r.distance <= 1e-6);
        assert!(r.objective() <= 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn relabeled_path_recovers_isomorphism() {
        let a = p3();
        let swap = Permutation::new(vec![2, 1, 0]).unwrap();
        let b = permute_graph(&LabeledGraph::from_edges(3, &[(0, 1), (0, 2)]).unwrap(), &swap).unwrap();
        // b is the path with middle node relabeled; brute force says a zero-cost permutation exists
        let r = pairwise_distance(&a, &b, None, &PairAlignConfig::default()).unwrap();
        assert!(r.distance <= 1e-6, "distance {}", r.distance);
        let pi = project_to_permutation(&r.alignment);
        assert_eq!(permute_graph(&a, &pi).unwrap().adj(), b.adj());
    }

    #[test]
    fn triangle_vs_path_bounds() {
        let r = pairwise_distance(&k3(), &p3(), None, &PairAlignConfig::default()).unwrap();
        assert!(r.distance <= (2.0f64 / 3.0).sqrt() + 1e-6, "distance {}", r.distance);
        // combinatorial optimum is sqrt(2)
        let mut best = f64::INFINITY;
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let p = Permutation::new(perm.to_vec()).unwrap().to_matrix();
            best = best.min((k3().adj() * &p - &p * p3().adj()).norm());
        }
        assert!((best - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.distance <= best);
    }

    #[test]
    fn line_search_trace_is_monotone() {
        let a = LabeledGraph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2)]).unwrap();
        let b = LabeledGraph::from_edges(6, &[(0, 5), (1, 5), (2, 3), (1, 4), (0, 3), (2, 4)]).unwrap();
        let r = pairwise_distance(&a, &b, None, &PairAlignConfig::default()).unwrap();
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(DoublyStochastic::check(r.alignment.matrix(), 1e-9, 1e-7).is_ok());
    }

    #[test]
    fn diminishing_rule_runs_and_stays_feasible() {
        let cfg = PairAlignConfig {
            step_rule: StepRule::Diminishing,
            max_iters: 200,
            ..Default::default()
        };
        let r = pairwise_distance(&k3(), &p3(), None, &cfg).unwrap();
        assert!(DoublyStochastic::check(r.alignment.matrix(), 1e-9, 1e-7).is_ok());
        assert!(r.distance < 1.0);
    }

    #[test]
    fn dissimilarity_term_steers_alignment() {
        // empty graphs: only the linear term matters, optimum is the assignment on D
        let g = LabeledGraph::empty(3).unwrap();
        let d = Dissimilarity::new(DMatrix::from_row_slice(3, 3, &[5.0, 0.0, 5.0, 5.0, 5.0, 0.0, 0.0, 5.0, 5.0])).unwrap();
        let cfg = PairAlignConfig { beta: 1.0, ..Default::default() };
        let r = pairwise_distance(&g, &g, Some(&d), &cfg).unwrap();
        assert_eq!(project_to_permutation(&r.alignment).as_slice(), &[1, 2, 0]);
        assert!(r.distance.abs() < 1e-9);
    }

    #[test]
    fn projection_examples() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(project_to_permutation(&DoublyStochastic::from_permutation(&p)), p);
        let x = DoublyStochastic::new(DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, 0.6])).unwrap();
        assert!(project_to_permutation(&x).is_identity());
        assert!(project_to_permutation(&DoublyStochastic::uniform(2)).is_identity());
        assert!(project_to_permutation(&DoublyStochastic::uniform(5)).is_identity());
    }

    #[test]
    fn size_mismatch_errors() {
        assert!(pairwise_distance(&k3(), &LabeledGraph::empty(4).unwrap(), None, &PairAlignConfig::default()).is_err());
    }
}
