//! Joint alignment of a graph set through a common center (Fermat) or through
//! the consistent block matrix of pairwise alignments (G-align).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{permute_graph, DoublyStochastic, GraphSet, LabeledGraph, Permutation};
use crate::linalg::{dot, sym_spectral_norm, symmetrize};
use crate::pairwise::{project_matrix_to_permutation, solve_pairwise, PairAlignConfig, StepRule};
use crate::projection::{block_violation, project_consistent_warm, BlockDuals, ConsistencyOptions};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fermat,
    Galign,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fermat => "fermat",
            Method::Galign => "galign",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fermat" => Ok(Method::Fermat),
            "galign" => Ok(Method::Galign),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Starting center for the Fermat alternating minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FermatInit {
    /// Entrywise mean of the (unaligned) inputs.
    Mean,
    /// The first graph of the set.
    First,
    /// Mean first, then each input graph in turn; keeps the lowest objective.
    Restarts,
}

#[derive(Debug, Clone, Copy)]
pub struct MultiAlignConfig {
    pub method: Method,
    /// Projected-gradient steps (G-align) or alternating rounds (Fermat).
    pub outer_iters: usize,
    /// Frank–Wolfe iterations per alignment update (Fermat).
    pub inner_iters: usize,
    /// Relative objective change that ends the outer loop.
    pub tol: f64,
    /// Binarization threshold τ for the center graph.
    pub threshold: f64,
    /// Ridge ε in the center normal equations (Fermat).
    pub ridge: f64,
    /// Initial projected-gradient step, as a multiple of `1/L`.
    pub step_scale: f64,
    /// Step multiplier after an accepted projected-gradient step (1 keeps it fixed).
    pub step_growth: f64,
    /// Outer Dykstra budget per projection onto the consistency set.
    pub dykstra_iters: usize,
    pub fermat_init: FermatInit,
    pub seed: RngSeed,
}

impl Default for MultiAlignConfig {
    fn default() -> Self {
        Self {
            method: Method::Galign,
            outer_iters: 300,
            inner_iters: 300,
            tol: 1e-7,
            threshold: 0.5,
            ridge: 1e-8,
            step_scale: 1.0,
            step_growth: 2.0,
            dykstra_iters: 50,
            fermat_init: FermatInit::Restarts,
            seed: RngSeed(0),
        }
    }
}

impl MultiAlignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} not in (0, 1)",
                self.threshold
            )));
        }
        if !(self.ridge > 0.0) {
            return Err(Error::InvalidParameter(format!("ridge {} must be > 0", self.ridge)));
        }
        if self.outer_iters == 0 || self.inner_iters == 0 || self.dykstra_iters == 0 {
            return Err(Error::InvalidParameter("iteration budgets must be >= 1".into()));
        }
        if !(self.tol > 0.0) || !(self.step_scale > 0.0) || !(self.step_growth >= 1.0) {
            return Err(Error::InvalidParameter("tol and step scale must be > 0".into()));
        }
        Ok(())
    }
}

/// `n x n` blocks of `m x m` pairwise alignments, stored as one symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAlignment {
    n: usize,
    m: usize,
    mat: DMatrix<f64>,
}

impl BlockAlignment {
    pub fn new(n: usize, m: usize, mat: DMatrix<f64>) -> Result<Self> {
        if mat.shape() != (n * m, n * m) {
            return Err(Error::DimensionMismatch(format!(
                "block matrix {:?} for n={n}, m={m}",
                mat.shape()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let blk = mat.view((i * m, j * m), (m, m));
                let blk_t = mat.view((j * m, i * m), (m, m));
                if blk != blk_t.transpose() {
                    return Err(Error::InvalidParameter(format!("block ({i}, {j}) is not the transpose of ({j}, {i})")));
                }
            }
            if mat.view((i * m, i * m), (m, m)) != DMatrix::<f64>::identity(m, m) {
                return Err(Error::InvalidParameter(format!("diagonal block {i} is not the identity")));
            }
        }
        if block_violation(&mat, n, m) > 1e-6 {
            return Err(Error::NotDoublyStochastic("off-diagonal block infeasible".into()));
        }
        Ok(Self { n, m, mat })
    }

    /// All blocks equal to the identity.
    pub fn identity(n: usize, m: usize) -> Self {
        let mat = DMatrix::from_fn(n * m, n * m, |r, c| if r % m == c % m { 1.0 } else { 0.0 });
        Self { n, m, mat }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Block `P_ij`, aligning graph `i` to graph `j`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.mat.view((i * self.m, j * self.m), (self.m, self.m)).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterEstimate {
    /// Relaxed center with entries in `[0, 1]`.
    pub soft: DMatrix<f64>,
    /// `soft` binarized: entry is 1 iff `soft >= threshold`.
    pub hard: LabeledGraph,
    pub threshold: f64,
}

impl CenterEstimate {
    pub fn from_soft(mut soft: DMatrix<f64>, threshold: f64) -> Result<Self> {
        symmetrize(&mut soft);
        soft.apply(|v| *v = v.clamp(0.0, 1.0));
        let hard = soft.map(|v| if v >= threshold { 1.0 } else { 0.0 });
        Ok(Self {
            hard: LabeledGraph::new(hard, None)?,
            soft,
            threshold,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MultiAlignResult {
    /// Graph `i` → frame of graph 0; element 0 is the identity.
    pub permutations: Vec<Permutation>,
    /// Squared relaxed objective at the returned alignments.
    pub relaxed_objective: f64,
    /// Center graph in the frame of graph 0.
    pub center: CenterEstimate,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relaxed block matrix (G-align only).
    pub blocks: Option<BlockAlignment>,
}

pub fn align(set: &GraphSet, cfg: &MultiAlignConfig) -> Result<MultiAlignResult> {
    match cfg.method {
        Method::Fermat => fermat_align(set, cfg),
        Method::Galign => galign(set, cfg),
    }
}

fn adjacencies(set: &GraphSet) -> Vec<DMatrix<f64>> {
    set.graphs.iter().map(|g| g.adj().clone()).collect()
}

/// `Σ ‖A_i P_i − P_i A₀‖²_F`.
pub fn fermat_objective(adjs: &[DMatrix<f64>], ps: &[DMatrix<f64>], center: &DMatrix<f64>) -> f64 {
    adjs.iter()
        .zip(ps)
        .map(|(a, p)| (a * p - p * center).norm_squared())
        .sum()
}

struct FermatRun {
    ps: Vec<DMatrix<f64>>,
    center: DMatrix<f64>,
    objective: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Fermat distance by alternating minimization between the center `A₀`
/// (ridge least squares, symmetrized and clamped to `[0, 1]`) and the
/// per-graph alignments (Frank–Wolfe, warm-started).
pub fn fermat_align(set: &GraphSet, cfg: &MultiAlignConfig) -> Result<MultiAlignResult> {
    cfg.validate()?;
    let m = set.require_common_size(2)?;
    let n = set.len();
    let adjs = adjacencies(set);
    let mean = adjs.iter().fold(DMatrix::zeros(m, m), |s, a| s + a) / n as f64;
    let starts: Vec<DMatrix<f64>> = match cfg.fermat_init {
        FermatInit::Mean => vec![mean],
        FermatInit::First => vec![adjs[0].clone()],
        FermatInit::Restarts => std::iter::once(mean).chain(adjs.iter().cloned()).collect(),
    };

    let mut best: Option<FermatRun> = None;
    for start in starts {
        let run = fermat_run(&adjs, start, cfg)?;
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
        if best.as_ref().is_some_and(|b| b.objective <= 1e-14) {
            break;
        }
    }
    let run = best.expect("at least one start");

    // graph i → center frame, re-expressed as graph i → graph 0 frame
    let to_center: Vec<Permutation> = run.ps.iter().map(project_matrix_to_permutation).collect();
    let back = to_center[0].inverse();
    let permutations: Vec<Permutation> = to_center.iter().map(|p| p.then(&back)).collect();
    let src = to_center[0].as_slice();
    let soft = DMatrix::from_fn(m, m, |x, y| run.center[(src[x], src[y])]);
    Ok(MultiAlignResult {
        permutations,
        relaxed_objective: run.objective,
        center: CenterEstimate::from_soft(soft, cfg.threshold)?,
        objective_trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        blocks: None,
    })
}

fn fermat_run(adjs: &[DMatrix<f64>], mut center: DMatrix<f64>, cfg: &MultiAlignConfig) -> Result<FermatRun> {
    let m = center.nrows();
    let mut ps: Vec<DMatrix<f64>> = vec![DMatrix::identity(m, m); adjs.len()];
    let inner = PairAlignConfig {
        beta: 0.0,
        max_iters: cfg.inner_iters,
        tol: cfg.tol,
        step_rule: StepRule::LineSearch,
    };

    let mut obj = fermat_objective(adjs, &ps, &center);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    for t in 0..cfg.outer_iters {
        iterations = t + 1;
        let before = obj;

        let updated: Result<Vec<DMatrix<f64>>> = adjs
            .par_iter()
            .zip(ps.par_iter())
            .map(|(a, p)| Ok(solve_pairwise(a, &center, None, &inner, Some(p))?.alignment.into_matrix()))
            .collect();
        ps = updated?;
        obj = fermat_objective(adjs, &ps, &center);
        trace.push(obj);

        center = update_center(adjs, &ps, &center, cfg.ridge, t)?;
        obj = fermat_objective(adjs, &ps, &center);
        trace.push(obj);

        if obj <= 1e-14 || (before - obj).abs() <= cfg.tol * before.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    // The rounded alignments with their optimal center are feasible too.
    let rounded: Vec<DMatrix<f64>> = ps
        .iter()
        .map(|p| project_matrix_to_permutation(p).to_matrix())
        .collect();
    let rounded_center = update_center(adjs, &rounded, &center, cfg.ridge, iterations)?;
    let rounded_obj = fermat_objective(adjs, &rounded, &rounded_center);
    if rounded_obj < obj {
        ps = rounded;
        center = rounded_center;
        obj = rounded_obj;
        trace.push(obj);
    }
    Ok(FermatRun {
        ps,
        center,
        objective: obj,
        trace,
        iterations,
        converged,
    })
}

/// Center step: `(Σ PᵢᵀPᵢ + εI)⁻¹ Σ PᵢᵀAᵢPᵢ`, symmetrized and clamped, then an
/// exact line search from the previous center so the objective never rises.
fn update_center(
    adjs: &[DMatrix<f64>],
    ps: &[DMatrix<f64>],
    prev: &DMatrix<f64>,
    ridge: f64,
    iteration: usize,
) -> Result<DMatrix<f64>> {
    let m = prev.nrows();
    let mut gram = DMatrix::<f64>::identity(m, m) * ridge;
    let mut rhs = DMatrix::<f64>::zeros(m, m);
    for (a, p) in adjs.iter().zip(ps) {
        let pt = p.transpose();
        gram += &pt * p;
        rhs += &pt * a * p;
    }
    let chol = gram.cholesky().ok_or(Error::SingularSystem { iteration })?;
    let mut cand = chol.solve(&rhs);
    if cand.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { iteration });
    }
    symmetrize(&mut cand);
    cand.apply(|v| *v = v.clamp(0.0, 1.0));

    let dir = &cand - prev;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, p) in adjs.iter().zip(ps) {
        let resid = a * p - p * prev;
        let pd = p * &dir;
        num += dot(&resid, &pd);
        den += pd.norm_squared();
    }
    let gamma = if den <= f64::MIN_POSITIVE { 1.0 } else { (num / den).clamp(0.0, 1.0) };
    Ok(prev + dir * gamma)
}

/// `Σ_{i<j} ‖A_i P_ij − P_ij A_j‖²_F`, equal to `½ Σ_{i,j}` for a symmetric block matrix.
pub fn galign_objective(adjs: &[DMatrix<f64>], p: &DMatrix<f64>) -> f64 {
    let n = adjs.len();
    let m = adjs.first().map_or(0, |a| a.nrows());
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let blk = p.view((i * m, j * m), (m, m));
            total += (&adjs[i] * blk - blk * &adjs[j]).norm_squared();
        }
    }
    total
}

fn galign_gradient(adjs: &[DMatrix<f64>], p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adjs.len();
    let m = adjs[0].nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let blocks: Vec<DMatrix<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let blk = p.view((i * m, j * m), (m, m));
            let resid = &adjs[i] * blk - blk * &adjs[j];
            adjs[i].transpose() * &resid - &resid * adjs[j].transpose()
        })
        .collect();
    let mut grad = DMatrix::zeros(n * m, n * m);
    for (&(i, j), g) in pairs.iter().zip(&blocks) {
        grad.view_mut((i * m, j * m), (m, m)).copy_from(g);
        grad.view_mut((j * m, i * m), (m, m)).copy_from(&g.transpose());
    }
    grad
}

/// Relaxed G-align distance by projected gradient over the consistent block
/// matrices (blocks doubly stochastic, diagonal blocks `I`, whole matrix PSD).
pub fn galign(set: &GraphSet, cfg: &MultiAlignConfig) -> Result<MultiAlignResult> {
    cfg.validate()?;
    let m = set.require_common_size(2)?;
    let n = set.len();
    let adjs = adjacencies(set);
    let proj = ConsistencyOptions {
        max_iters: cfg.dykstra_iters,
        ..ConsistencyOptions::default()
    };

    let mut p = BlockAlignment::identity(n, m).mat;
    let mut duals = BlockDuals::new(n, m);
    let mut obj = galign_objective(&adjs, &p);
    let mut trace = vec![obj];
    let lipschitz = 2.0 * adjs
        .iter()
        .map(|a| sym_spectral_norm(a).map(|s| s * s))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut step = if lipschitz > 0.0 { cfg.step_scale / lipschitz } else { 0.0 };
    let mut converged = obj == 0.0 || step == 0.0;
    let mut iterations = 0;

    while !converged && iterations < cfg.outer_iters {
        iterations += 1;
        let grad = galign_gradient(&adjs, &p);
        let mut accepted = None;
        for _ in 0..30 {
            let cand = project_consistent_warm(&(&p - &grad * step), n, m, proj, &mut duals)?;
            let cand_obj = galign_objective(&adjs, &cand);
            if cand_obj <= obj {
                accepted = Some((cand, cand_obj));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_obj)) = accepted else {
            converged = true;
            break;
        };
        let decrease = obj - cand_obj;
        step *= cfg.step_growth;
        p = cand;
        obj = cand_obj;
        trace.push(obj);
        if obj <= 1e-14 || decrease <= cfg.tol * (obj + decrease).max(f64::MIN_POSITIVE) {
            converged = true;
        }
    }

    let blocks = BlockAlignment { n, m, mat: p };
    let permutations = extract_alignments(&blocks);
    let aligned = align_set(set, &permutations)?;
    let center = center_graph(&aligned, cfg.threshold)?;
    Ok(MultiAlignResult {
        permutations,
        relaxed_objective: obj,
        center,
        objective_trace: trace,
        iterations,
        converged,
        blocks: Some(blocks),
    })
}

/// Projects the first block column `P_i1` to permutations (graph `i` → graph 0).
pub fn extract_alignments(b: &BlockAlignment) -> Vec<Permutation> {
    (0..b.n)
        .map(|i| project_matrix_to_permutation(&b.block(i, 0)))
        .collect()
}

/// Replaces graph `i` by `P̃ᵢᵀ Aᵢ P̃ᵢ` (features permuted alike).
pub fn align_set(set: &GraphSet, perms: &[Permutation]) -> Result<GraphSet> {
    if perms.len() != set.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} permutations for {} graphs",
            perms.len(),
            set.len()
        )));
    }
    let graphs = set
        .graphs
        .iter()
        .zip(perms)
        .map(|(g, p)| permute_graph(g, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphSet::new(set.name.clone(), graphs))
}

/// Composed alignment `P̃_ij = P̃_i1 P̃_j1ᵀ` (graph `i` → graph `j`).
pub fn compose_pair(perms: &[Permutation], i: usize, j: usize) -> Permutation {
    perms[i].then(&perms[j].inverse())
}

/// Entrywise-clamped geometric median of equal-shape matrices under the
/// Frobenius norm (Weiszfeld iterations from the mean). Two or fewer inputs
/// return the mean.
pub fn geometric_median(mats: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let (r, c) = mats[0].shape();
    let n = mats.len() as f64;
    let mut cur = mats.iter().fold(DMatrix::zeros(r, c), |s, a| s + *a) / n;
    if mats.len() <= 2 {
        return cur;
    }
    for _ in 0..10_000 {
        let mut num = DMatrix::<f64>::zeros(r, c);
        let mut den = 0.0;
        for a in mats {
            let w = 1.0 / (*a - &cur).norm().max(1e-12);
            num += *a * w;
            den += w;
        }
        let mut next = num / den;
        next.apply(|v| *v = v.clamp(0.0, 1.0));
        let change = (&next - &cur).norm() / cur.norm().max(1e-12);
        cur = next;
        if change < 1e-9 {
            break;
        }
    }
    cur
}

/// Center of an aligned set: `argmin Σ ‖Ãᵢ − A₀‖_F` over `A₀ ∈ [0,1]^{m×m}`,
/// then binarized at `tau`.
pub fn center_graph(aligned: &GraphSet, tau: f64) -> Result<CenterEstimate> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {tau} not in (0, 1)")));
    }
    aligned.require_common_size(1)?;
    let mats: Vec<&DMatrix<f64>> = aligned.graphs.iter().map(LabeledGraph::adj).collect();
    CenterEstimate::from_soft(geometric_median(&mats), tau)
}

impl MultiAlignResult {
    /// Relaxed alignments `P_i1` are only available for G-align.
    pub fn relaxed_first_column(&self) -> Option<Vec<DoublyStochastic>> {
        let b = self.blocks.as_ref()?;
        Some((0..b.n).map(|i| DoublyStochastic::new_unchecked(b.block(i, 0))).collect())
    }
}
