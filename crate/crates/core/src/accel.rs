//! Accelerated multi-graph alignment.
//!
//! G-Parallel aligns consecutive groups of `K` graphs on a worker pool and
//! recurses on the group centers. C-Serial aligns coarsened graphs first and
//! then the matched clusters. CG-Parallel is G-Parallel with C-Serial inside
//! each group.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assignment;
use crate::coarsen::{coarsen, Coarsening};
use crate::error::{Error, Result};
use crate::graph::{permute_graph, GraphSet, LabeledGraph, Permutation};
use crate::multi::{align, align_set, geometric_median, CenterEstimate, MultiAlignConfig};
use crate::pairwise::{project_matrix_to_permutation, solve_pairwise, PairAlignConfig};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy)]
pub struct AccelConfig {
    /// Group size `K` for the grouped schemes.
    pub group_size: usize,
    /// Clusters per graph for the coarsened schemes.
    pub clusters: usize,
    /// Threads in the worker pool.
    pub workers: usize,
    /// Solver used within groups, on coarse graphs and on clusters.
    pub inner: MultiAlignConfig,
    /// Pairwise solver for cluster refinement and for aligning graphs to a center.
    pub pairwise: PairAlignConfig,
    /// Edge weight of dummy nodes added when matched clusters differ in size.
    pub dummy_weight: f64,
    pub seed: RngSeed,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self {
            group_size: 4,
            clusters: 2,
            workers: 1,
            inner: MultiAlignConfig::default(),
            pairwise: PairAlignConfig::default(),
            dummy_weight: 0.01,
            seed: RngSeed(0),
        }
    }
}

impl AccelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "group size {} must be >= 2",
                self.group_size
            )));
        }
        if self.clusters == 0 {
            return Err(Error::InvalidParameter("clusters must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dummy_weight) {
            return Err(Error::InvalidParameter(format!(
                "dummy weight {} not in [0, 1]",
                self.dummy_weight
            )));
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageReport {
    pub groups: usize,
    /// Wall time of the stage.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AccelResult {
    /// The output center `𝒢₀_out`.
    pub center: CenterEstimate,
    pub stages: Vec<StageReport>,
    /// Binarized centers produced by each stage; the last entry holds the output.
    pub stage_centers: Vec<Vec<LabeledGraph>>,
    /// Graph `i` → frame of the output center, chained through every stage.
    /// The output frame is that of graph 0.
    pub permutations: Vec<Permutation>,
    /// Every inner solve met its tolerance.
    pub converged: bool,
}

impl AccelResult {
    /// Sum of the per-stage wall times.
    pub fn alignment_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    Direct,
    Coarse,
}

struct GroupOutcome {
    center: CenterEstimate,
    permutations: Vec<Permutation>,
    converged: bool,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))
}

fn check_input(set: &GraphSet, cfg: &AccelConfig, scheme: Scheme) -> Result<usize> {
    cfg.validate()?;
    let m = set.require_common_size(1)?;
    if scheme == Scheme::Coarse && cfg.clusters > m {
        return Err(Error::InvalidParameter(format!(
            "{} clusters exceed the graph size {m}",
            cfg.clusters
        )));
    }
    Ok(m)
}

/// The inner method on the whole set, run on the worker pool as one stage.
pub fn direct(set: &GraphSet, cfg: &AccelConfig) -> Result<AccelResult> {
    single_stage(set, cfg, Scheme::Direct)
}

pub fn g_parallel(set: &GraphSet, cfg: &AccelConfig) -> Result<AccelResult> {
    grouped(set, cfg, Scheme::Direct)
}

pub fn cg_parallel(set: &GraphSet, cfg: &AccelConfig) -> Result<AccelResult> {
    grouped(set, cfg, Scheme::Coarse)
}

pub fn c_serial(set: &GraphSet, cfg: &AccelConfig) -> Result<AccelResult> {
    single_stage(set, cfg, Scheme::Coarse)
}

fn single_stage(set: &GraphSet, cfg: &AccelConfig, scheme: Scheme) -> Result<AccelResult> {
    check_input(set, cfg, scheme)?;
    pool(cfg.workers)?.install(|| {
        let start = Instant::now();
        let out = group_center(set, cfg, scheme)?;
        Ok(AccelResult {
            stage_centers: vec![vec![out.center.hard.clone()]],
            center: out.center,
            stages: vec![StageReport {
                groups: 1,
                seconds: start.elapsed().as_secs_f64(),
            }],
            permutations: out.permutations,
            converged: out.converged,
        })
    })
}

fn grouped(set: &GraphSet, cfg: &AccelConfig, scheme: Scheme) -> Result<AccelResult> {
    check_input(set, cfg, scheme)?;
    let k = cfg.group_size;
    pool(cfg.workers)?.install(|| {
        let mut current = set.graphs.clone();
        // Graph i sits at `owner[i]` in `current`; `perms[i]` maps it there.
        let mut owner: Vec<usize> = (0..set.len()).collect();
        let mut perms: Vec<Permutation> = set.graphs.iter().map(|g| Permutation::identity(g.m())).collect();
        let mut stages = Vec::new();
        let mut stage_centers = Vec::new();
        let mut converged = true;
        loop {
            let stage = stages.len() + 1;
            let start = Instant::now();
            if current.len() <= k {
                let group = GraphSet::new(set.name.clone(), current);
                let out = group_center(&group, cfg, scheme)
                    .map_err(|e| e.within(format!("stage {stage}, final group")))?;
                stages.push(StageReport {
                    groups: 1,
                    seconds: start.elapsed().as_secs_f64(),
                });
                stage_centers.push(vec![out.center.hard.clone()]);
                let permutations = perms
                    .iter()
                    .zip(&owner)
                    .map(|(p, &o)| p.then(&out.permutations[o]))
                    .collect();
                return Ok(AccelResult {
                    center: out.center,
                    permutations,
                    stages,
                    stage_centers,
                    converged: converged && out.converged,
                });
            }
            let groups: Vec<GraphSet> = current
                .chunks(k)
                .map(|c| GraphSet::new(set.name.clone(), c.to_vec()))
                .collect();
            let outs = groups
                .par_iter()
                .enumerate()
                .map(|(g, group)| {
                    group_center(group, cfg, scheme)
                        .map_err(|e| e.within(format!("stage {stage}, group {g}")))
                })
                .collect::<Vec<_>>()
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            stages.push(StageReport {
                groups: groups.len(),
                seconds: start.elapsed().as_secs_f64(),
            });
            converged &= outs.iter().all(|o| o.converged);
            for (p, o) in perms.iter_mut().zip(owner.iter_mut()) {
                *p = p.then(&outs[*o / k].permutations[*o % k]);
                *o /= k;
            }
            current = outs.into_iter().map(|o| o.center.hard).collect();
            stage_centers.push(current.clone());
        }
    })
}

fn group_center(group: &GraphSet, cfg: &AccelConfig, scheme: Scheme) -> Result<GroupOutcome> {
    if group.len() == 1 {
        let g = &group.graphs[0];
        return Ok(GroupOutcome {
            center: CenterEstimate::from_soft(g.adj().clone(), cfg.inner.threshold)?,
            permutations: vec![Permutation::identity(g.m())],
            converged: true,
        });
    }
    if scheme == Scheme::Direct || cfg.clusters == 1 {
        let res = align(group, &cfg.inner)?;
        return Ok(GroupOutcome {
            center: res.center,
            permutations: res.permutations,
            converged: res.converged,
        });
    }
    coarse_then_refine(group, cfg)
}

/// Matched clusters of one graph: `members[k]` are the nodes of the cluster
/// matched to graph 0's cluster `k`, and `sigma[k]` maps their padded
/// positions to padded positions of graph 0's cluster.
struct ClusterMatch {
    members: Vec<Vec<usize>>,
    sigma: Vec<Permutation>,
}

fn coarse_then_refine(set: &GraphSet, cfg: &AccelConfig) -> Result<GroupOutcome> {
    let n = set.len();
    let m = set.require_common_size(1)?;
    let c = cfg.clusters;
    let coarse: Vec<Coarsening> = set
        .graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| coarsen(g, c, cfg.seed).map_err(|e| e.within(format!("coarsening graph {i}"))))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let coarse_set = GraphSet::new(
        format!("{}-coarse", set.name),
        coarse.iter().map(|co| co.coarse.clone()).collect(),
    );
    let coarse_res = align(&coarse_set, &cfg.inner).map_err(|e| e.within("coarse alignment"))?;
    let converged = coarse_res.converged;

    let mut matches: Vec<ClusterMatch> = coarse
        .iter()
        .zip(&coarse_res.permutations)
        .map(|(co, pi)| {
            let inv = pi.inverse();
            ClusterMatch {
                members: (0..c).map(|k| co.members(inv.image(k))).collect(),
                sigma: Vec::new(),
            }
        })
        .collect();
    let sizes: Vec<Vec<usize>> = matches
        .iter()
        .map(|x| (0..c).map(|k| x.members[k].len().max(matches[0].members[k].len())).collect())
        .collect();
    for (x, s) in matches.iter_mut().zip(&sizes) {
        x.sigma = s.iter().map(|&n| Permutation::identity(n)).collect();
    }

    let (first, rest) = matches.split_at_mut(1);
    let reference = &first[0];
    let a0 = set.graphs[0].adj();
    rest.par_iter_mut()
        .zip(set.graphs[1..].par_iter())
        .enumerate()
        .try_for_each(|(i, (x, g))| {
            match_clusters(g.adj(), x, a0, reference, cfg)
                .map_err(|e| e.within(format!("graph {}", i + 1)))
        })?;

    let perms = std::iter::once(Ok(Permutation::identity(m)))
        .chain(
            matches[1..]
                .iter()
                .zip(&set.graphs[1..])
                .map(|(x, g)| compose(g.adj(), x, a0, &matches[0], m)),
        )
        .collect::<Result<Vec<_>>>()?;

    let aligned = align_set(set, &perms)?;
    let frame = &matches[0].members;
    let mut soft = DMatrix::zeros(m, m);
    for r in 0..c {
        for s in r..c {
            let (rows, cols) = (&frame[r], &frame[s]);
            let blocks: Vec<DMatrix<f64>> = aligned
                .graphs
                .iter()
                .map(|g| DMatrix::from_fn(rows.len(), cols.len(), |a, b| g.adj()[(rows[a], cols[b])]))
                .collect();
            let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
            let med = geometric_median(&refs);
            for (a, &u) in rows.iter().enumerate() {
                for (b, &v) in cols.iter().enumerate() {
                    soft[(u, v)] = med[(a, b)];
                    soft[(v, u)] = med[(a, b)];
                }
            }
        }
    }
    debug_assert_eq!(n, perms.len());
    Ok(GroupOutcome {
        center: CenterEstimate::from_soft(soft, cfg.inner.threshold)?,
        permutations: perms,
        converged,
    })
}

/// Matched real node pairs `(node of graph i, node of graph 0)` in the clusters `use_cluster` accepts.
fn anchors(x: &ClusterMatch, reference: &ClusterMatch, use_cluster: impl Fn(usize) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..x.members.len() {
        if !use_cluster(r) {
            continue;
        }
        let inv = x.sigma[r].inverse();
        for (b, &v) in reference.members[r].iter().enumerate() {
            let a = inv.image(b);
            if let Some(&u) = x.members[r].get(a) {
                out.push((u, v));
            }
        }
    }
    out
}

/// `D[a, b]`: distance between the connection profiles of `rows[a]` in `ai`
/// and `cols[b]` in `a0` towards the anchors. Missing entries (dummies) have
/// an all-zero profile.
fn profile_cost(
    ai: &DMatrix<f64>,
    rows: &[Option<usize>],
    a0: &DMatrix<f64>,
    cols: &[Option<usize>],
    anchors: &[(usize, usize)],
) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        anchors
            .iter()
            .map(|&(ui, u0)| {
                let p = rows[a].map_or(0.0, |x| ai[(x, ui)]);
                let q = cols[b].map_or(0.0, |y| a0[(y, u0)]);
                (p - q).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    })
}

fn padded(members: &[usize], size: usize) -> Vec<Option<usize>> {
    (0..size).map(|a| members.get(a).copied()).collect()
}

fn permuted_objective(a: &DMatrix<f64>, b: &DMatrix<f64>, d: &DMatrix<f64>, beta: f64, p: &Permutation) -> f64 {
    let s = a.nrows();
    let mut f = 0.0;
    for x in 0..s {
        for y in 0..s {
            f += (a[(x, y)] - b[(p.image(x), p.image(y))]).powi(2);
        }
        f += beta * d[(x, p.image(x))];
    }
    f
}

/// Star-pattern matching of graph `i`'s clusters to graph 0's. The first pass
/// visits clusters in order, with a dissimilarity built from edges towards
/// the clusters matched so far. The second pass re-solves each cluster
/// against all others and keeps a result only if it lowers the objective, so
/// that symmetric clusters are not matched by an automorphism that fails to
/// extend to the whole graph.
fn match_clusters(
    ai: &DMatrix<f64>,
    x: &mut ClusterMatch,
    a0: &DMatrix<f64>,
    reference: &ClusterMatch,
    cfg: &AccelConfig,
) -> Result<()> {
    let c = x.members.len();
    for polish in [false, true] {
        for k in 0..c {
            let size = x.sigma[k].len();
            if size < 2 {
                continue;
            }
            let anchor = if polish {
                anchors(x, reference, |r| r != k)
            } else {
                anchors(x, reference, |r| r < k)
            };
            if polish && anchor.is_empty() {
                continue;
            }
            let rows = padded(&x.members[k], size);
            let cols = padded(&reference.members[k], size);
            let sub = |adj: &DMatrix<f64>, idx: &[Option<usize>]| {
                DMatrix::from_fn(size, size, |a, b| match (idx[a], idx[b]) {
                    (Some(u), Some(v)) => adj[(u, v)],
                    _ if a == b => 0.0,
                    _ => cfg.dummy_weight,
                })
            };
            let (si, s0) = (sub(ai, &rows), sub(a0, &cols));
            let d = profile_cost(ai, &rows, a0, &cols, &anchor);
            let current = &x.sigma[k];
            let init = polish.then(|| current.to_matrix());
            let res = solve_pairwise(&si, &s0, Some(&d), &cfg.pairwise, init.as_ref())
                .map_err(|e| e.within(format!("cluster {k}")))?;
            let candidate = project_matrix_to_permutation(res.alignment.matrix());
            let beta = cfg.pairwise.beta;
            if !polish
                || permuted_objective(&si, &s0, &d, beta, &candidate)
                    < permuted_objective(&si, &s0, &d, beta, current)
            {
                x.sigma[k] = candidate;
            }
        }
    }
    Ok(())
}

/// Full node permutation of graph `i` into graph 0's labels. Nodes matched to
/// a dummy are assigned to the unclaimed labels by profile similarity.
fn compose(
    ai: &DMatrix<f64>,
    x: &ClusterMatch,
    a0: &DMatrix<f64>,
    reference: &ClusterMatch,
    m: usize,
) -> Result<Permutation> {
    let mut perm = vec![usize::MAX; m];
    let mut claimed = vec![false; m];
    let mut overflow = Vec::new();
    for k in 0..x.members.len() {
        for (a, &u) in x.members[k].iter().enumerate() {
            match reference.members[k].get(x.sigma[k].image(a)) {
                Some(&v) => {
                    perm[u] = v;
                    claimed[v] = true;
                }
                None => overflow.push(u),
            }
        }
    }
    if !overflow.is_empty() {
        let free: Vec<usize> = (0..m).filter(|&v| !claimed[v]).collect();
        let anchor: Vec<(usize, usize)> = (0..m)
            .filter(|&u| perm[u] != usize::MAX)
            .map(|u| (u, perm[u]))
            .collect();
        let rows: Vec<Option<usize>> = overflow.iter().map(|&u| Some(u)).collect();
        let cols: Vec<Option<usize>> = free.iter().map(|&v| Some(v)).collect();
        let cost = profile_cost(ai, &rows, a0, &cols, &anchor);
        let assigned = assignment::solve(&cost)?;
        for (a, &u) in overflow.iter().enumerate() {
            perm[u] = free[assigned.perm.image(a)];
        }
    }
    Permutation::new(perm)
}

/// Aligns every graph to `center` with the pairwise solver: graph `i` → center labels.
pub fn align_to_center(
    set: &GraphSet,
    center: &LabeledGraph,
    pairwise: &PairAlignConfig,
    workers: usize,
) -> Result<Vec<Permutation>> {
    pool(workers)?.install(|| {
        set.graphs
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                if g.m() != center.m() {
                    return Err(Error::DimensionMismatch(format!(
                        "graph {i} has {} nodes, center has {}",
                        g.m(),
                        center.m()
                    )));
                }
                let res = solve_pairwise(g.adj(), center.adj(), None, pairwise, None)
                    .map_err(|e| e.within(format!("aligning graph {i} to the center")))?;
                Ok(project_matrix_to_permutation(res.alignment.matrix()))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}

/// `(1/n) Σ ‖P̃ᵢᵀAᵢP̃ᵢ − A₀‖_F / ‖A₁‖_F`, with `A₁` the first graph of the set.
pub fn d0_score(set: &GraphSet, perms: &[Permutation], center: &LabeledGraph) -> Result<f64> {
    if set.is_empty() || perms.len() != set.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} permutations for {} graphs",
            perms.len(),
            set.len()
        )));
    }
    let denom = set.graphs[0].norm();
    if denom == 0.0 {
        return Err(Error::InvalidGraph("first graph has no edges; d0 is undefined".into()));
    }
    let mut total = 0.0;
    for (i, (g, p)) in set.graphs.iter().zip(perms).enumerate() {
        if g.m() != center.m() {
            return Err(Error::DimensionMismatch(format!(
                "graph {i} has {} nodes, center has {}",
                g.m(),
                center.m()
            )));
        }
        total += (permute_graph(g, p)?.adj() - center.adj()).norm();
    }
    Ok(total / set.len() as f64 / denom)
}
