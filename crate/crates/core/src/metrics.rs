//! Graph statistics and the set-level scores built on them.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Summary statistics of one binary graph. Distribution-valued statistics
/// keep the raw per-node values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatProfile {
    pub degrees: Vec<f64>,
    pub clustering: Vec<f64>,
    pub assortativity: f64,
    pub triangles: u64,
    pub wedges: u64,
    pub claws: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Degree,
    Clustering,
    Assortativity,
    Triangles,
    Wedges,
    Claws,
}

impl Statistic {
    pub const ALL: [Statistic; 6] = [
        Statistic::Degree,
        Statistic::Clustering,
        Statistic::Assortativity,
        Statistic::Triangles,
        Statistic::Wedges,
        Statistic::Claws,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Degree => "degree",
            Statistic::Clustering => "clustering",
            Statistic::Assortativity => "assortativity",
            Statistic::Triangles => "triangles",
            Statistic::Wedges => "wedges",
            Statistic::Claws => "claws",
        }
    }
}

impl StatProfile {
    /// The statistic as a sample list; scalars become a single point mass.
    pub fn values(&self, stat: Statistic) -> Vec<f64> {
        match stat {
            Statistic::Degree => self.degrees.clone(),
            Statistic::Clustering => self.clustering.clone(),
            Statistic::Assortativity => vec![self.assortativity],
            Statistic::Triangles => vec![self.triangles as f64],
            Statistic::Wedges => vec![self.wedges as f64],
            Statistic::Claws => vec![self.claws as f64],
        }
    }

    /// Per-graph scalar summary: the mean for distributions.
    pub fn summary(&self, stat: Statistic) -> f64 {
        let v = self.values(stat);
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// Degree histogram: entry `k` counts nodes of degree `k`.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let max = self.degrees.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;
        let mut hist = vec![0; max + 1];
        for &d in &self.degrees {
            hist[d as usize] += 1;
        }
        hist
    }
}

fn choose(n: u64, k: u64) -> u64 {
    match k {
        2 => n * n.saturating_sub(1) / 2,
        3 => n * n.saturating_sub(1) * n.saturating_sub(2) / 6,
        _ => unreachable!(),
    }
}

pub fn graph_stats(g: &LabeledGraph) -> Result<StatProfile> {
    if !g.is_binary() {
        return Err(Error::InvalidGraph("statistics need a binary graph".into()));
    }
    let m = g.m();
    let adj = g.adj();
    if (0..m).any(|v| adj[(v, v)] != 0.0) {
        return Err(Error::InvalidGraph("statistics need a graph without self-loops".into()));
    }
    let nbrs: Vec<Vec<usize>> = (0..m)
        .map(|v| (0..m).filter(|&w| adj[(v, w)] != 0.0).collect())
        .collect();
    let deg: Vec<u64> = nbrs.iter().map(|n| n.len() as u64).collect();

    // triangles through each node
    let mut local = vec![0u64; m];
    let mut triangles = 0u64;
    for u in 0..m {
        for &v in nbrs[u].iter().filter(|&&v| v > u) {
            for &w in nbrs[v].iter().filter(|&&w| w > v) {
                if adj[(u, w)] != 0.0 {
                    triangles += 1;
                    local[u] += 1;
                    local[v] += 1;
                    local[w] += 1;
                }
            }
        }
    }
    let clustering = (0..m)
        .map(|v| {
            let pairs = choose(deg[v], 2);
            if pairs == 0 {
                0.0
            } else {
                local[v] as f64 / pairs as f64
            }
        })
        .collect();

    Ok(StatProfile {
        degrees: deg.iter().map(|&d| d as f64).collect(),
        clustering,
        assortativity: assortativity(&nbrs, &deg),
        triangles,
        wedges: deg.iter().map(|&d| choose(d, 2)).sum(),
        claws: deg.iter().map(|&d| choose(d, 3)).sum(),
    })
}

/// Pearson correlation of endpoint degrees over both orientations of every edge.
fn assortativity(nbrs: &[Vec<usize>], deg: &[u64]) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (u, ns) in nbrs.iter().enumerate() {
        for &v in ns {
            xs.push(deg[u] as f64);
            ys.push(deg[v] as f64);
        }
    }
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// First Wasserstein distance between two empirical distributions,
/// `∫ |F_p − F_q|` over the merged sample breakpoints.
pub fn wasserstein_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InvalidParameter("wasserstein_1d needs nonempty samples".into()));
    }
    if p.iter().chain(q).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    let mut a = p.to_vec();
    let mut b = q.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

/// Gaussian kernel on the first Wasserstein distance.
pub fn gw_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    let w = wasserstein_1d(x, y)?;
    Ok((-w * w / (2.0 * sigma * sigma)).exp())
}

/// MMD² estimator between two equal-size collections of samples, clamped at 0.
/// A scalar statistic is passed as a one-element sample (a point mass).
pub fn mmd2(xs: &[Vec<f64>], ys: &[Vec<f64>], sigma: f64) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "mmd2 needs equal sizes, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("mmd2 needs N >= 2, got {n}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be > 0")));
    }
    let mut within = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                within += gw_kernel(&xs[i], &xs[j], sigma)? + gw_kernel(&ys[i], &ys[j], sigma)?;
            }
            cross += gw_kernel(&xs[i], &ys[j], sigma)? + gw_kernel(&xs[j], &ys[i], sigma)?;
        }
    }
    let nf = n as f64;
    Ok((within / (nf * (nf - 1.0)) - cross / (nf * nf)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatScore {
    pub statistic: &'static str,
    pub mmd2: f64,
    pub mean_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub sigma: f64,
    pub s_mmd: f64,
    pub s_mvr: f64,
    pub per_statistic: Vec<StatScore>,
}

fn check_sets(gen: &[StatProfile], reference: &[StatProfile]) -> Result<()> {
    if gen.is_empty() || reference.is_empty() {
        return Err(Error::InvalidParameter("score needs nonempty sets".into()));
    }
    Ok(())
}

fn per_stat_mmd2(gen: &[StatProfile], reference: &[StatProfile], stat: Statistic, sigma: f64) -> Result<f64> {
    let xs: Vec<Vec<f64>> = gen.iter().map(|p| p.values(stat)).collect();
    let ys: Vec<Vec<f64>> = reference.iter().map(|p| p.values(stat)).collect();
    Ok(mmd2(&xs, &ys, sigma)?.min(2.0))
}

fn per_stat_mvr(gen: &[StatProfile], reference: &[StatProfile], stat: Statistic) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let r: Vec<f64> = reference.iter().map(|p| p.summary(stat)).collect();
    let g: Vec<f64> = gen.iter().map(|p| p.summary(stat)).collect();
    let mu_r = mean(&r);
    let var_r = r.iter().map(|x| (x - mu_r) * (x - mu_r)).sum::<f64>() / r.len() as f64;
    let diff = mu_r - mean(&g);
    diff * diff / var_r.max(1e-12)
}

/// Mean of the six MMD² terms scaled by `1/12`, each clamped to `[0, 2]`.
pub fn s_mmd(gen: &[StatProfile], reference: &[StatProfile], sigma: f64) -> Result<f64> {
    check_sets(gen, reference)?;
    let mut total = 0.0;
    for stat in Statistic::ALL {
        total += per_stat_mmd2(gen, reference, stat, sigma)?;
    }
    Ok(total / 12.0)
}

/// Squared mean differences over reference variance, averaged over the six statistics.
pub fn s_mvr(gen: &[StatProfile], reference: &[StatProfile]) -> Result<f64> {
    check_sets(gen, reference)?;
    Ok(Statistic::ALL.iter().map(|&s| per_stat_mvr(gen, reference, s)).sum::<f64>() / 6.0)
}

pub fn score(gen: &[StatProfile], reference: &[StatProfile], sigma: f64) -> Result<ScoreReport> {
    check_sets(gen, reference)?;
    let mut per_statistic = Vec::with_capacity(6);
    for stat in Statistic::ALL {
        per_statistic.push(StatScore {
            statistic: stat.name(),
            mmd2: per_stat_mmd2(gen, reference, stat, sigma)?,
            mean_variance: per_stat_mvr(gen, reference, stat),
        });
    }
    Ok(ScoreReport {
        sigma,
        s_mmd: per_statistic.iter().map(|s| s.mmd2).sum::<f64>() / 12.0,
        s_mvr: per_statistic.iter().map(|s| s.mean_variance).sum::<f64>() / 6.0,
        per_statistic,
    })
}

#[derive(Serialize)]
struct CsvRow {
    graph: usize,
    degree_mean: f64,
    degree_std: f64,
    clustering_mean: f64,
    clustering_std: f64,
    assortativity: f64,
    triangles: u64,
    wedges: u64,
    claws: u64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    (mu, var.sqrt())
}

/// One CSV row per graph; distributions appear as mean and standard deviation.
pub fn write_stats_csv<W: Write>(profiles: &[StatProfile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, p) in profiles.iter().enumerate() {
        let (degree_mean, degree_std) = mean_std(&p.degrees);
        let (clustering_mean, clustering_std) = mean_std(&p.clustering);
        w.serialize(CsvRow {
            graph: i,
            degree_mean,
            degree_std,
            clustering_mean,
            clustering_std,
            assortativity: p.assortativity,
            triangles: p.triangles,
            wedges: p.wedges,
            claws: p.claws,
        })?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Writes `<path>` (CSV) and `<path>.json` with the raw per-node lists.
pub fn write_stats(profiles: &[StatProfile], path: &Path) -> Result<()> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_stats_csv(profiles, file)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    let sidecar = Path::new(&sidecar);
    let body = serde_json::to_string_pretty(&serde_json::json!({ "graphs": profiles }))
        .map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(sidecar, body).map_err(io_err(sidecar))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star() -> LabeledGraph {
        LabeledGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    #[test]
    fn triangle_stats() {
        let k3 = LabeledGraph::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let s = graph_stats(&k3).unwrap();
        assert_eq!((s.triangles, s.wedges, s.claws), (1, 3, 0));
        assert_eq!(s.clustering, vec![1.0; 3]);
        assert_eq!(s.assortativity, 0.0);
    }

    #[test]
    fn star_stats() {
        let s = graph_stats(&star()).unwrap();
        assert_eq!((s.triangles, s.wedges, s.claws), (0, 3, 1));
        assert_eq!(s.clustering, vec![0.0; 4]);
        assert_eq!(s.assortativity, -1.0);
        assert_eq!(s.degree_histogram(), vec![0, 3, 0, 1]);
    }

    #[test]
    fn empty_stats() {
        let s = graph_stats(&LabeledGraph::empty(5).unwrap()).unwrap();
        assert_eq!((s.triangles, s.wedges, s.claws), (0, 0, 0));
        assert_eq!(s.assortativity, 0.0);
        assert!(s.degrees.iter().chain(&s.clustering).all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_rejected() {
        let g = LabeledGraph::new(nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]), None).unwrap();
        assert!(graph_stats(&g).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_1d(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        // unequal sizes: {0} vs {0, 1} → half the mass moves by 1
        assert_eq!(wasserstein_1d(&[0.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(
            a in proptest::collection::vec(-5.0f64..5.0, 1..6),
            b in proptest::collection::vec(-5.0f64..5.0, 1..6),
            c in proptest::collection::vec(-5.0f64..5.0, 1..6),
        ) {
            let ab = wasserstein_1d(&a, &b).unwrap();
            prop_assert_eq!(ab, wasserstein_1d(&b, &a).unwrap());
            let ac = wasserstein_1d(&a, &c).unwrap();
            let cb = wasserstein_1d(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
            prop_assert!(ab >= 0.0);
        }
    }

    #[test]
    fn mmd2_examples() {
        let same = vec![vec![1.0, 2.0]; 3];
        assert_eq!(mmd2(&same, &same, 1.0).unwrap(), 0.0);
        let xs = vec![vec![0.0], vec![0.0]];
        let ys = vec![vec![1.0], vec![1.0]];
        let v = mmd2(&xs, &ys, 1.0).unwrap();
        assert!((v - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-15);
        assert!((v - 0.7869).abs() < 1e-4);
        assert!(mmd2(&xs, &ys[..1], 1.0).is_err());
        assert!(mmd2(&xs[..1], &ys[..1], 1.0).is_err());
        assert!(mmd2(&xs, &ys, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mmd2_bounded(
            xs in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 1..4), 2..5),
            shift in 0.0f64..20.0,
        ) {
            let ys: Vec<Vec<f64>> = xs.iter().map(|v| v.iter().map(|x| x + shift).collect()).collect();
            let v = mmd2(&xs, &ys, 1.0).unwrap();
            prop_assert!((0.0..=2.0).contains(&v));
        }
    }

    #[test]
    fn mvr_one_std_shift() {
        let profile = |deg: f64| StatProfile {
            degrees: vec![deg],
            clustering: vec![0.0],
            assortativity: 0.0,
            triangles: 0,
            wedges: 0,
            claws: 0,
        };
        let reference = vec![profile(1.0), profile(3.0)];
        // reference degree mean 2, population std 1
        let gen = vec![profile(2.0), profile(4.0)];
        assert!((s_mvr(&gen, &reference).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(s_mvr(&reference, &reference).unwrap(), 0.0);
        let scaled = |ps: &[StatProfile]| -> Vec<StatProfile> {
            ps.iter().map(|p| StatProfile { degrees: vec![p.degrees[0] * 3.0], ..p.clone() }).collect()
        };
        let a = s_mvr(&gen, &reference).unwrap();
        let b = s_mvr(&scaled(&gen), &scaled(&reference)).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(s_mvr(&[], &reference).is_err());
    }

    #[test]
    fn score_is_consistent() {
        let ps = vec![graph_stats(&star()).unwrap(); 3];
        let r = score(&ps, &ps, 1.0).unwrap();
        assert_eq!(r.s_mmd, 0.0);
        assert_eq!(r.s_mvr, 0.0);
        assert_eq!(r.per_statistic.len(), 6);
    }

    #[test]
    fn stats_csv_layout() {
        let mut buf = Vec::new();
        write_stats_csv(&[graph_stats(&star()).unwrap()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "graph,degree_mean,degree_std,clustering_mean,clustering_std,assortativity,triangles,wedges,claws"
        );
        assert_eq!(lines.next().unwrap(), "0,1.5,0.8660254037844386,0.0,0.0,-1.0,0,3,1");
    }
}
