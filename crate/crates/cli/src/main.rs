//! `graphalign` command line: generate graph sets, align them, evaluate them,
//! and sweep the perturbation level.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphalign::accel::{self, d0_score, AccelConfig, AccelResult};
use graphalign::generators::{gen_community, gen_ego_ba, gen_grid, perturb, random_permutation};
use graphalign::io::{self, AlignmentFile};
use graphalign::metrics::{graph_stats, score, ScoreReport, StatProfile};
use graphalign::multi::{CenterEstimate, Method, MultiAlignConfig};
use graphalign::{pad_with_dummies, permute_graph, GraphSet, LabeledGraph, Permutation, RngSeed};
use serde::Serialize;

const DUMMY_WEIGHT: f64 = 0.01;

#[derive(Parser)]
#[command(name = "graphalign", version, about = "Joint alignment and evaluation of graph sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate permuted, perturbed copies of a synthetic graph.
    Gen(GenArgs),
    /// Align a graph set and compute its center.
    Align(AlignArgs),
    /// Score a generated set against a reference set.
    Eval(EvalArgs),
    /// Regenerate, align and score a set for each perturbation level.
    PerturbSweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Community,
    Grid,
    EgoBa,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AccelKind {
    None,
    GParallel,
    CSerial,
    CgParallel,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Galign,
    Fermat,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Galign => Method::Galign,
            MethodArg::Fermat => Method::Fermat,
        }
    }
}

#[derive(Args, Clone)]
struct FamilyArgs {
    #[arg(value_enum)]
    family: Family,
    /// Community sizes.
    #[arg(long, value_delimiter = ',', default_value = "13,15,17")]
    sizes: Vec<usize>,
    /// Intra-community edge probability.
    #[arg(long, default_value_t = 0.7)]
    p: f64,
    /// Inter-community edges as a fraction of the node count.
    #[arg(long, default_value_t = 0.05)]
    inter: f64,
    #[arg(long, default_value_t = 6)]
    rows: usize,
    #[arg(long, default_value_t = 6)]
    cols: usize,
    /// Barabási–Albert graph size before the ego cut.
    #[arg(long, default_value_t = 950)]
    total_nodes: usize,
    #[arg(long, default_value_t = 5)]
    attach: usize,
    #[arg(long, default_value_t = 1)]
    hops: usize,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 12)]
    count: usize,
    /// Fraction of edges removed and re-added in each copy.
    #[arg(long, default_value_t = 0.1)]
    perturb: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long, value_enum, default_value = "galign")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "none")]
    accel: AccelKind,
    /// Group size for g-parallel and cg-parallel.
    #[arg(long = "K", default_value_t = 4)]
    k: usize,
    /// Clusters per graph for c-serial and cg-parallel.
    #[arg(long = "c", default_value_t = 2)]
    c: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Outer iteration budget of the multi-graph solver.
    #[arg(long, default_value_t = 1000)]
    outer_iters: usize,
    /// Binarization threshold of the center.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output directory for alignment.json, center.json and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Also write each stage's centers as stages/stage-<s>.json.
    #[arg(long)]
    dump_stages: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    generated: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Kernel bandwidth.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Alignment of the generated set; with --center adds d0 to the report.
    #[arg(long, requires = "center")]
    alignment: Option<PathBuf>,
    #[arg(long, requires = "alignment")]
    center: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Perturbation levels, e.g. 0,0.1,0.2,0.5.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 12)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Process exit status: 1 for solver failures, 2 for bad input.
enum Failure {
    Input(String),
    Solver(String),
}

impl From<graphalign::Error> for Failure {
    fn from(e: graphalign::Error) -> Self {
        let mut root = &e;
        while let graphalign::Error::Provenance { source, .. } = root {
            root = source;
        }
        match root {
            graphalign::Error::Numerical(_) | graphalign::Error::SingularSystem { .. } => {
                Failure::Solver(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<bool, Failure>;

#[derive(Serialize)]
struct Phase {
    name: String,
    seconds: f64,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    args: Vec<String>,
    seed: Option<u64>,
    workers: Option<usize>,
    version: &'static str,
    phases: Vec<Phase>,
    /// Alignment stages; `t_a_seconds` is their sum.
    stages: Vec<Phase>,
    t_a_seconds: Option<f64>,
    converged: Option<bool>,
    outputs: Vec<String>,
}

impl Manifest {
    fn new(command: &'static str, seed: Option<u64>, workers: Option<usize>) -> Self {
        Self {
            command,
            args: std::env::args().collect(),
            seed,
            workers,
            version: env!("CARGO_PKG_VERSION"),
            phases: Vec::new(),
            stages: Vec::new(),
            t_a_seconds: None,
            converged: None,
            outputs: Vec::new(),
        }
    }

    fn phase(&mut self, name: &str, start: Instant) {
        self.phases.push(Phase {
            name: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    fn write(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Align(a) => cmd_align(a),
        Command::Eval(a) => cmd_eval(a),
        Command::PerturbSweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: solver did not converge; outputs were written and flagged");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn base_graph(f: &FamilyArgs, seed: RngSeed) -> graphalign::Result<LabeledGraph> {
    match f.family {
        Family::Community => gen_community(&f.sizes, f.p, f.inter, seed),
        Family::Grid => gen_grid(f.rows, f.cols),
        Family::EgoBa => gen_ego_ba(f.total_nodes, f.attach, f.hops, seed),
    }
}

/// Copy 0 keeps the base labels; every other copy is relabeled at random,
/// then each copy is perturbed. Ego-BA copies are independent draws.
fn generate(f: &FamilyArgs, count: usize, rho: f64, seed: RngSeed) -> graphalign::Result<GraphSet> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(graphalign::Error::InvalidParameter(format!("perturb {rho} not in [0, 1]")));
    }
    if count == 0 {
        return Err(graphalign::Error::InvalidParameter("count must be >= 1".into()));
    }
    let base = base_graph(f, seed.derive(0))?;
    let graphs = (0..count)
        .map(|i| {
            let i = i as u64;
            let g = match f.family {
                Family::EgoBa if i > 0 => base_graph(f, seed.derive(i))?,
                _ if i > 0 => permute_graph(&base, &random_permutation(base.m(), seed.derive(1000 + i)))?,
                _ => base.clone(),
            };
            perturb(&g, rho, seed.derive(2000 + i)).map_err(|e| e.within(format!("copy {i}")))
        })
        .collect::<graphalign::Result<Vec<_>>>()?;
    let name = match f.family {
        Family::Community => "community",
        Family::Grid => "grid",
        Family::EgoBa => "ego-ba",
    };
    Ok(GraphSet::new(name, graphs))
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let mut manifest = Manifest::new("gen", Some(a.seed), None);
    let start = Instant::now();
    let set = generate(&a.family, a.count, a.perturb, RngSeed(a.seed))?;
    manifest.phase("generate", start);
    io::write_graphset(&set, &a.out)?;
    manifest.outputs.push(a.out.display().to_string());
    manifest.write(&sidecar(&a.out))?;
    Ok(true)
}

struct Aligned {
    perms: Vec<Permutation>,
    center: CenterEstimate,
    stages: Vec<Phase>,
    stage_centers: Vec<Vec<LabeledGraph>>,
    converged: bool,
}

fn accel_config(p: &PipelineArgs) -> AccelConfig {
    AccelConfig {
        group_size: p.k,
        clusters: p.c,
        workers: p.workers,
        inner: MultiAlignConfig {
            method: p.method.into(),
            outer_iters: p.outer_iters,
            threshold: p.threshold,
            seed: RngSeed(p.seed),
            ..MultiAlignConfig::default()
        },
        seed: RngSeed(p.seed),
        ..AccelConfig::default()
    }
}

/// Runs the pipeline. Permutations and center come back in graph 0's frame.
fn run_pipeline(set: &GraphSet, p: &PipelineArgs) -> graphalign::Result<Aligned> {
    let cfg = accel_config(p);
    let res: AccelResult = match p.accel {
        AccelKind::None => accel::direct(set, &cfg)?,
        AccelKind::GParallel => accel::g_parallel(set, &cfg)?,
        AccelKind::CSerial => accel::c_serial(set, &cfg)?,
        AccelKind::CgParallel => accel::cg_parallel(set, &cfg)?,
    };
    let stages: Vec<Phase> = res
        .stages
        .iter()
        .enumerate()
        .map(|(s, r)| Phase {
            name: format!("stage-{} ({} groups)", s + 1, r.groups),
            seconds: r.seconds,
        })
        .collect();
    Ok(Aligned {
        perms: res.permutations,
        center: res.center,
        stages,
        stage_centers: res.stage_centers,
        converged: res.converged,
    })
}

fn discrepancy(set: &GraphSet, perms: &[Permutation], center: &LabeledGraph) -> graphalign::Result<f64> {
    let mut total = 0.0;
    for (g, p) in set.graphs.iter().zip(perms) {
        total += (permute_graph(g, p)?.adj() - center.adj()).norm_squared();
    }
    Ok(total)
}

fn load_for_alignment(path: &Path) -> graphalign::Result<GraphSet> {
    let set = io::read_graphset(path)?;
    if set.is_empty() {
        return Err(graphalign::Error::InvalidParameter(format!("{}: empty graph set", path.display())));
    }
    if set.common_size().is_some() {
        Ok(set)
    } else {
        pad_with_dummies(&set, DUMMY_WEIGHT)
    }
}

fn cmd_align(a: AlignArgs) -> CmdResult {
    let p = &a.pipeline;
    let mut manifest = Manifest::new("align", Some(p.seed), Some(p.workers));
    let start = Instant::now();
    let set = load_for_alignment(&a.input)?;
    accel_config(p).validate()?;
    manifest.phase("load", start);

    let start = Instant::now();
    let out = run_pipeline(&set, p)?;
    manifest.phase("align", start);

    let start = Instant::now();
    fs::create_dir_all(&a.out)?;
    let file = AlignmentFile {
        frame: 0,
        objective: discrepancy(&set, &out.perms, &out.center.hard)?,
        permutations: out.perms,
        method: p.method.into(),
    };
    let alignment_path = a.out.join("alignment.json");
    let center_path = a.out.join("center.json");
    io::write_alignment(&file, &alignment_path)?;
    io::write_center(&format!("{}-center", set.name), &out.center, &center_path)?;
    manifest.outputs.push(alignment_path.display().to_string());
    manifest.outputs.push(center_path.display().to_string());
    if a.dump_stages {
        let dir = a.out.join("stages");
        fs::create_dir_all(&dir)?;
        for (s, centers) in out.stage_centers.iter().enumerate() {
            let path = dir.join(format!("stage-{}.json", s + 1));
            io::write_graphset(&GraphSet::new(format!("stage-{}", s + 1), centers.clone()), &path)?;
            manifest.outputs.push(path.display().to_string());
        }
    }
    manifest.phase("write", start);
    manifest.t_a_seconds = Some(out.stages.iter().map(|s| s.seconds).sum());
    manifest.stages = out.stages;
    manifest.converged = Some(out.converged);
    manifest.write(&a.out.join("manifest.json"))?;
    Ok(out.converged)
}

fn profiles(set: &GraphSet) -> graphalign::Result<Vec<StatProfile>> {
    set.graphs
        .iter()
        .enumerate()
        .map(|(i, g)| graph_stats(g).map_err(|e| e.within(format!("{} graph {i}", set.name))))
        .collect()
}

fn score_sets(gen: &GraphSet, reference: &GraphSet, sigma: f64) -> graphalign::Result<ScoreReport> {
    let (mut g, mut r) = (profiles(gen)?, profiles(reference)?);
    if g.len() != r.len() {
        let n = g.len().min(r.len());
        eprintln!(
            "warning: set sizes differ ({} vs {}); using the first {n} graphs of each",
            g.len(),
            r.len()
        );
        g.truncate(n);
        r.truncate(n);
    }
    score(&g, &r, sigma)
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let mut manifest = Manifest::new("eval", None, None);
    let start = Instant::now();
    let gen = io::read_graphset(&a.generated)?;
    let reference = io::read_graphset(&a.reference)?;
    manifest.phase("load", start);
    let start = Instant::now();
    let report = score_sets(&gen, &reference, a.sigma)?;
    let mut rows: Vec<(String, f64)> = vec![("s_mmd".into(), report.s_mmd), ("s_mvr".into(), report.s_mvr)];
    for s in &report.per_statistic {
        rows.push((format!("mmd2_{}", s.statistic), s.mmd2));
        rows.push((format!("mvr_{}", s.statistic), s.mean_variance));
    }
    if let (Some(al), Some(ce)) = (&a.alignment, &a.center) {
        let alignment = io::read_alignment(al)?;
        let center = io::read_center(ce)?;
        let padded = if gen.common_size().is_some() { gen.clone() } else { pad_with_dummies(&gen, DUMMY_WEIGHT)? };
        rows.push(("d0".into(), d0_score(&padded, &alignment.permutations, &center.hard)?));
    }
    manifest.phase("score", start);
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| Failure::Input(format!("{}: {e}", a.out.display())))?;
    let csv_err = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(["metric", "value"]).map_err(csv_err)?;
    for (name, v) in &rows {
        w.write_record([name.as_str(), &v.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    manifest.outputs.push(a.out.display().to_string());
    manifest.write(&sidecar(&a.out))?;
    Ok(true)
}

#[derive(Serialize)]
struct SweepRow {
    rho: f64,
    s_mmd: f64,
    s_mvr: f64,
    d0: f64,
    t_a_seconds: f64,
    converged: bool,
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    if a.rho.is_empty() {
        return Err(Failure::Input("empty rho list".into()));
    }
    if let Some(r) = a.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Failure::Input(format!("rho {r} not in [0, 1]")));
    }
    let p = &a.pipeline;
    accel_config(p).validate()?;
    let mut manifest = Manifest::new("perturb-sweep", Some(p.seed), Some(p.workers));
    let seed = RngSeed(p.seed);
    let reference = generate(&a.family, a.count, 0.0, seed)?;
    let mut rows = Vec::with_capacity(a.rho.len());
    let mut all_converged = true;
    for &rho in &a.rho {
        let start = Instant::now();
        let raw = generate(&a.family, a.count, rho, seed)?;
        let set = if raw.common_size().is_some() { raw.clone() } else { pad_with_dummies(&raw, DUMMY_WEIGHT)? };
        let out = run_pipeline(&set, p).map_err(|e| e.within(format!("rho {rho}")))?;
        let report = score_sets(&raw, &reference, a.sigma)?;
        let t_a: f64 = out.stages.iter().map(|s| s.seconds).sum();
        rows.push(SweepRow {
            rho,
            s_mmd: report.s_mmd,
            s_mvr: report.s_mvr,
            d0: d0_score(&set, &out.perms, &out.center.hard)?,
            t_a_seconds: t_a,
            converged: out.converged,
        });
        all_converged &= out.converged;
        manifest.stages.push(Phase {
            name: format!("rho {rho}"),
            seconds: t_a,
        });
        manifest.phase(&format!("rho {rho}"), start);
    }
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| Failure::Input(format!("{}: {e}", a.out.display())))?;
    for r in &rows {
        w.serialize(r).map_err(|e| Failure::Input(e.to_string()))?;
    }
    w.flush()?;
    manifest.t_a_seconds = Some(manifest.stages.iter().map(|s| s.seconds).sum());
    manifest.converged = Some(all_converged);
    manifest.outputs.push(a.out.display().to_string());
    manifest.write(&sidecar(&a.out))?;
    Ok(all_converged)
}
