//! JSON files: graph sets, alignments and centers.
//!
//! Parse errors carry the JSON path of the offending value (`graphs[2].edges[5]`)
//! and, for syntax errors, the line and column.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Number;

use crate::error::{Error, Result};
use crate::graph::{GraphSet, LabeledGraph, Permutation};
use crate::multi::{CenterEstimate, Method};

/// Upper bound on nodes per graph accepted from files.
pub const MAX_NODES: usize = 4096;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    n: usize,
    edges: Vec<Vec<Number>>,
    #[serde(default)]
    features: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSetJson {
    name: String,
    graphs: Vec<GraphJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CenterJson {
    name: String,
    graphs: Vec<GraphJson>,
    soft: Vec<Vec<f64>>,
    threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignmentJson {
    frame: usize,
    permutations: Vec<Vec<usize>>,
    objective: f64,
    method: String,
}

/// Permutations of every graph into the frame of graph `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentFile {
    pub frame: usize,
    pub permutations: Vec<Permutation>,
    pub objective: f64,
    pub method: Method,
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn from_json<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = if inner.line() > 0 {
            format!("{} (line {}, column {})", strip_position(&inner.to_string()), inner.line(), inner.column())
        } else {
            inner.to_string()
        };
        parse_err(path, message)
    })
}

fn strip_position(msg: &str) -> &str {
    msg.find(" at line ").map_or(msg, |i| &msg[..i])
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn graph_to_json(g: &LabeledGraph) -> GraphJson {
    let edges = g
        .entries()
        .map(|(u, v, w)| {
            let mut e = vec![Number::from(u), Number::from(v)];
            if w != 1.0 {
                e.push(Number::from_f64(w).expect("weights are finite"));
            }
            e
        })
        .collect();
    let features = g
        .features()
        .map(|f| f.row_iter().map(|r| r.iter().copied().collect()).collect());
    GraphJson { n: g.m(), edges, features }
}

fn index(v: f64, n: usize, at: &str) -> Result<usize> {
    if v.fract() != 0.0 || v < 0.0 || v >= n as f64 {
        return Err(parse_err(at, format!("node index {v} is not an integer in 0..{n}")));
    }
    Ok(v as usize)
}

fn graph_from_json(g: GraphJson, at: &str) -> Result<LabeledGraph> {
    let n = g.n;
    if n == 0 || n > MAX_NODES {
        return Err(parse_err(format!("{at}.n"), format!("node count {n} not in 1..={MAX_NODES}")));
    }
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (k, e) in g.edges.iter().enumerate() {
        let here = format!("{at}.edges[{k}]");
        let e: Vec<f64> = e.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect();
        if !(2..=3).contains(&e.len()) {
            return Err(parse_err(here, format!("edge has {} entries, expected [u, v] or [u, v, w]", e.len())));
        }
        let u = index(e[0], n, &here)?;
        let v = index(e[1], n, &here)?;
        let w = e.get(2).copied().unwrap_or(1.0);
        if !(0.0..=1.0).contains(&w) {
            return Err(parse_err(here, format!("weight {w} outside [0, 1]")));
        }
        let key = (u.min(v), u.max(v));
        if let Some(prev) = weights.insert(key, w) {
            let msg = if prev == w {
                format!("duplicate edge ({u}, {v})")
            } else {
                format!("asymmetric adjacency: ({}, {}) = {prev} but ({u}, {v}) = {w}", key.1, key.0)
            };
            return Err(parse_err(here, msg));
        }
    }
    let mut adj = DMatrix::zeros(n, n);
    for (&(u, v), &w) in &weights {
        adj[(u, v)] = w;
        adj[(v, u)] = w;
    }
    let features = match g.features {
        None => None,
        Some(rows) => {
            if rows.len() != n {
                return Err(parse_err(format!("{at}.features"), format!("{} rows for {n} nodes", rows.len())));
            }
            let f = rows.first().map_or(0, Vec::len);
            if let Some(k) = rows.iter().position(|r| r.len() != f) {
                return Err(parse_err(format!("{at}.features[{k}]"), format!("row length differs from {f}")));
            }
            Some(DMatrix::from_fn(n, f, |i, j| rows[i][j]))
        }
    };
    LabeledGraph::new(adj, features).map_err(|e| parse_err(at, e.to_string()))
}

fn graphs_from_json(graphs: Vec<GraphJson>) -> Result<Vec<LabeledGraph>> {
    graphs
        .into_iter()
        .enumerate()
        .map(|(i, g)| graph_from_json(g, &format!("graphs[{i}]")))
        .collect()
}

pub fn parse_graphset(text: &str) -> Result<GraphSet> {
    let raw: GraphSetJson = from_json(text)?;
    Ok(GraphSet::new(raw.name, graphs_from_json(raw.graphs)?))
}

pub fn graphset_to_json(set: &GraphSet) -> String {
    to_json(&GraphSetJson {
        name: set.name.clone(),
        graphs: set.graphs.iter().map(graph_to_json).collect(),
    })
}

pub fn read_graphset(path: &Path) -> Result<GraphSet> {
    parse_graphset(&read_file(path)?).map_err(|e| e.within(path.display().to_string()))
}

pub fn write_graphset(set: &GraphSet, path: &Path) -> Result<()> {
    write_file(path, &graphset_to_json(set))
}

pub fn parse_alignment(text: &str) -> Result<AlignmentFile> {
    let raw: AlignmentJson = from_json(text)?;
    let method = raw
        .method
        .parse::<Method>()
        .map_err(|e| parse_err("method", e.to_string()))?;
    let permutations = raw
        .permutations
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            if p.len() > MAX_NODES {
                return Err(parse_err(format!("permutations[{i}]"), "too many nodes"));
            }
            Permutation::new(p).map_err(|e| parse_err(format!("permutations[{i}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    if raw.frame >= permutations.len().max(1) {
        return Err(parse_err("frame", format!("frame {} out of range", raw.frame)));
    }
    if !raw.objective.is_finite() {
        return Err(parse_err("objective", "not finite"));
    }
    Ok(AlignmentFile {
        frame: raw.frame,
        permutations,
        objective: raw.objective,
        method,
    })
}

pub fn alignment_to_json(a: &AlignmentFile) -> String {
    to_json(&AlignmentJson {
        frame: a.frame,
        permutations: a.permutations.iter().map(|p| p.as_slice().to_vec()).collect(),
        objective: a.objective,
        method: a.method.as_str().to_string(),
    })
}

pub fn read_alignment(path: &Path) -> Result<AlignmentFile> {
    parse_alignment(&read_file(path)?).map_err(|e| e.within(path.display().to_string()))
}

pub fn write_alignment(a: &AlignmentFile, path: &Path) -> Result<()> {
    write_file(path, &alignment_to_json(a))
}

pub fn parse_center(text: &str) -> Result<CenterEstimate> {
    let raw: CenterJson = from_json(text)?;
    if !(raw.threshold > 0.0 && raw.threshold < 1.0) {
        return Err(parse_err("threshold", format!("{} not in (0, 1)", raw.threshold)));
    }
    let mut graphs = graphs_from_json(raw.graphs)?;
    if graphs.len() != 1 {
        return Err(parse_err("graphs", format!("expected one center graph, got {}", graphs.len())));
    }
    let hard = graphs.remove(0);
    let m = hard.m();
    if raw.soft.len() != m || raw.soft.iter().any(|r| r.len() != m) {
        return Err(parse_err("soft", format!("expected a {m}x{m} matrix")));
    }
    let soft = DMatrix::from_fn(m, m, |i, j| raw.soft[i][j]);
    if soft.iter().any(|v| !(0.0..=1.0).contains(v)) || soft != soft.transpose() {
        return Err(parse_err("soft", "entries must be symmetric and in [0, 1]"));
    }
    let expected = CenterEstimate::from_soft(soft, raw.threshold).map_err(|e| parse_err("soft", e.to_string()))?;
    if expected.hard.adj() != hard.adj() {
        return Err(parse_err("graphs[0]", "center graph disagrees with soft >= threshold"));
    }
    Ok(CenterEstimate { hard, ..expected })
}

pub fn center_to_json(name: &str, c: &CenterEstimate) -> String {
    to_json(&CenterJson {
        name: name.to_string(),
        graphs: vec![graph_to_json(&c.hard)],
        soft: c.soft.row_iter().map(|r| r.iter().copied().collect()).collect(),
        threshold: c.threshold,
    })
}

pub fn read_center(path: &Path) -> Result<CenterEstimate> {
    parse_center(&read_file(path)?).map_err(|e| e.within(path.display().to_string()))
}

pub fn write_center(name: &str, c: &CenterEstimate, path: &Path) -> Result<()> {
    write_file(path, &center_to_json(name, c))
}
