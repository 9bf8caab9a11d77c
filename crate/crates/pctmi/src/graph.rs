//! Summary graphs over whole time series, separating sets, and their
//! JSON / DOT serializations.
//!
//! A summary graph has one node per series and at most one edge per pair,
//! either undirected or directed; two-cycles cannot be represented. Cross
//! edges and per-node self loops are stored separately so scoring can ignore
//! the loops.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

/// Edge mark relative to the stored (smaller index, larger index) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EdgeMark {
    Undirected,
    Forward,
    Backward,
}

/// Search metadata attached to an edge, expressed relative to the stored
/// (smaller index, larger index) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeInfo {
    pub gamma: i64,
    pub lambda_src: usize,
    pub lambda_dst: usize,
    pub ctmi: f64,
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug)]
struct Edge {
    mark: EdgeMark,
    info: Option<EdgeInfo>,
}

/// Result of an orientation attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrientOutcome {
    /// The edge was undirected and is now directed as requested.
    Oriented,
    /// The edge already carried this direction.
    AlreadyOriented,
    /// The edge is directed the other way; it was left unchanged.
    Conflict,
    /// No such edge.
    NoEdge,
}

#[derive(Clone, Debug)]
pub struct SummaryGraph {
    nodes: Vec<String>,
    edges: BTreeMap<(usize, usize), Edge>,
    self_loops: BTreeSet<usize>,
}

impl SummaryGraph {
    /// Edgeless graph, possibly with zero nodes. Names are sorted;
    /// duplicates are rejected.
    pub fn new<S: Into<String>>(names: Vec<S>) -> Result<Self> {
        let mut nodes: Vec<String> = names.into_iter().map(Into::into).collect();
        nodes.sort();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate node names".into()));
        }
        Ok(SummaryGraph { nodes, edges: BTreeMap::new(), self_loops: BTreeSet::new() })
    }

    /// Complete undirected graph over the given names, every node flagged
    /// with a self loop. This is the starting point of skeleton discovery.
    pub fn complete<S: Into<String>>(names: Vec<S>) -> Result<Self> {
        let mut g = Self::new(names)?;
        for i in 0..g.nodes.len() {
            g.self_loops.insert(i);
            for j in i + 1..g.nodes.len() {
                g.edges.insert((i, j), Edge { mark: EdgeMark::Undirected, info: None });
            }
        }
        Ok(g)
    }

    /// Graph with the given directed edges (by name, src -> dst). Used for
    /// ground truths. A pair listed in both directions is rejected.
    pub fn from_directed_edges<S: Into<String>>(
        names: Vec<S>,
        edges: &[(&str, &str)],
        self_loops: bool,
    ) -> Result<Self> {
        let mut g = Self::new(names)?;
        if self_loops {
            g.self_loops = (0..g.nodes.len()).collect();
        }
        for &(src, dst) in edges {
            let s = g.require(src)?;
            let d = g.require(dst)?;
            if s == d {
                g.self_loops.insert(s);
                continue;
            }
            let key = (s.min(d), s.max(d));
            let mark = if s < d { EdgeMark::Forward } else { EdgeMark::Backward };
            if let Some(prev) = g.edges.get(&key) {
                if prev.mark != mark {
                    return Err(Error::InvalidConfig(format!(
                        "edges {src} -> {dst} and its reverse cannot both exist"
                    )));
                }
                continue;
            }
            g.edges.insert(key, Edge { mark, info: None });
        }
        Ok(g)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown node {name}")))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Cross-edge pairs (i < j) in sorted order.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.keys().copied().collect()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains_key(&ordered(a, b))
    }

    /// True when the edge exists and points from `from` to `to`.
    pub fn is_directed(&self, from: usize, to: usize) -> bool {
        if from == to {
            return false;
        }
        match self.edges.get(&ordered(from, to)) {
            Some(e) => e.mark == if from < to { EdgeMark::Forward } else { EdgeMark::Backward },
            None => false,
        }
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        a != b
            && self
                .edges
                .get(&ordered(a, b))
                .is_some_and(|e| e.mark == EdgeMark::Undirected)
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&u| self.is_adjacent(v, u)).collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.nodes.len()).filter(|&u| self.is_adjacent(v, u)).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.nodes.len()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        a != b && self.edges.remove(&ordered(a, b)).is_some()
    }

    /// Inserts an undirected edge if the pair has none yet.
    pub fn add_undirected_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b || self.edges.contains_key(&ordered(a, b)) {
            return false;
        }
        self.edges.insert(ordered(a, b), Edge { mark: EdgeMark::Undirected, info: None });
        true
    }

    /// Directs an undirected edge from -> to. Never overwrites an existing
    /// direction; a conflicting request reports `Conflict` and leaves the
    /// edge as it was.
    pub fn orient(&mut self, from: usize, to: usize) -> OrientOutcome {
        if from == to {
            return OrientOutcome::NoEdge;
        }
        let want = if from < to { EdgeMark::Forward } else { EdgeMark::Backward };
        match self.edges.get_mut(&ordered(from, to)) {
            None => OrientOutcome::NoEdge,
            Some(e) if e.mark == EdgeMark::Undirected => {
                e.mark = want;
                OrientOutcome::Oriented
            }
            Some(e) if e.mark == want => OrientOutcome::AlreadyOriented,
            Some(_) => OrientOutcome::Conflict,
        }
    }

    /// Attaches metadata to the (a, b) edge; `info` is interpreted relative
    /// to a -> b and normalized to internal storage.
    pub fn set_edge_info(&mut self, a: usize, b: usize, info: EdgeInfo) -> bool {
        if a == b {
            return false;
        }
        let normalized = if a < b { info } else { flip_info(info) };
        match self.edges.get_mut(&ordered(a, b)) {
            Some(e) => {
                e.info = Some(normalized);
                true
            }
            None => false,
        }
    }

    /// Metadata of the (a, b) edge, expressed relative to a -> b.
    pub fn edge_info(&self, a: usize, b: usize) -> Option<EdgeInfo> {
        let info = self.edges.get(&ordered(a, b))?.info.clone()?;
        Some(if a < b { info } else { flip_info(info) })
    }

    pub fn set_self_loop(&mut self, v: usize, on: bool) {
        if on {
            self.self_loops.insert(v);
        } else {
            self.self_loops.remove(&v);
        }
    }

    pub fn has_self_loop(&self, v: usize) -> bool {
        self.self_loops.contains(&v)
    }

    /// True when a directed path of length >= 1 leads from `from` to `to`,
    /// following directed edges only.
    pub fn directed_path_exists(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for u in 0..self.nodes.len() {
                if self.is_directed(v, u) && !seen[u] {
                    if u == to {
                        return true;
                    }
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        false
    }

    /// Directed cross edges as (src, dst) index pairs.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter_map(|(&(i, j), e)| match e.mark {
                EdgeMark::Forward => Some((i, j)),
                EdgeMark::Backward => Some((j, i)),
                EdgeMark::Undirected => None,
            })
            .collect()
    }

    /// Undirected cross edges as (i, j) index pairs with i < j.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter_map(|(&k, e)| (e.mark == EdgeMark::Undirected).then_some(k))
            .collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_dto()).expect("graph serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let dto: GraphDto =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("bad graph JSON: {e}")))?;
        Self::from_dto(dto)
    }

    fn to_dto(&self) -> GraphDto {
        let mut edges = Vec::with_capacity(self.edges.len());
        for (&(i, j), e) in &self.edges {
            // Directed edges are emitted src -> dst; undirected ones with the
            // smaller name as src.
            let (si, di, flip) = match e.mark {
                EdgeMark::Backward => (j, i, true),
                _ => (i, j, false),
            };
            let info = e.info.clone().map(|inf| if flip { flip_info(inf) } else { inf });
            edges.push(EdgeDto {
                src: self.nodes[si].clone(),
                dst: self.nodes[di].clone(),
                mark: match e.mark {
                    EdgeMark::Undirected => "undirected".into(),
                    _ => "directed".into(),
                },
                gamma: info.as_ref().map(|i| i.gamma),
                lambda_src: info.as_ref().map(|i| i.lambda_src),
                lambda_dst: info.as_ref().map(|i| i.lambda_dst),
                ctmi: info.as_ref().map(|i| i.ctmi),
                p_value: info.as_ref().and_then(|i| i.p_value),
            });
        }
        let all = self.self_loops.len() == self.nodes.len();
        GraphDto {
            nodes: self.nodes.clone(),
            edges,
            self_loops: all,
            self_loop_nodes: if all || self.self_loops.is_empty() {
                None
            } else {
                Some(self.self_loops.iter().map(|&v| self.nodes[v].clone()).collect())
            },
        }
    }

    fn from_dto(dto: GraphDto) -> Result<Self> {
        let mut g = Self::new(dto.nodes)?;
        match dto.self_loop_nodes {
            Some(names) => {
                for n in names {
                    let v = g.require(&n)?;
                    g.self_loops.insert(v);
                }
            }
            None if dto.self_loops => g.self_loops = (0..g.nodes.len()).collect(),
            None => {}
        }
        for e in dto.edges {
            let s = g.require(&e.src)?;
            let d = g.require(&e.dst)?;
            if s == d {
                return Err(Error::InvalidConfig(format!("self loop {} listed as an edge", e.src)));
            }
            let key = ordered(s, d);
            if g.edges.contains_key(&key) {
                return Err(Error::InvalidConfig(format!("duplicate edge {} - {}", e.src, e.dst)));
            }
            let mark = match e.mark.as_str() {
                "directed" => {
                    if s < d {
                        EdgeMark::Forward
                    } else {
                        EdgeMark::Backward
                    }
                }
                "undirected" => EdgeMark::Undirected,
                other => return Err(Error::InvalidConfig(format!("unknown edge mark {other}"))),
            };
            let info = match (e.gamma, e.lambda_src, e.lambda_dst, e.ctmi) {
                (Some(gamma), Some(ls), Some(ld), Some(ctmi)) => {
                    let inf = EdgeInfo { gamma, lambda_src: ls, lambda_dst: ld, ctmi, p_value: e.p_value };
                    Some(if s < d { inf } else { flip_info(inf) })
                }
                _ => None,
            };
            g.edges.insert(key, Edge { mark, info });
        }
        Ok(g)
    }

    /// Graphviz rendering; undirected edges use dir=none, self loops are
    /// drawn as loops.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph summary {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "    \"{n}\";");
        }
        for &v in &self.self_loops {
            let _ = writeln!(out, "    \"{0}\" -> \"{0}\";", self.nodes[v]);
        }
        for (&(i, j), e) in &self.edges {
            match e.mark {
                EdgeMark::Undirected => {
                    let _ = writeln!(out, "    \"{}\" -> \"{}\" [dir=none];", self.nodes[i], self.nodes[j]);
                }
                EdgeMark::Forward => {
                    let _ = writeln!(out, "    \"{}\" -> \"{}\";", self.nodes[i], self.nodes[j]);
                }
                EdgeMark::Backward => {
                    let _ = writeln!(out, "    \"{}\" -> \"{}\";", self.nodes[j], self.nodes[i]);
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn flip_info(info: EdgeInfo) -> EdgeInfo {
    EdgeInfo {
        gamma: -info.gamma,
        lambda_src: info.lambda_dst,
        lambda_dst: info.lambda_src,
        ctmi: info.ctmi,
        p_value: info.p_value,
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDto {
    nodes: Vec<String>,
    edges: Vec<EdgeDto>,
    self_loops: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    self_loop_nodes: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    src: String,
    dst: String,
    mark: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_src: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_dst: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ctmi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_value: Option<f64>,
}

/// Separating sets found during skeleton discovery, keyed by unordered
/// name pair.
#[derive(Clone, Debug, Default)]
pub struct SepsetTable {
    map: BTreeMap<(String, String), Vec<String>>,
}

impl SepsetTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: &str, b: &str, mut sep: Vec<String>) {
        sep.sort();
        self.map.insert(name_key(a, b), sep);
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&[String]> {
        self.map.get(&name_key(a, b)).map(Vec::as_slice)
    }

    pub fn contains(&self, a: &str, b: &str, member: &str) -> bool {
        self.get(a, b).is_some_and(|s| s.iter().any(|m| m == member))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &Vec<String>)> {
        self.map.iter()
    }
}

fn name_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}
