//! Undirected weighted graphs and stochastic block model generation.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Undirected graph without self-loops. Each edge is stored once as
/// `(i, j, w)` with `i < j`, sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    /// Builds a graph from an edge list. Endpoints may be given in either
    /// order; duplicates and self-loops are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one node".into()));
        }
        let mut list = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) references a node outside [0, {n})"
                )));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) has weight {w}")));
            }
            list.push((a.min(b), a.max(b), w));
        }
        list.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(w) = list.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }

        let mut neighbors = vec![Vec::new(); n];
        for &(i, j, w) in &list {
            neighbors[i].push((j, w));
            neighbors[j].push((i, w));
        }
        for nb in &mut neighbors {
            nb.sort_by_key(|&(j, _)| j);
        }
        Ok(Self {
            n,
            edges: list,
            neighbors,
        })
    }

    /// Complete graph on `n` nodes with unit weights.
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(
            n,
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))),
        )
    }

    /// Path `0 - 1 - ... - (n-1)` with unit weights.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i, 1.0)))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Neighbors of `i` with edge weights, sorted by index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Symmetric weight lookup; 0 when there is no edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| self.neighbors[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Weighted degree of node `i`.
    pub fn degree(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    /// Hop distance from `source` to every node; `None` when unreachable.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &(v, _) in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// True iff a breadth-first traversal from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Plain-text edge list: a line `n m`, then one `i j w` line per edge
    /// in `(i, j)` order. Weights use the shortest representation that
    /// parses back to the same `f64`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for &(i, j, w) in &self.edges {
            let _ = writeln!(out, "{i} {j} {w}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing `n m` header".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let parse_err = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
        if head.len() != 2 {
            return Err(parse_err(hline, "header must be `n m`".into()));
        }
        let n: usize = head[0]
            .parse()
            .map_err(|e| parse_err(hline, format!("node count: {e}")))?;
        let m: usize = head[1]
            .parse()
            .map_err(|e| parse_err(hline, format!("edge count: {e}")))?;

        let mut edges = Vec::with_capacity(m);
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(ln, "edge line must be `i j w`".into()));
            }
            let i: usize = f[0].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
            let j: usize = f[1].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
            let w: f64 = f[2].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
            edges.push((i, j, w));
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: hline + 1,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Self::new(n, edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_edge_list(&text)
    }
}

/// Stochastic block model with equal-size contiguous communities: node `i`
/// belongs to community `i / (n / communities)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub n: usize,
    pub communities: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

impl SbmSpec {
    pub const DEFAULT_MAX_ATTEMPTS: usize = 100;

    pub fn new(n: usize, communities: usize, p_intra: f64, p_inter: f64, seed: u64) -> Self {
        Self {
            n,
            communities,
            p_intra,
            p_inter,
            seed,
            max_attempts: Self::DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.communities == 0 || self.n % self.communities != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} communities do not evenly divide {} nodes",
                self.communities, self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.p_intra) || !(0.0..=1.0).contains(&self.p_inter) {
            return Err(Error::InvalidArgument(
                "edge probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.p_inter > self.p_intra {
            return Err(Error::InvalidArgument(format!(
                "p_inter ({}) exceeds p_intra ({})",
                self.p_inter, self.p_intra
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidArgument("max_attempts must be positive".into()));
        }
        Ok(())
    }

    pub fn community_of(&self, node: usize) -> usize {
        node / (self.n / self.communities)
    }
}

/// Draws SBM graphs with unit weights until one is connected.
pub fn sbm_generate(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    for _ in 0..spec.max_attempts {
        let g = sbm_draw(spec, &mut rng)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::DisconnectedGraph {
        attempts: spec.max_attempts,
    })
}

/// One SBM draw, connected or not.
pub fn sbm_draw(spec: &SbmSpec, rng: &mut rng::Rng) -> Result<Graph> {
    spec.validate()?;
    let mut edges = Vec::new();
    for i in 0..spec.n {
        for j in i + 1..spec.n {
            let p = if spec.community_of(i) == spec.community_of(j) {
                spec.p_intra
            } else {
                spec.p_inter
            };
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Graph::new(spec.n, edges)
}
