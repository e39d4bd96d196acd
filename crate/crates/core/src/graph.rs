//! Digraph model, edge-list parsing, strong connectivity and random
//! strongly connected generation.
//!
//! An edge `src -> dst` means `src` transmits to `dst`: `src` is an
//! in-neighbor of `dst` and `dst` is an out-neighbor of `src`. Node ids are
//! `0..n`. Edges are numbered in `(src, dst)` lexicographic order and the
//! edge id is the index into [`WeightState::edge_weights`](crate::WeightState).

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    out_offsets: Vec<usize>,
    out_neighbors: Vec<Vec<usize>>,
    in_neighbors: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl Digraph {
    /// Builds a digraph from `(src, dst)` pairs.
    ///
    /// Rejects self-loops, duplicates, out-of-range ids and `n < 2`.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for (src, dst) in edges {
            check_edge(n, src, dst)?;
            if !seen.insert((src, dst)) {
                return Err(Error::DuplicateEdge { src, dst });
            }
            list.push((src, dst));
        }
        Ok(Self::from_checked(n, list))
    }

    fn from_checked(n: usize, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        let mut out_neighbors = vec![Vec::new(); n];
        let mut in_neighbors = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (id, &(src, dst)) in edges.iter().enumerate() {
            out_neighbors[src].push(dst);
            in_neighbors[dst].push(src);
            in_edges[dst].push(id);
        }
        let mut out_offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        out_offsets.push(0);
        for outs in &out_neighbors {
            acc += outs.len();
            out_offsets.push(acc);
        }
        Digraph {
            n,
            edges,
            out_offsets,
            out_neighbors,
            in_neighbors,
            in_edges,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// All edges as `(src, dst)` in edge-id order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_neighbors[j]
    }

    pub fn in_neighbors(&self, j: usize) -> &[usize] {
        &self.in_neighbors[j]
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.out_neighbors[j].len()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        self.in_neighbors[j].len()
    }

    /// Edge ids of the outgoing edges of `j`, aligned with [`Self::out_neighbors`].
    pub fn out_edge_ids(&self, j: usize) -> std::ops::Range<usize> {
        self.out_offsets[j]..self.out_offsets[j + 1]
    }

    /// Edge ids of the incoming edges of `j`, aligned with [`Self::in_neighbors`].
    pub fn in_edge_ids(&self, j: usize) -> &[usize] {
        &self.in_edges[j]
    }

    pub fn edge_id(&self, src: usize, dst: usize) -> Option<usize> {
        if src >= self.n {
            return None;
        }
        self.out_neighbors[src]
            .binary_search(&dst)
            .ok()
            .map(|k| self.out_offsets[src] + k)
    }

    /// First node with no outgoing edge, if any.
    pub fn find_sink(&self) -> Option<usize> {
        (0..self.n).find(|&j| self.out_neighbors[j].is_empty())
    }

    /// Serializes to the edge-list text format accepted by [`parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.n);
        for &(src, dst) in &self.edges {
            let _ = writeln!(out, "{src} {dst}");
        }
        out
    }
}

fn check_edge(n: usize, src: usize, dst: usize) -> Result<()> {
    for node in [src, dst] {
        if node >= n {
            return Err(Error::NodeOutOfRange { node, n });
        }
    }
    if src == dst {
        return Err(Error::SelfLoop(src));
    }
    Ok(())
}

/// Parses the edge-list format: the first non-comment line holds `n`, every
/// following non-comment line holds `src dst`. Lines starting with `#` and
/// blank lines are skipped.
pub fn parse_edge_list(text: &str) -> Result<Digraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "missing node count".into(),
    })?;
    let n: usize = header.parse().map_err(|_| Error::Parse {
        line: header_line,
        message: format!("expected node count, found {header:?}"),
    })?;
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }

    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (line, content) in lines {
        let mut fields = content.split_whitespace();
        let parse_id = |field: Option<&str>| -> Result<usize> {
            let field = field.ok_or_else(|| Error::Parse {
                line,
                message: "expected \"src dst\"".into(),
            })?;
            field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid node id {field:?}"),
            })
        };
        let src = parse_id(fields.next())?;
        let dst = parse_id(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line,
                message: "trailing fields after \"src dst\"".into(),
            });
        }
        check_edge(n, src, dst)?;
        if !seen.insert((src, dst)) {
            return Err(Error::DuplicateEdge { src, dst });
        }
        edges.push((src, dst));
    }
    Ok(Digraph::from_checked(n, edges))
}

/// True iff every ordered pair of nodes is joined by a directed path.
///
/// Forward and backward breadth-first sweeps from node 0.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    let sweep = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; g.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == g.n
    };
    sweep(&g.out_neighbors) && sweep(&g.in_neighbors)
}

/// Random strongly connected digraph: a random Hamiltonian cycle plus every
/// other ordered pair independently with probability `extra_edge_prob`.
///
/// Deterministic for a given `seed`.
pub fn random_strongly_connected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Digraph> {
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    if !(0.0..=1.0).contains(&extra_edge_prob) {
        return Err(Error::InvalidProbability(extra_edge_prob));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut cycle = HashSet::with_capacity(n);
    let mut edges = Vec::new();
    for k in 0..n {
        let edge = (order[k], order[(k + 1) % n]);
        cycle.insert(edge);
        edges.push(edge);
    }
    for src in 0..n {
        for dst in 0..n {
            if src == dst || cycle.contains(&(src, dst)) {
                continue;
            }
            if rng.gen::<f64>() < extra_edge_prob {
                edges.push((src, dst));
            }
        }
    }
    Ok(Digraph::from_checked(n, edges))
}
