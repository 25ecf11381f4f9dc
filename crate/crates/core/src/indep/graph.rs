use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::child_rng;

/// Simple undirected graph on `0..n` with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, repeated edges and vertices
    /// out of range.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Precondition(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::Precondition(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Precondition(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        adjacency.iter_mut().for_each(|row| row.sort_unstable());
        Ok(Self { adjacency })
    }

    /// Parses `"n m"` followed by `m` lines `"u v"`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, message: String| Error::GraphParse { line, message };
        let pair = |line: usize, l: &str| -> Result<(usize, usize)> {
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(err(line, format!("expected two integers, found {l:?}")));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| err(line, format!("{s:?}: {e}")))
            };
            Ok((parse(fields[0])?, parse(fields[1])?))
        };

        let (header_line, header) = lines
            .next()
            .ok_or_else(|| err(1, "missing header".into()))?;
        let (n, m) = pair(header_line, header)?;
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        let mut count = 0;
        for (line, l) in lines {
            let (u, v) = pair(line, l)?;
            if u >= n || v >= n {
                return Err(err(line, format!("vertex out of range 0..{n}")));
            }
            if u == v {
                return Err(err(line, format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(err(line, format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
            count += 1;
        }
        if count != m {
            return Err(err(
                header_line,
                format!("header declares {m} edges, found {count}"),
            ));
        }
        adjacency.iter_mut().for_each(|row| row.sort_unstable());
        Ok(Self { adjacency })
    }

    /// Inverse of [`Graph::parse`].
    pub fn to_edge_list(&self) -> String {
        let edges = self.edges();
        let mut out = format!("{} {}\n", self.n(), edges.len());
        for (u, v) in edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges).expect("valid path")
    }

    pub fn cycle(n: usize) -> Self {
        if n < 3 {
            return Self::path(n);
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges).expect("valid cycle")
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::new(n, &edges).expect("valid clique")
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Self::new(10, &edges).expect("valid Petersen graph")
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        let id = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Self::new(rows * cols, &edges).expect("valid grid")
    }

    pub fn hypercube(dim: usize) -> Self {
        let n = 1 << dim;
        let edges: Vec<_> = (0..n)
            .flat_map(|x| (0..dim).map(move |b| (x, x ^ (1 << b))))
            .filter(|(x, y)| x < y)
            .collect();
        Self::new(n, &edges).expect("valid hypercube")
    }

    /// Seeded random graph with maximum degree at most `max_degree`: each
    /// pair is visited once in random order and kept with probability
    /// `edge_prob` when both endpoints have room.
    pub fn random_bounded_degree(n: usize, max_degree: usize, edge_prob: f64, seed: u64) -> Self {
        let mut rng = child_rng(seed, "random_bounded_degree", n as u64);
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        pairs.shuffle(&mut rng);
        let mut degree = vec![0; n];
        let mut edges = Vec::new();
        for (u, v) in pairs {
            if degree[u] < max_degree && degree[v] < max_degree && rng.random::<f64>() < edge_prob {
                degree[u] += 1;
                degree[v] += 1;
                edges.push((u, v));
            }
        }
        Self::new(n, &edges).expect("generated edges are simple")
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect()
    }

    /// Whether `set` is a set of distinct in-range vertices with no edge
    /// inside.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut seen = BTreeSet::new();
        for &v in set {
            if v >= self.n() || !seen.insert(v) {
                return false;
            }
        }
        set.iter()
            .all(|&u| self.adjacency[u].iter().all(|v| !seen.contains(v)))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Induced subgraph on `keep` (sorted, distinct), relabelled
    /// `keep[i] ↦ i`.
    pub fn induced(&self, keep: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n()];
        for (i, &v) in keep.iter().enumerate() {
            local[v] = i;
        }
        let adjacency = keep
            .iter()
            .map(|&v| {
                self.adjacency[v]
                    .iter()
                    .filter(|&&w| local[w] != usize::MAX)
                    .map(|&w| local[w])
                    .collect()
            })
            .collect();
        Self { adjacency }
    }

    /// Vertices outside `set ∪ N(set)`, sorted.
    pub fn residual_vertices(&self, set: &[usize]) -> Vec<usize> {
        let mut removed = vec![false; self.n()];
        for &v in set {
            removed[v] = true;
            for &w in &self.adjacency[v] {
                removed[w] = true;
            }
        }
        (0..self.n()).filter(|&v| !removed[v]).collect()
    }

    /// Adds a vertex adjacent to `neighbors`.
    pub(crate) fn with_vertex(&self, neighbors: &[usize]) -> Self {
        let new = self.n();
        let mut adjacency = self.adjacency.clone();
        for &v in neighbors {
            adjacency[v].push(new);
        }
        let mut row = neighbors.to_vec();
        row.sort_unstable();
        adjacency.push(row);
        Self { adjacency }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let g = Graph::parse("3 2\n0 1\n1 2\n").unwrap();
        assert_eq!(g, Graph::path(3));
        assert_eq!(Graph::parse(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let bad = |text: &str| match Graph::parse(text) {
            Err(Error::GraphParse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(bad("3 2\n0 1\n1 1\n"), 3);
        assert_eq!(bad("3 2\n0 1\n1 0\n"), 3);
        assert_eq!(bad("3 2\n0 1\n1 7\n"), 3);
        assert_eq!(bad("3 1\n0 x\n"), 2);
        assert_eq!(bad("3 3\n0 1\n"), 1);
    }

    #[test]
    fn named_graphs() {
        let p = Graph::petersen();
        assert_eq!((p.n(), p.num_edges(), p.max_degree()), (10, 15, 3));
        assert!((0..10).all(|v| p.degree(v) == 3));
        let q = Graph::hypercube(3);
        assert_eq!((q.n(), q.num_edges()), (8, 12));
        let g = Graph::grid(3, 4);
        assert_eq!((g.n(), g.num_edges()), (12, 17));
        assert_eq!(
            Graph::cycle(4).edges(),
            vec![(0, 1), (0, 3), (1, 2), (2, 3)]
        );
    }

    #[test]
    fn random_graphs_respect_degree_bound() {
        for seed in 0..20 {
            let g = Graph::random_bounded_degree(11, 3, 0.5, seed);
            assert!(g.max_degree() <= 3);
            assert_eq!(g, Graph::random_bounded_degree(11, 3, 0.5, seed));
        }
    }

    #[test]
    fn residual_of_path() {
        let g = Graph::path(3);
        assert_eq!(g.residual_vertices(&[0]), vec![2]);
        assert_eq!(g.residual_vertices(&[]), vec![0, 1, 2]);
        assert!(g.is_independent(&[0, 2]));
        assert!(!g.is_independent(&[0, 1]));
        assert!(!g.is_independent(&[0, 0]));
    }
}
