//! Ordered decompositions of the edge set into forests.
//!
//! A [`ForestDecomposition`] partitions `E` into nonempty acyclic subsets
//! `E_1, ..., E_L`. Each forest keeps a rooted layout of its trees (root =
//! lowest vertex index, vertices in breadth-first order) which the tree
//! solvers walk leaf-to-root and back.

mod nesting;
mod partition;
mod union_find;

pub use nesting::{nesting_profile, nesting_profile_combinatorial, NestingProfile, NESTING_VERTEX_LIMIT};
pub use partition::{
    fixed_nested_forest, greedy_inactively_nested, grid_chain_decomposition, minimum_spanning_forest,
    partition_weights,
};
pub use union_find::UnionFind;

use std::fmt;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// One tree of a forest, rooted at its lowest vertex index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    order: Vec<usize>,
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
}

impl Tree {
    /// Vertices in breadth-first order; `vertices()[0]` is the root.
    pub fn vertices(&self) -> &[usize] {
        &self.order
    }

    /// Position (in [`vertices`](Self::vertices)) of the parent of the vertex at `pos >= 1`.
    pub fn parent_position(&self, pos: usize) -> usize {
        self.parent[pos]
    }

    /// Global index of the edge joining the vertex at `pos >= 1` to its parent.
    pub fn parent_edge(&self, pos: usize) -> usize {
        self.parent_edge[pos]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forest {
    edges: Vec<usize>,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    /// Trees with at least one edge; isolated vertices are not listed.
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    fn build(graph: &WeightedGraph, edges: Vec<usize>) -> Self {
        let n = graph.vertex_count();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for &e in &edges {
            let (i, j) = graph.edge(e);
            adj[i].push((j, e));
            adj[j].push((i, e));
        }
        let mut visited = vec![false; n];
        let mut trees = Vec::new();
        for root in 0..n {
            if visited[root] || adj[root].is_empty() {
                continue;
            }
            visited[root] = true;
            let mut order = vec![root];
            let mut parent = vec![0];
            let mut parent_edge = vec![usize::MAX];
            let mut head = 0;
            while head < order.len() {
                let v = order[head];
                for &(w, e) in &adj[v] {
                    if !visited[w] {
                        visited[w] = true;
                        order.push(w);
                        parent.push(head);
                        parent_edge.push(e);
                    }
                }
                head += 1;
            }
            trees.push(Tree {
                order,
                parent,
                parent_edge,
            });
        }
        Self { edges, trees }
    }
}

/// Ordered partition of the edge set into nonempty forests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForestDecomposition {
    forests: Vec<Forest>,
    edge_count: usize,
}

impl ForestDecomposition {
    /// Validates `sets` against `graph` and builds the rooted layouts.
    pub fn from_edge_sets(graph: &WeightedGraph, sets: Vec<Vec<usize>>) -> Result<Self> {
        let report = validate(&sets, graph);
        if !report.is_valid() {
            return Err(Error::InvalidDecomposition(report.to_string()));
        }
        Ok(Self {
            forests: sets.into_iter().map(|s| Forest::build(graph, s)).collect(),
            edge_count: graph.edge_count(),
        })
    }

    pub fn forests(&self) -> &[Forest] {
        &self.forests
    }

    /// Number of forests `L`.
    pub fn len(&self) -> usize {
        self.forests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forests.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn edge_sets(&self) -> Vec<Vec<usize>> {
        self.forests.iter().map(|f| f.edges.clone()).collect()
    }

    /// Forest index of every edge.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.edge_count];
        for (l, f) in self.forests.iter().enumerate() {
            for &e in &f.edges {
                out[e] = l;
            }
        }
        out
    }

    /// Text form: line `l` holds the (0-based) edge indices of `E_l`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.forests {
            let line: Vec<String> = f.edges.iter().map(|e| e.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(graph: &WeightedGraph, text: &str) -> Result<Self> {
        let mut sets = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let set = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Error::Parse {
                        line: ln + 1,
                        message: format!("bad edge index '{t}'"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            sets.push(set);
        }
        Self::from_edge_sets(graph, sets)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoForests,
    EmptyForest { forest: usize },
    EdgeOutOfRange { forest: usize, edge: usize },
    DuplicateEdge { edge: usize, first: usize, second: usize },
    UncoveredEdge { edge: usize },
    Cycle { forest: usize, edge: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoForests => write!(f, "no forests"),
            Self::EmptyForest { forest } => write!(f, "forest {forest} is empty"),
            Self::EdgeOutOfRange { forest, edge } => write!(f, "forest {forest} lists unknown edge {edge}"),
            Self::DuplicateEdge { edge, first, second } => {
                write!(f, "edge {edge} appears in forests {first} and {second}")
            }
            Self::UncoveredEdge { edge } => write!(f, "edge {edge} is not covered"),
            Self::Cycle { forest, edge } => write!(f, "edge {edge} closes a cycle in forest {forest}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks disjointness, cover, acyclicity and nonemptiness of `sets`.
pub fn validate(sets: &[Vec<usize>], graph: &WeightedGraph) -> ValidationReport {
    let mut violations = Vec::new();
    if sets.is_empty() {
        violations.push(Violation::NoForests);
    }
    let m = graph.edge_count();
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for (l, set) in sets.iter().enumerate() {
        if set.is_empty() {
            violations.push(Violation::EmptyForest { forest: l });
        }
        let mut dsu = UnionFind::new(graph.vertex_count());
        for &e in set {
            if e >= m {
                violations.push(Violation::EdgeOutOfRange { forest: l, edge: e });
                continue;
            }
            match owner[e] {
                Some(first) => violations.push(Violation::DuplicateEdge {
                    edge: e,
                    first,
                    second: l,
                }),
                None => owner[e] = Some(l),
            }
            let (i, j) = graph.edge(e);
            if !dsu.union(i, j) {
                violations.push(Violation::Cycle { forest: l, edge: e });
            }
        }
    }
    for (e, o) in owner.iter().enumerate() {
        if o.is_none() {
            violations.push(Violation::UncoveredEdge { edge: e });
        }
    }
    ValidationReport { violations }
}
