//! Weighted undirected graphs and the weighted incidence operator.
//!
//! Every edge carries a fixed orientation `tail -> head` with `tail < head`;
//! the operator `K = diag(w) * grad` maps a vertex signal `u` to the edge
//! signal `(K u)_e = w_e * (u_tail - u_head)`. All edge-indexed vectors in
//! the crate follow the edge order stored here, which never changes after
//! construction.

mod generate;
mod io;

pub use generate::{generate_grid, generate_random_graph};
pub use io::{load_benchmark, parse_benchmark, write_edge_list, BenchmarkFormat};

use crate::error::{check_len, Error, Result};

/// Shape tag attached to graphs built by [`generate_grid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
}

impl GridShape {
    /// Number of horizontal edges; they occupy the first edge indices.
    pub fn horizontal_edges(&self) -> usize {
        self.height * (self.width - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    grid: Option<GridShape>,
}

impl WeightedGraph {
    /// Builds a graph from `(a, b, weight)` triples.
    ///
    /// Endpoints are reordered so that the tail is the lower vertex index.
    /// Self-loops, out-of-range endpoints and non-positive or non-finite
    /// weights are rejected.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        let mut oriented = Vec::new();
        let mut weights = Vec::new();
        for (idx, (a, b, w)) in edges.into_iter().enumerate() {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} ({a}, {b}) references a vertex outside 0..{vertex_count}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("edge {idx} is a self-loop at vertex {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!("edge {idx} has non-positive weight {w}")));
            }
            oriented.push((a.min(b), a.max(b)));
            weights.push(w);
        }
        Ok(Self {
            vertex_count,
            edges: oriented,
            weights,
            grid: None,
        })
    }

    pub(crate) fn with_grid(mut self, shape: GridShape) -> Self {
        self.grid = Some(shape);
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Oriented edges `(tail, head)` in their fixed order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub fn grid_shape(&self) -> Option<GridShape> {
        self.grid
    }

    /// Same topology with every weight multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!("weight scale must be positive, got {scale}")));
        }
        Ok(Self {
            vertex_count: self.vertex_count,
            edges: self.edges.clone(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
            grid: self.grid,
        })
    }

    /// `K u`, checked.
    pub fn apply_k(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.vertex_count, u.len())?;
        let mut out = vec![0.0; self.edge_count()];
        self.apply_k_into(u, &mut out);
        Ok(out)
    }

    /// `K^T p`, checked.
    pub fn apply_kt(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_len(self.edge_count(), p.len())?;
        let mut out = vec![0.0; self.vertex_count];
        self.apply_kt_into(p, &mut out);
        Ok(out)
    }

    /// Unchecked-length variant of [`apply_k`](Self::apply_k) for solver loops.
    pub fn apply_k_into(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.vertex_count);
        assert_eq!(out.len(), self.edges.len());
        for ((o, &(i, j)), &w) in out.iter_mut().zip(&self.edges).zip(&self.weights) {
            *o = w * (u[i] - u[j]);
        }
    }

    pub fn apply_kt_into(&self, p: &[f64], out: &mut [f64]) {
        assert_eq!(p.len(), self.edges.len());
        assert_eq!(out.len(), self.vertex_count);
        out.fill(0.0);
        for ((&pe, &(i, j)), &w) in p.iter().zip(&self.edges).zip(&self.weights) {
            let flow = w * pe;
            out[i] += flow;
            out[j] -= flow;
        }
    }

    /// Graph total variation `||K u||_1`.
    pub fn total_variation(&self, u: &[f64]) -> f64 {
        self.edges
            .iter()
            .zip(&self.weights)
            .map(|(&(i, j), &w)| w * (u[i] - u[j]).abs())
            .sum()
    }

    /// Number of connected components, isolated vertices included.
    pub fn component_count(&self) -> usize {
        let mut dsu = crate::forest::UnionFind::new(self.vertex_count);
        let mut count = self.vertex_count;
        for &(i, j) in &self.edges {
            if dsu.union(i, j) {
                count -= 1;
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Per-vertex sum of `weights[e]` over incident edges.
    pub fn weighted_degrees(&self, edge_values: &[f64]) -> Vec<f64> {
        let mut deg = vec![0.0; self.vertex_count];
        for (&(i, j), &v) in self.edges.iter().zip(edge_values) {
            deg[i] += v;
            deg[j] += v;
        }
        deg
    }
}
