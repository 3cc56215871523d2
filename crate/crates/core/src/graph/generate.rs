use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GridShape, WeightedGraph};
use crate::error::{Error, Result};

/// 4-neighbourhood grid with constant weight.
///
/// Vertex `(x, y)` has index `y * width + x`. Horizontal edges are listed
/// row by row first, then vertical edges column by column.
pub fn generate_grid(width: usize, height: usize, weight: f64) -> Result<WeightedGraph> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid dimensions must be positive, got {width}x{height}"
        )));
    }
    let idx = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::with_capacity(height * (width - 1) + width * (height - 1));
    for y in 0..height {
        for x in 0..width - 1 {
            edges.push((idx(x, y), idx(x + 1, y), weight));
        }
    }
    for x in 0..width {
        for y in 0..height - 1 {
            edges.push((idx(x, y), idx(x, y + 1), weight));
        }
    }
    Ok(WeightedGraph::new(width * height, edges)?.with_grid(GridShape { width, height }))
}

/// Uniformly random simple graph with `edge_count` distinct edges.
///
/// Weights are drawn uniformly from `(lo, hi]`, so a range starting at zero
/// still yields strictly positive weights. Edges are listed in lexicographic
/// `(tail, head)` order.
pub fn generate_random_graph(
    vertex_count: usize,
    edge_count: usize,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<WeightedGraph> {
    let (lo, hi) = weight_range;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad weight range [{lo}, {hi}]")));
    }
    let capacity = vertex_count * vertex_count.saturating_sub(1) / 2;
    if edge_count > capacity {
        return Err(Error::InvalidArgument(format!(
            "{edge_count} edges requested but a simple graph on {vertex_count} vertices has at most {capacity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, capacity, edge_count).into_vec();
    picked.sort_unstable();
    let edges: Vec<_> = picked
        .into_iter()
        .map(|k| {
            let (a, b) = pair_from_index(k, vertex_count);
            let w = hi - (hi - lo) * rng.random::<f64>();
            (a, b, w)
        })
        .collect();
    WeightedGraph::new(vertex_count, edges)
}

// Inverse of the row-major enumeration of pairs a < b.
fn pair_from_index(mut k: usize, n: usize) -> (usize, usize) {
    let mut a = 0;
    loop {
        let row = n - 1 - a;
        if k < row {
            return (a, a + 1 + k);
        }
        k -= row;
        a += 1;
    }
}
