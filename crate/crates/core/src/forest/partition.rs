use super::{ForestDecomposition, UnionFind};
use crate::error::{check_len, Error, Result};
use crate::graph::WeightedGraph;

/// Peeling weight `rho_e = 1 - |1 - |p_e||`: zero for `p_e = 0`, one on the box boundary.
pub fn partition_weights(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&pe| 1.0 - (1.0 - pe.abs()).abs()).collect()
}

/// Kruskal's minimum spanning forest over `candidates` with per-edge weights `rho`
/// (indexed by global edge). Ties are broken by ascending edge index.
pub fn minimum_spanning_forest(graph: &WeightedGraph, candidates: &[usize], rho: &[f64]) -> Vec<usize> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]).then(a.cmp(&b)));
    kruskal_sorted(graph, &sorted).0
}

// Returns (selected, rejected), both in the scan order of `sorted`.
fn kruskal_sorted(graph: &WeightedGraph, sorted: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut dsu = UnionFind::new(graph.vertex_count());
    let mut selected = Vec::new();
    let mut rejected = Vec::new();
    for &e in sorted {
        let (i, j) = graph.edge(e);
        if dsu.union(i, j) {
            selected.push(e);
        } else {
            rejected.push(e);
        }
    }
    (selected, rejected)
}

/// Greedy peeling: repeatedly removes a minimum spanning forest under
/// `rho = partition_weights(p)` until no edge is left.
pub fn greedy_inactively_nested(graph: &WeightedGraph, p: &[f64]) -> Result<ForestDecomposition> {
    check_len(graph.edge_count(), p.len())?;
    let rho = partition_weights(p);
    let mut remaining: Vec<usize> = (0..graph.edge_count()).collect();
    remaining.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]).then(a.cmp(&b)));
    let mut sets = Vec::new();
    while !remaining.is_empty() {
        let (mut forest, rest) = kruskal_sorted(graph, &remaining);
        forest.sort_unstable();
        sets.push(forest);
        remaining = rest;
    }
    if sets.is_empty() {
        return Err(Error::InvalidGraph("graph has no edges to decompose".into()));
    }
    ForestDecomposition::from_edge_sets(graph, sets)
}

/// Active-set-blind baseline: peeling with `rho = 0`, so forests follow edge order.
pub fn fixed_nested_forest(graph: &WeightedGraph) -> Result<ForestDecomposition> {
    greedy_inactively_nested(graph, &vec![0.0; graph.edge_count()])
}

/// Chain decomposition of a grid: all horizontal edges, then all vertical edges.
pub fn grid_chain_decomposition(graph: &WeightedGraph) -> Result<ForestDecomposition> {
    let shape = graph
        .grid_shape()
        .ok_or_else(|| Error::InvalidArgument("chain decomposition requires a grid graph".into()))?;
    if shape.width < 2 || shape.height < 2 {
        return Err(Error::InvalidArgument(format!(
            "chain decomposition needs both grid dimensions >= 2, got {}x{}",
            shape.width, shape.height
        )));
    }
    let split = shape.horizontal_edges();
    let sets = vec![(0..split).collect(), (split..graph.edge_count()).collect()];
    ForestDecomposition::from_edge_sets(graph, sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_grid, generate_random_graph};
    use proptest::prelude::*;

    fn four_cycle() -> WeightedGraph {
        WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]).unwrap()
    }

    #[test]
    fn rho_values() {
        assert_eq!(partition_weights(&[0.0, 1.0, -1.0]), vec![0.0, 1.0, 1.0]);
        assert!((partition_weights(&[0.9])[0] - 0.9).abs() < 1e-15);
        assert!((partition_weights(&[-0.25])[0] - 0.25).abs() < 1e-15);
    }

    // Exhaustive search over all edge subsets of size |V|-1 that form spanning trees.
    fn brute_force_mst_weight(graph: &WeightedGraph, rho: &[f64]) -> f64 {
        let m = graph.edge_count();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != graph.vertex_count() - 1 {
                continue;
            }
            let mut dsu = UnionFind::new(graph.vertex_count());
            let acyclic = (0..m)
                .filter(|e| mask & (1 << e) != 0)
                .all(|e| dsu.union(graph.edge(e).0, graph.edge(e).1));
            if acyclic {
                let w: f64 = (0..m).filter(|e| mask & (1 << e) != 0).map(|e| rho[e]).sum();
                best = best.min(w);
            }
        }
        best
    }

    #[test]
    fn triangle_msf() {
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let rho = [0.1, 0.2, 0.3];
        let f = minimum_spanning_forest(&g, &[0, 1, 2], &rho);
        assert_eq!(f, vec![0, 1]);
        assert!((brute_force_mst_weight(&g, &rho) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn msf_tie_break_and_maximality() {
        let g = four_cycle();
        assert_eq!(minimum_spanning_forest(&g, &[0, 1, 2, 3], &[0.5; 4]), vec![0, 1, 2]);
        let path = generate_grid(5, 1, 1.0).unwrap();
        assert_eq!(minimum_spanning_forest(&path, &[0, 1, 2, 3], &[0.0; 4]).len(), 4);
        assert!(minimum_spanning_forest(&path, &[], &[0.0; 4]).is_empty());
    }

    #[test]
    fn peeling_examples() {
        let d = greedy_inactively_nested(&four_cycle(), &[0.0; 4]).unwrap();
        assert_eq!(d.edge_sets(), vec![vec![0, 1, 2], vec![3]]);
        let path = generate_grid(6, 1, 1.0).unwrap();
        assert_eq!(greedy_inactively_nested(&path, &[0.3, -1.0, 1.0, 0.2, 0.0]).unwrap().len(), 1);
        let tri = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(fixed_nested_forest(&tri).unwrap().len(), 2);
    }

    #[test]
    fn active_edges_are_peeled_last() {
        // the fourth edge is active, so it is left out of the first tree
        let d = greedy_inactively_nested(&four_cycle(), &[1.0, 0.2, 0.1, 0.3]).unwrap();
        assert_eq!(d.edge_sets(), vec![vec![1, 2, 3], vec![0]]);
    }

    #[test]
    fn grid_peeling_forest_count() {
        let g = generate_grid(100, 100, 1.0).unwrap();
        let d = fixed_nested_forest(&g).unwrap();
        // recorded from the peeling itself
        assert_eq!(d.len(), 2);
        assert_eq!(d.forests()[0].edges().len(), 9999);
    }

    #[test]
    fn chains() {
        let g = generate_grid(2, 2, 1.0).unwrap();
        let d = grid_chain_decomposition(&g).unwrap();
        assert_eq!(d.edge_sets(), vec![vec![0, 1], vec![2, 3]]);
        let g = generate_grid(7, 4, 1.0).unwrap();
        let d = grid_chain_decomposition(&g).unwrap();
        assert_eq!(d.forests()[0].edges().len(), 4 * 6);
        assert_eq!(d.forests()[1].edges().len(), 7 * 3);
        assert_eq!(d.forests()[0].trees().len(), 4);
        assert!(grid_chain_decomposition(&generate_grid(1, 5, 1.0).unwrap()).is_err());
        assert!(grid_chain_decomposition(&four_cycle()).is_err());
    }

    proptest! {
        #[test]
        fn peeling_is_valid_and_deterministic(seed in 0u64..500, nv in 2usize..30, extra in 0usize..40) {
            let cap = nv * (nv - 1) / 2;
            let ne = (nv - 1 + extra).min(cap);
            let g = generate_random_graph(nv, ne, (0.1, 2.0), seed).unwrap();
            let p: Vec<f64> = (0..ne).map(|e| (e as f64 * 0.37 + seed as f64).sin()).collect();
            let d = greedy_inactively_nested(&g, &p).unwrap();
            prop_assert!(super::super::validate(&d.edge_sets(), &g).is_valid());
            prop_assert_eq!(&d, &greedy_inactively_nested(&g, &p).unwrap());
            prop_assert_eq!(d.forests()[0].edges().len(), nv - g.component_count());
        }

        #[test]
        fn msf_weight_is_minimal(seed in 0u64..200) {
            let g = generate_random_graph(6, 9, (0.1, 2.0), seed).unwrap();
            if g.is_connected() {
                let rho: Vec<f64> = g.weights().to_vec();
                let all: Vec<usize> = (0..9).collect();
                let f = minimum_spanning_forest(&g, &all, &rho);
                let w: f64 = f.iter().map(|&e| rho[e]).sum();
                prop_assert!((w - brute_force_mst_weight(&g, &rho)).abs() < 1e-12);
            }
        }
    }
}
