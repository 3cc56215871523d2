//! Diagnostics for the inactive-span chain `S_{I,1} = ... = S_{I,lhat} ⊋ S_{I,lhat+1} ⊇ ... ⊇ S_{I,L} ⊋ {0}`,
//! where `S_{I,l}` is spanned by the incidence rows of the inactive edges of forest `l`.

use nalgebra::DMatrix;

use super::{ForestDecomposition, UnionFind};
use crate::error::{check_len, Error, Result};
use crate::graph::WeightedGraph;

/// Vertex limit for the dense rank computation.
pub const NESTING_VERTEX_LIMIT: usize = 2000;

const RANK_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestingProfile {
    /// Number of forests `L`.
    pub forest_count: usize,
    /// Length of the leading run of spans equal to `S_{I,1}`; `None` when the chain fails.
    pub lhat: Option<usize>,
    pub span_dims: Vec<usize>,
    pub nested: bool,
    /// Forests before the trailing run of empty inactive spans. Those trailing
    /// forests contribute nothing to `Pi_I`.
    pub effective_count: usize,
    /// `lhat` of the chain restricted to the first `effective_count` forests.
    pub effective_lhat: Option<usize>,
}

impl NestingProfile {
    /// `(L, lhat)` entering the local rate: the effective chain when it is nested.
    pub fn rate_pair(&self) -> Option<(usize, usize)> {
        self.effective_lhat.map(|lhat| (self.effective_count, lhat))
    }
}

// `lhat` of the chain over the first `l_count` spans, if it is nested.
fn chain_lhat(dims: &[usize], l_count: usize, contains: &mut dyn FnMut(usize, usize) -> bool) -> Option<usize> {
    if l_count == 0 || dims[..l_count].iter().any(|&d| d == 0) {
        return None;
    }
    let mut lhat = 1;
    while lhat < l_count && dims[lhat] == dims[0] && contains(0, lhat) {
        lhat += 1;
    }
    (lhat..l_count).all(|l| contains(l - 1, l)).then_some(lhat)
}

fn chain_profile(dims: Vec<usize>, mut contains: impl FnMut(usize, usize) -> bool) -> NestingProfile {
    let l_count = dims.len();
    let lhat = chain_lhat(&dims, l_count, &mut contains);
    let effective_count = l_count - dims.iter().rev().take_while(|&&d| d == 0).count();
    let effective_lhat = if effective_count == l_count {
        lhat
    } else {
        chain_lhat(&dims, effective_count, &mut contains)
    };
    NestingProfile {
        forest_count: l_count,
        lhat,
        span_dims: dims,
        nested: lhat.is_some(),
        effective_count,
        effective_lhat,
    }
}

fn inactive_edges_per_forest(d: &ForestDecomposition, inactive: &[bool]) -> Vec<Vec<usize>> {
    d.forests()
        .iter()
        .map(|f| f.edges().iter().copied().filter(|&e| inactive[e]).collect())
        .collect()
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

/// Dense nesting profile via ranks of stacked incidence rows.
///
/// `inactive[e]` marks the inactive edges. Limited to
/// [`NESTING_VERTEX_LIMIT`] vertices.
pub fn nesting_profile(
    d: &ForestDecomposition,
    graph: &WeightedGraph,
    inactive: &[bool],
) -> Result<NestingProfile> {
    check_len(graph.edge_count(), inactive.len())?;
    if graph.vertex_count() > NESTING_VERTEX_LIMIT {
        return Err(Error::GuardExceeded {
            what: "dense nesting profile vertex count",
            limit: NESTING_VERTEX_LIMIT,
            actual: graph.vertex_count(),
        });
    }
    let n = graph.vertex_count();
    let per_forest = inactive_edges_per_forest(d, inactive);
    let columns = |edges: &[&[usize]]| {
        let total: usize = edges.iter().map(|s| s.len()).sum();
        let mut m = DMatrix::zeros(n, total);
        let mut c = 0;
        for set in edges {
            for &e in *set {
                let (i, j) = graph.edge(e);
                m[(i, c)] = 1.0;
                m[(j, c)] = -1.0;
                c += 1;
            }
        }
        m
    };
    let dims: Vec<usize> = per_forest.iter().map(|s| numerical_rank(&columns(&[s]))).collect();
    let own = dims.clone();
    let contains = |a: usize, b: usize| {
        per_forest[b].is_empty()
            || numerical_rank(&columns(&[&per_forest[a], &per_forest[b]])) == own[a]
    };
    Ok(chain_profile(dims, contains))
}

/// Same profile computed from connectivity: the span of a set of incidence
/// rows contains an edge's row exactly when the edge's endpoints are
/// connected by that set. No size limit.
pub fn nesting_profile_combinatorial(
    d: &ForestDecomposition,
    graph: &WeightedGraph,
    inactive: &[bool],
) -> Result<NestingProfile> {
    check_len(graph.edge_count(), inactive.len())?;
    let per_forest = inactive_edges_per_forest(d, inactive);
    let dims: Vec<usize> = per_forest.iter().map(Vec::len).collect();
    let mut cache: Vec<Option<UnionFind>> = vec![None; per_forest.len()];
    let contains = |a: usize, b: usize| {
        let dsu = cache[a].get_or_insert_with(|| {
            let mut dsu = UnionFind::new(graph.vertex_count());
            for &e in &per_forest[a] {
                let (i, j) = graph.edge(e);
                dsu.union(i, j);
            }
            dsu
        });
        per_forest[b].iter().all(|&e| {
            let (i, j) = graph.edge(e);
            dsu.same(i, j)
        })
    };
    Ok(chain_profile(dims, contains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fixed_nested_forest, greedy_inactively_nested};
    use crate::graph::{generate_grid, generate_random_graph};
    use proptest::prelude::*;

    fn four_cycle() -> WeightedGraph {
        WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]).unwrap()
    }

    #[test]
    fn four_cycle_all_inactive() {
        let g = four_cycle();
        let d = fixed_nested_forest(&g).unwrap();
        let p = nesting_profile(&d, &g, &[true; 4]).unwrap();
        assert_eq!(
            p,
            NestingProfile {
                forest_count: 2,
                lhat: Some(1),
                span_dims: vec![3, 1],
                nested: true,
                effective_count: 2,
                effective_lhat: Some(1),
            }
        );
        assert_eq!(nesting_profile_combinatorial(&d, &g, &[true; 4]).unwrap(), p);
    }

    #[test]
    fn single_forest() {
        let g = generate_grid(4, 1, 1.0).unwrap();
        let d = fixed_nested_forest(&g).unwrap();
        let p = nesting_profile(&d, &g, &[true, false, true]).unwrap();
        assert_eq!((p.lhat, p.nested), (Some(1), true));
    }

    #[test]
    fn broken_chain_reports_no_lhat() {
        // forest 0 = {01}, forest 1 = {12}: neither span contains the other
        let g = generate_grid(3, 1, 1.0).unwrap();
        let d = ForestDecomposition::from_edge_sets(&g, vec![vec![0], vec![1]]).unwrap();
        let p = nesting_profile(&d, &g, &[true, true]).unwrap();
        assert!(!p.nested);
        assert_eq!(p.lhat, None);
        // a forest without inactive edges also breaks the chain
        let g = four_cycle();
        let d = fixed_nested_forest(&g).unwrap();
        let p = nesting_profile(&d, &g, &[true, true, true, false]).unwrap();
        assert!(!p.nested);
        // ... but only because it trails; the rest of the chain is nested
        assert_eq!(p.span_dims, vec![3, 0]);
        assert_eq!(p.rate_pair(), Some((1, 1)));
        // an empty span ahead of a nonempty one is not trimmed
        let d = ForestDecomposition::from_edge_sets(&g, vec![vec![3], vec![0, 1, 2]]).unwrap();
        let p = nesting_profile_combinatorial(&d, &g, &[true, true, true, false]).unwrap();
        assert_eq!((p.effective_count, p.rate_pair()), (2, None));
    }

    #[test]
    fn equal_leading_spans() {
        // two spanning trees of a triangle-with-chord graph on the same vertex set
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let d = ForestDecomposition::from_edge_sets(&g, vec![vec![0, 1], vec![2]]).unwrap();
        let p = nesting_profile(&d, &g, &[true; 3]).unwrap();
        assert_eq!((p.lhat, p.span_dims.clone()), (Some(1), vec![2, 1]));
        let g = generate_grid(2, 2, 1.0).unwrap();
        let d = ForestDecomposition::from_edge_sets(&g, vec![vec![0, 1, 2], vec![3]]).unwrap();
        let p = nesting_profile(&d, &g, &[false, true, true, true]).unwrap();
        assert_eq!(p.span_dims, vec![2, 1]);
    }

    #[test]
    fn guard() {
        let g = generate_grid(50, 41, 1.0).unwrap();
        let d = fixed_nested_forest(&g).unwrap();
        let inactive = vec![true; g.edge_count()];
        assert!(matches!(
            nesting_profile(&d, &g, &inactive),
            Err(Error::GuardExceeded { .. })
        ));
        assert!(nesting_profile_combinatorial(&d, &g, &inactive).unwrap().nested);
    }

    proptest! {
        #[test]
        fn all_inactive_peeling_is_nested(seed in 0u64..1000, nv in 3usize..50, extra in 0usize..60) {
            let ne = (nv - 1 + extra).min(nv * (nv - 1) / 2);
            let g = generate_random_graph(nv, ne, (0.1, 1.0), seed).unwrap();
            prop_assume!(g.is_connected());
            let d = fixed_nested_forest(&g).unwrap();
            let inactive = vec![true; ne];
            let p = nesting_profile(&d, &g, &inactive).unwrap();
            prop_assert!(p.nested);
            prop_assert_eq!(p, nesting_profile_combinatorial(&d, &g, &inactive).unwrap());
        }

        #[test]
        fn dense_and_combinatorial_agree(seed in 0u64..1000, nv in 3usize..20, extra in 0usize..25, mask in any::<u64>()) {
            let ne = (nv - 1 + extra).min(nv * (nv - 1) / 2);
            let g = generate_random_graph(nv, ne, (0.1, 1.0), seed).unwrap();
            let p: Vec<f64> = (0..ne).map(|e| if mask >> (e % 64) & 1 == 1 { 1.0 } else { 0.3 }).collect();
            let inactive: Vec<bool> = p.iter().map(|&x| x < 1.0).collect();
            let d = greedy_inactively_nested(&g, &p).unwrap();
            prop_assert_eq!(
                nesting_profile(&d, &g, &inactive).unwrap(),
                nesting_profile_combinatorial(&d, &g, &inactive).unwrap()
            );
        }
    }
}
