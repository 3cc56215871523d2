//! Metrics `T` for the scaled dual step
//!
//! ```text
//! p+ = argmin_{||p||_inf <= 1} -<K ubar, p> + t/2 ||p - p_k||_T^2
//! ```
//!
//! The block-forest metric `T = sum_l P_l^T K_l K_l^T P_l` turns the step into
//! one box-constrained least-squares problem per forest, each solved exactly
//! through the tree TV solver.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_finite, check_len, Error, Result};
use crate::forest::{Forest, ForestDecomposition};
use crate::graph::WeightedGraph;
use crate::treeprox::solve_tree_dual;

/// Edge limit for dense metric assembly.
pub const DENSE_EDGE_LIMIT: usize = 2000;

// forests are updated in parallel above this many edges
const PARALLEL_EDGE_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagonalKind {
    /// `T = diag(K K^T)`, entries `2 w_e^2`.
    KKt,
    /// Row sums of `|K|`, entries `2 w_e`.
    RowSum,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Preconditioner {
    Identity,
    Diagonal { kind: DiagonalKind, entries: Vec<f64> },
    BlockForest(ForestDecomposition),
}

impl Preconditioner {
    pub fn diagonal(graph: &WeightedGraph, kind: DiagonalKind) -> Self {
        let entries = graph
            .weights()
            .iter()
            .map(|&w| match kind {
                DiagonalKind::KKt => 2.0 * w * w,
                DiagonalKind::RowSum => 2.0 * w,
            })
            .collect();
        Self::Diagonal { kind, entries }
    }

    pub fn block_forest(graph: &WeightedGraph, d: ForestDecomposition) -> Result<Self> {
        check_len(graph.edge_count(), d.edge_count())?;
        Ok(Self::BlockForest(d))
    }

    pub fn decomposition(&self) -> Option<&ForestDecomposition> {
        match self {
            Self::BlockForest(d) => Some(d),
            _ => None,
        }
    }

    /// Number of forests `L` for the block-forest metric.
    pub fn forest_count(&self) -> Option<usize> {
        self.decomposition().map(ForestDecomposition::len)
    }
}

/// Solves the scaled dual step and returns `p+` with `||p+||_inf <= 1`.
///
/// `p_k` may lie outside the box (FISTA extrapolation); it only enters
/// through the distance term.
pub fn scaled_dual_update(
    pre: &Preconditioner,
    graph: &WeightedGraph,
    p_k: &[f64],
    ubar: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    check_len(graph.edge_count(), p_k.len())?;
    check_len(graph.vertex_count(), ubar.len())?;
    check_finite(p_k, "dual iterate")?;
    check_finite(ubar, "primal estimate")?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("dual step must be positive, got {t}")));
    }
    match pre {
        Preconditioner::Identity | Preconditioner::Diagonal { .. } => {
            let mut p = graph.apply_k(ubar)?;
            for (e, x) in p.iter_mut().enumerate() {
                let scale = match pre {
                    Preconditioner::Diagonal { entries, .. } => entries[e],
                    _ => 1.0,
                };
                *x = (p_k[e] + *x / (t * scale)).clamp(-1.0, 1.0);
            }
            Ok(p)
        }
        Preconditioner::BlockForest(d) => {
            let solve = |forest: &Forest| forest_update(graph, forest, p_k, ubar, t);
            let parts: Vec<Result<Vec<(usize, f64)>>> = if graph.edge_count() >= PARALLEL_EDGE_THRESHOLD {
                d.forests().par_iter().map(solve).collect()
            } else {
                d.forests().iter().map(solve).collect()
            };
            let mut p = vec![0.0; graph.edge_count()];
            for part in parts {
                for (e, v) in part? {
                    p[e] = v;
                }
            }
            Ok(p)
        }
    }
}

fn forest_update(
    graph: &WeightedGraph,
    forest: &Forest,
    p_k: &[f64],
    ubar: &[f64],
    t: f64,
) -> Result<Vec<(usize, f64)>> {
    // f_l = -(K_l^T p_k|E_l + ubar / t)
    let mut f: Vec<f64> = ubar.iter().map(|u| -u / t).collect();
    for &e in forest.edges() {
        let (i, j) = graph.edge(e);
        let x = graph.weight(e) * p_k[e];
        f[i] -= x;
        f[j] += x;
    }
    let mut v = vec![0.0; graph.vertex_count()];
    let mut out = Vec::with_capacity(forest.edges().len());
    for tree in forest.trees() {
        solve_tree_dual(graph, tree, &f, &mut v, &mut out)?;
    }
    Ok(out)
}

/// Objective of the scaled dual step, up to a constant.
pub fn dual_step_objective(
    pre: &Preconditioner,
    graph: &WeightedGraph,
    p_k: &[f64],
    ubar: &[f64],
    t: f64,
    p: &[f64],
) -> Result<f64> {
    let kub = graph.apply_k(ubar)?;
    let lin: f64 = kub.iter().zip(p).map(|(a, b)| a * b).sum();
    let diff: Vec<f64> = p.iter().zip(p_k).map(|(a, b)| a - b).collect();
    Ok(-lin + 0.5 * t * t_norm_sq(pre, graph, &diff)?)
}

/// `||x||_T^2`.
pub fn t_norm_sq(pre: &Preconditioner, graph: &WeightedGraph, x: &[f64]) -> Result<f64> {
    check_len(graph.edge_count(), x.len())?;
    Ok(match pre {
        Preconditioner::Identity => x.iter().map(|v| v * v).sum(),
        Preconditioner::Diagonal { entries, .. } => x.iter().zip(entries).map(|(v, d)| d * v * v).sum(),
        Preconditioner::BlockForest(d) => {
            let mut total = 0.0;
            let mut acc = vec![0.0; graph.vertex_count()];
            for forest in d.forests() {
                for &e in forest.edges() {
                    let (i, j) = graph.edge(e);
                    let v = graph.weight(e) * x[e];
                    acc[i] += v;
                    acc[j] -= v;
                }
                for &e in forest.edges() {
                    let (i, j) = graph.edge(e);
                    total += acc[i] * acc[i] + acc[j] * acc[j];
                    acc[i] = 0.0;
                    acc[j] = 0.0;
                }
            }
            total
        }
    })
}

/// Explicit `T` for small graphs.
pub fn dense_t(pre: &Preconditioner, graph: &WeightedGraph) -> Result<DMatrix<f64>> {
    let m = graph.edge_count();
    if m > DENSE_EDGE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "dense metric edge count",
            limit: DENSE_EDGE_LIMIT,
            actual: m,
        });
    }
    Ok(match pre {
        Preconditioner::Identity => DMatrix::identity(m, m),
        Preconditioner::Diagonal { entries, .. } => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)),
        Preconditioner::BlockForest(d) => {
            let mut t = DMatrix::zeros(m, m);
            let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); graph.vertex_count()];
            for forest in d.forests() {
                for &e in forest.edges() {
                    let (i, j) = graph.edge(e);
                    let w = graph.weight(e);
                    incident[i].push((e, w));
                    incident[j].push((e, -w));
                }
                for &e in forest.edges() {
                    let (i, j) = graph.edge(e);
                    for v in [i, j] {
                        for &(a, sa) in &incident[v] {
                            for &(b, sb) in &incident[v] {
                                if a == e {
                                    t[(a, b)] += sa * sb;
                                }
                            }
                        }
                    }
                }
                for &e in forest.edges() {
                    let (i, j) = graph.edge(e);
                    incident[i].clear();
                    incident[j].clear();
                }
            }
            t
        }
    })
}

/// Applies `K^T T^{-1} K` to a vertex vector.
pub fn apply_normal_operator(pre: &Preconditioner, graph: &WeightedGraph, u: &[f64], out: &mut [f64]) {
    match pre {
        Preconditioner::Identity | Preconditioner::Diagonal { .. } => {
            let mut ku = vec![0.0; graph.edge_count()];
            graph.apply_k_into(u, &mut ku);
            if let Preconditioner::Diagonal { entries, .. } = pre {
                for (x, d) in ku.iter_mut().zip(entries) {
                    *x /= d;
                }
            }
            graph.apply_kt_into(&ku, out);
        }
        Preconditioner::BlockForest(d) => {
            // each term projects onto zero-mean signals on the trees of the forest
            out.iter_mut().for_each(|x| *x = 0.0);
            for forest in d.forests() {
                for tree in forest.trees() {
                    let vs = tree.vertices();
                    let mean = vs.iter().map(|&v| u[v]).sum::<f64>() / vs.len() as f64;
                    for &v in vs {
                        out[v] += u[v] - mean;
                    }
                }
            }
        }
    }
}

/// Upper estimate of `lambda_max(K^T T^{-1} K)`.
///
/// Power iteration (relative tolerance `1e-6`) inflated by 1%, capped by an
/// analytic bound: `L` for block forests, a Gershgorin bound otherwise.
pub fn operator_norm_sq(pre: &Preconditioner, graph: &WeightedGraph) -> f64 {
    let n = graph.vertex_count();
    if graph.edge_count() == 0 {
        return 0.0;
    }
    let cap = match pre {
        Preconditioner::BlockForest(d) => d.len() as f64,
        _ => {
            let mut row = vec![0.0; n];
            for (e, &(i, j)) in graph.edges().iter().enumerate() {
                let w = graph.weight(e);
                let scale = match pre {
                    Preconditioner::Diagonal { entries, .. } => entries[e],
                    _ => 1.0,
                };
                row[i] += 2.0 * w * w / scale;
                row[j] += 2.0 * w * w / scale;
            }
            row.into_iter().fold(0.0, f64::max)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..2000 {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        apply_normal_operator(pre, graph, &x, &mut y);
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let done = (rq - estimate).abs() <= 1e-6 * rq.abs();
        estimate = rq;
        std::mem::swap(&mut x, &mut y);
        if done {
            break;
        }
    }
    (estimate * 1.01).min(cap)
}
