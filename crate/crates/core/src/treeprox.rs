//! Exact weighted TV proximity on forests by leaf-to-root message passing.
//!
//! For a tree, let `F_v(x)` be the optimal value of the subtree below `v`
//! given `u_v = x`. Its derivative is piecewise linear and increasing:
//!
//! ```text
//! F_v'(x) = (x - f_v) + sum over children c of clamp(F_c'(x), -w_c, w_c)
//! ```
//!
//! Messages are stored as breakpoint maps with slope increments plus the
//! affine form of both tails. Children are merged small-to-large. Clamping a
//! message at `+-w` yields the thresholds `lo = (F_c')^{-1}(-w)` and
//! `hi = (F_c')^{-1}(w)`, and back-substitution sets
//! `u_c = clamp(u_parent, lo, hi)`.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;

use crate::error::{check_len, Error, Result};
use crate::forest::{Forest, Tree};
use crate::graph::WeightedGraph;

/// Derivative of a convex piecewise-quadratic value function.
#[derive(Clone, Debug, Default)]
pub struct PiecewiseLinearMessage {
    // slope increments at breakpoints
    breaks: BTreeMap<OrderedFloat<f64>, f64>,
    // value = slope * x + intercept left of the first / right of the last breakpoint
    left: (f64, f64),
    right: (f64, f64),
}

impl PiecewiseLinearMessage {
    /// The unary derivative `x - f`.
    pub fn unary(f: f64) -> Self {
        Self {
            breaks: BTreeMap::new(),
            left: (1.0, -f),
            right: (1.0, -f),
        }
    }

    fn add_unary(&mut self, f: f64) {
        self.left.0 += 1.0;
        self.left.1 -= f;
        self.right.0 += 1.0;
        self.right.1 -= f;
    }

    /// Pointwise sum; merges the smaller breakpoint map into the larger one.
    pub fn absorb(&mut self, mut other: Self) {
        if other.breaks.len() > self.breaks.len() {
            std::mem::swap(&mut self.breaks, &mut other.breaks);
        }
        for (x, d) in other.breaks {
            *self.breaks.entry(x).or_insert(0.0) += d;
        }
        self.left.0 += other.left.0;
        self.left.1 += other.left.1;
        self.right.0 += other.right.0;
        self.right.1 += other.right.1;
    }

    pub fn breakpoints(&self) -> usize {
        self.breaks.len()
    }

    /// Evaluates the derivative at `x` by a left-to-right scan.
    pub fn eval(&self, x: f64) -> f64 {
        let (mut slope, mut icpt) = self.left;
        for (&bx, &d) in &self.breaks {
            if bx.0 >= x {
                break;
            }
            icpt -= d * bx.0;
            slope += d;
        }
        slope * x + icpt
    }

    /// Clips the derivative to `[-w, w]`; returns the crossing points `(lo, hi)`.
    pub fn clamp(&mut self, w: f64) -> (f64, f64) {
        // lower side, scanning from the left
        let mut floor = f64::NEG_INFINITY;
        loop {
            let (slope, icpt) = self.left;
            match self.breaks.first_key_value() {
                Some((&bx, &d)) if slope * bx.0 + icpt <= -w => {
                    self.breaks.pop_first();
                    self.left = (slope + d, icpt - d * bx.0);
                    floor = bx.0;
                }
                _ => break,
            }
        }
        let (slope, icpt) = self.left;
        // roundoff may push the crossing past a neighbouring breakpoint
        let mut lo = ((-w - icpt) / slope).max(floor);
        if let Some((&bx, _)) = self.breaks.first_key_value() {
            lo = lo.min(bx.0);
        }
        if self.breaks.is_empty() {
            // a single remaining piece spans both sides
            self.right = (slope, icpt);
        }
        *self.breaks.entry(OrderedFloat(lo)).or_insert(0.0) += slope;
        self.left = (0.0, -w);

        let mut ceil = f64::INFINITY;
        loop {
            let (slope, icpt) = self.right;
            match self.breaks.last_key_value() {
                Some((&bx, &d)) if slope * bx.0 + icpt >= w => {
                    self.breaks.pop_last();
                    self.right = (slope - d, icpt + d * bx.0);
                    ceil = bx.0;
                }
                _ => break,
            }
        }
        let (slope, icpt) = self.right;
        let mut hi = ((w - icpt) / slope).min(ceil);
        if let Some((&bx, _)) = self.breaks.last_key_value() {
            hi = hi.max(bx.0);
        }
        *self.breaks.entry(OrderedFloat(hi)).or_insert(0.0) -= slope;
        self.right = (0.0, w);
        (lo, hi)
    }

    /// Unique zero of a strictly increasing derivative.
    pub fn root(&self) -> f64 {
        let (mut slope, mut icpt) = self.left;
        for (&bx, &d) in &self.breaks {
            if slope * bx.0 + icpt >= 0.0 {
                break;
            }
            icpt -= d * bx.0;
            slope += d;
        }
        -icpt / slope
    }
}

fn solve_tree_primal(graph: &WeightedGraph, tree: &Tree, f: &[f64], v: &mut [f64]) {
    let n = tree.len();
    let order = tree.vertices();
    let mut acc: Vec<Option<PiecewiseLinearMessage>> = vec![None; n];
    let mut bounds = vec![(0.0, 0.0); n];
    let mut root_value = 0.0;
    for pos in (0..n).rev() {
        let fv = f[order[pos]];
        let msg = match acc[pos].take() {
            Some(mut m) => {
                m.add_unary(fv);
                m
            }
            None => PiecewiseLinearMessage::unary(fv),
        };
        if pos == 0 {
            root_value = msg.root();
            break;
        }
        let mut msg = msg;
        bounds[pos] = msg.clamp(graph.weight(tree.parent_edge(pos)));
        let parent = tree.parent_position(pos);
        match &mut acc[parent] {
            Some(m) => m.absorb(msg),
            slot @ None => *slot = Some(msg),
        }
    }
    v[order[0]] = root_value;
    for pos in 1..n {
        let up = v[order[tree.parent_position(pos)]];
        let (lo, hi) = bounds[pos];
        v[order[pos]] = up.clamp(lo, hi);
    }
}

// Leaf elimination of K_tree^T p = v - f. Returns the unexplained residual at the root.
fn retrieve_tree_dual(graph: &WeightedGraph, tree: &Tree, f: &[f64], v: &[f64], p: &mut [f64]) -> f64 {
    let order = tree.vertices();
    let mut r: Vec<f64> = order.iter().map(|&x| v[x] - f[x]).collect();
    for pos in (1..tree.len()).rev() {
        let e = tree.parent_edge(pos);
        let (tail, _) = graph.edge(e);
        let sign = if tail == order[pos] { 1.0 } else { -1.0 };
        p[e] = sign * r[pos] / graph.weight(e);
        let parent = tree.parent_position(pos);
        r[parent] += r[pos];
    }
    r[0]
}

fn residual_tolerance(f: &[f64], v: &[f64], tree: &Tree) -> f64 {
    let scale = tree
        .vertices()
        .iter()
        .map(|&x| f[x].abs().max(v[x].abs()))
        .fold(1.0, f64::max);
    1e-6 * scale
}

/// Solves `argmin_u 1/2 ||u - f||^2 + sum_{e in forest} w_e |u_i - u_j|`.
///
/// Vertices not touched by the forest keep `v_i = f_i`.
pub fn tv_on_forest(graph: &WeightedGraph, forest: &Forest, f: &[f64]) -> Result<Vec<f64>> {
    check_len(graph.vertex_count(), f.len())?;
    let mut v = f.to_vec();
    for tree in forest.trees() {
        solve_tree_primal(graph, tree, f, &mut v);
    }
    Ok(v)
}

/// Recovers the dual edge values from the forest optimality condition
/// `K_l^T p = v - f`. The result is indexed by global edge; entries outside
/// the forest are zero. Values are clamped to `[-1, 1]` after a residual check.
pub fn retrieve_dual(graph: &WeightedGraph, forest: &Forest, f: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_len(graph.vertex_count(), f.len())?;
    check_len(graph.vertex_count(), v.len())?;
    let mut p = vec![0.0; graph.edge_count()];
    for tree in forest.trees() {
        let residual = retrieve_tree_dual(graph, tree, f, v, &mut p);
        let tol = residual_tolerance(f, v, tree);
        if !(residual.abs() <= tol) {
            return Err(Error::Numerical(format!(
                "dual retrieval residual {residual:e} exceeds {tol:e}; v does not solve the tree problem"
            )));
        }
    }
    for &e in forest.edges() {
        p[e] = p[e].clamp(-1.0, 1.0);
    }
    Ok(p)
}

/// `argmin_{||p||_inf <= 1} 1/2 ||K_l^T p + f||^2` restricted to the forest's edges.
pub fn scaled_box_qp(graph: &WeightedGraph, forest: &Forest, f: &[f64]) -> Result<Vec<f64>> {
    let v = tv_on_forest(graph, forest, f)?;
    retrieve_dual(graph, forest, f, &v)
}

/// Per-tree fused primal solve and dual retrieval writing `p[e]` for the
/// tree's edges. Used by the block-forest dual update.
pub(crate) fn solve_tree_dual(graph: &WeightedGraph, tree: &Tree, f: &[f64], v_scratch: &mut [f64], out: &mut Vec<(usize, f64)>) -> Result<()> {
    solve_tree_primal(graph, tree, f, v_scratch);
    let order = tree.vertices();
    let mut r: Vec<f64> = order.iter().map(|&x| v_scratch[x] - f[x]).collect();
    for pos in (1..tree.len()).rev() {
        let e = tree.parent_edge(pos);
        let (tail, _) = graph.edge(e);
        let sign = if tail == order[pos] { 1.0 } else { -1.0 };
        out.push((e, (sign * r[pos] / graph.weight(e)).clamp(-1.0, 1.0)));
        let parent = tree.parent_position(pos);
        r[parent] += r[pos];
    }
    let tol = residual_tolerance(f, v_scratch, tree);
    if !(r[0].abs() <= tol) {
        return Err(Error::Numerical(format!(
            "tree dual residual {:e} exceeds {tol:e}",
            r[0]
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fixed_nested_forest, ForestDecomposition};
    use crate::graph::generate_random_graph;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_edge(w: f64) -> (WeightedGraph, ForestDecomposition) {
        let g = WeightedGraph::new(2, [(0, 1, w)]).unwrap();
        let d = ForestDecomposition::from_edge_sets(&g, vec![vec![0]]).unwrap();
        (g, d)
    }

    #[test]
    fn single_edge_closed_form() {
        let (g, d) = single_edge(0.5);
        let v = tv_on_forest(&g, &d.forests()[0], &[3.0, 1.0]).unwrap();
        assert!((v[0] - 2.5).abs() < 1e-14 && (v[1] - 1.5).abs() < 1e-14);
        let p = retrieve_dual(&g, &d.forests()[0], &[3.0, 1.0], &v).unwrap();
        assert!((p[0] + 1.0).abs() < 1e-14);

        let (g, d) = single_edge(2.0);
        let v = tv_on_forest(&g, &d.forests()[0], &[3.0, 1.0]).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_signal_is_fixed() {
        let g = generate_random_graph(12, 30, (0.1, 2.0), 4).unwrap();
        let d = fixed_nested_forest(&g).unwrap();
        let f = vec![0.7; 12];
        for forest in d.forests() {
            let v = tv_on_forest(&g, forest, &f).unwrap();
            assert!(v.iter().all(|&x| (x - 0.7).abs() < 1e-14));
            let p = retrieve_dual(&g, forest, &f, &v).unwrap();
            assert!(p.iter().all(|&x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn saturated_box() {
        let (g, d) = single_edge(1.0);
        let p = scaled_box_qp(&g, &d.forests()[0], &[1e6, -1e6]).unwrap();
        assert_eq!(p[0], -1.0);
        let p = scaled_box_qp(&g, &d.forests()[0], &[0.0, 0.0]).unwrap();
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn rejects_wrong_primal() {
        let (g, d) = single_edge(0.5);
        assert!(retrieve_dual(&g, &d.forests()[0], &[3.0, 1.0], &[3.0, 3.0]).is_err());
    }

    #[test]
    fn crossing_rounded_onto_remaining_breakpoint() {
        // roundoff puts a lower crossing exactly on the last surviving breakpoint
        let g = WeightedGraph::new(4, [(1, 0, 0.1), (2, 0, 0.5), (3, 1, 0.3)]).unwrap();
        let d = ForestDecomposition::from_edge_sets(&g, vec![vec![0, 1, 2]]).unwrap();
        let f = [0.7, 0.7, 0.3, 0.0];
        let v = tv_on_forest(&g, &d.forests()[0], &f).unwrap();
        retrieve_dual(&g, &d.forests()[0], &f, &v).unwrap();
        let p = scaled_box_qp(&g, &d.forests()[0], &f).unwrap();
        let k = DMatrix::from_fn(3, 4, |e, i| {
            let (a, b) = g.edge(e);
            g.weight(e) * if i == a { 1.0 } else if i == b { -1.0 } else { 0.0 }
        });
        let exact = crate::testkit::exact_box_qp(&k, &f).unwrap();
        for e in 0..3 {
            assert!((p[e] - exact.p[e]).abs() < 1e-10);
        }
    }

    #[test]
    fn message_clamp_and_root() {
        let mut m = PiecewiseLinearMessage::unary(1.0);
        let (lo, hi) = m.clamp(0.5);
        assert!((lo - 0.5).abs() < 1e-15 && (hi - 1.5).abs() < 1e-15);
        assert_eq!(m.eval(-10.0), -0.5);
        assert_eq!(m.eval(10.0), 0.5);
        assert!((m.eval(1.2) - 0.2).abs() < 1e-15);
        m.add_unary(3.0);
        // (x - 3) + clamp(x - 1, -.5, .5) = 0 at x = 2.5
        assert!((m.root() - 2.5).abs() < 1e-14);
    }

    // Primal objective of the forest problem.
    fn objective(g: &WeightedGraph, forest: &Forest, f: &[f64], v: &[f64]) -> f64 {
        let fit: f64 = v.iter().zip(f).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        let tv: f64 = forest
            .edges()
            .iter()
            .map(|&e| {
                let (i, j) = g.edge(e);
                g.weight(e) * (v[i] - v[j]).abs()
            })
            .sum();
        fit + tv
    }

    proptest! {
        #[test]
        fn subgradient_optimality(seed in 0u64..2000, nv in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ne = (nv - 1 + rng.random_range(0..nv)).min(nv * (nv - 1) / 2);
            let g = generate_random_graph(nv, ne, (0.05, 2.0), seed).unwrap();
            let d = fixed_nested_forest(&g).unwrap();
            let f: Vec<f64> = (0..nv).map(|_| rng.random_range(-3.0..3.0)).collect();
            for forest in d.forests() {
                let v = tv_on_forest(&g, forest, &f).unwrap();
                let q = retrieve_dual(&g, forest, &f, &v).unwrap();
                // v - f = K^T q and q_e = -sign((K v)_e) on nonzero jumps
                let mut ktq = g.apply_kt(&q).unwrap();
                for (x, (a, b)) in ktq.iter_mut().zip(v.iter().zip(&f)) { *x -= a - b; }
                prop_assert!(ktq.iter().all(|r| r.abs() < 1e-9));
                for &e in forest.edges() {
                    let (i, j) = g.edge(e);
                    let jump = v[i] - v[j];
                    if jump.abs() > 1e-9 {
                        prop_assert!((q[e] + jump.signum()).abs() < 1e-8);
                    }
                }
                // local perturbations never decrease the objective
                let base = objective(&g, forest, &f, &v);
                for k in 0..nv {
                    for h in [1e-4, -1e-4] {
                        let mut w = v.clone();
                        w[k] += h;
                        prop_assert!(objective(&g, forest, &f, &w) >= base - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn prox_is_nonexpansive(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generate_random_graph(25, 60, (0.05, 2.0), seed).unwrap();
            let d = fixed_nested_forest(&g).unwrap();
            let f: Vec<f64> = (0..25).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h: Vec<f64> = f.iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
            for forest in d.forests() {
                let a = tv_on_forest(&g, forest, &f).unwrap();
                let b = tv_on_forest(&g, forest, &h).unwrap();
                let dv: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
                let df: f64 = f.iter().zip(&h).map(|(x, y)| (x - y).powi(2)).sum();
                prop_assert!(dv.sqrt() <= df.sqrt() * (1.0 + 1e-12) + 1e-14);
            }
        }
    }
}
