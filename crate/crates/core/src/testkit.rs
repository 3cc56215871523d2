//! Independent references for tests: brute-force box QPs by sign-pattern
//! enumeration, tightly converged cross-checked solutions and finite
//! difference checks of data-term oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{active_set, duality_gap, DEFAULT_EPS_ACTIVE};
use crate::error::{check_len, Error, Result};
use crate::graph::WeightedGraph;
use crate::problems::DataTerm;
use crate::solvers::{solve, Algorithm, PrecondStrategy, SolveConfig};

/// Largest number of coordinates accepted by [`enumerate_box_qp`].
pub const ENUMERATION_LIMIT: usize = 12;

/// A certified primal-dual pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    /// Edges with `|p_e| >= 1 - eps_active`.
    pub active: Vec<usize>,
    pub residuals: Residuals,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// Largest `|grad_e|` over free coordinates.
    pub stationarity: f64,
    /// Largest multiplier of the wrong sign over bound coordinates.
    pub multiplier: f64,
    /// Largest `max(|p_e| - 1, 0)`.
    pub feasibility: f64,
    /// Absolute duality gap, when the solution comes from a solver run.
    pub gap: f64,
}

impl Residuals {
    pub fn kkt(&self) -> f64 {
        self.stationarity.max(self.multiplier).max(self.feasibility)
    }
}

/// Minimizer of `1/2 p^T Q p + c^T p` over `||p||_inf <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxQpSolution {
    pub p: Vec<f64>,
    pub objective: f64,
    /// Per coordinate: `-1` or `1` at a bound, `0` when free.
    pub pattern: Vec<i8>,
    pub residuals: Residuals,
    /// Number of sign patterns satisfying the KKT conditions.
    pub kkt_patterns: usize,
}

const MAX: usize = ENUMERATION_LIMIT;

struct Candidate {
    index: usize,
    objective: f64,
    p: [f64; MAX],
}

fn pattern_of(mut index: usize, m: usize) -> [i8; MAX] {
    // coordinate 0 is the most significant digit; digits 0, 1, 2 map to -1, free, +1
    let mut s = [0i8; MAX];
    for e in (0..m).rev() {
        s[e] = (index % 3) as i8 - 1;
        index /= 3;
    }
    s
}

/// In-place Cholesky of the leading `k x k` block; `false` if a pivot is not
/// safely positive.
fn cholesky(a: &mut [f64; MAX * MAX], k: usize, floor: f64) -> bool {
    for j in 0..k {
        let mut d = a[j * MAX + j];
        for r in 0..j {
            d -= a[j * MAX + r] * a[j * MAX + r];
        }
        if !(d > floor) {
            return false;
        }
        let d = d.sqrt();
        a[j * MAX + j] = d;
        for i in j + 1..k {
            let mut s = a[i * MAX + j];
            for r in 0..j {
                s -= a[i * MAX + r] * a[j * MAX + r];
            }
            a[i * MAX + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64; MAX * MAX], k: usize, b: &mut [f64; MAX]) {
    for i in 0..k {
        let mut s = b[i];
        for r in 0..i {
            s -= l[i * MAX + r] * b[r];
        }
        b[i] = s / l[i * MAX + i];
    }
    for i in (0..k).rev() {
        let mut s = b[i];
        for r in i + 1..k {
            s -= l[r * MAX + i] * b[r];
        }
        b[i] = s / l[i * MAX + i];
    }
}

fn least_squares(q: &[f64; MAX * MAX], k: usize, b: &[f64; MAX]) -> [f64; MAX] {
    let a = DMatrix::from_fn(k, k, |i, j| q[i * MAX + j]);
    let rhs = DVector::from_fn(k, |i, _| b[i]);
    // minimum-norm solution through the eigenbasis of the symmetric block
    let eig = SymmetricEigen::new(a);
    let lmax = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let coef = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_fn(k, |i, _| {
        let l = eig.eigenvalues[i];
        if l.abs() > 1e-12 * lmax { coef[i] / l } else { 0.0 }
    });
    let x = &eig.eigenvectors * scaled;
    let mut out = [0.0; MAX];
    out[..k].copy_from_slice(x.as_slice());
    out
}

fn objective(q: &DMatrix<f64>, c: &[f64], p: &[f64]) -> f64 {
    let m = c.len();
    let mut v = 0.0;
    for i in 0..m {
        let mut qp = 0.0;
        for j in 0..m {
            qp += q[(i, j)] * p[j];
        }
        v += 0.5 * p[i] * qp + c[i] * p[i];
    }
    v
}

fn residuals(q: &DMatrix<f64>, c: &[f64], p: &[f64], pattern: &[i8]) -> Residuals {
    let mut r = Residuals::default();
    for (e, &s) in pattern.iter().enumerate() {
        let g: f64 = (0..c.len()).map(|j| q[(e, j)] * p[j]).sum::<f64>() + c[e];
        match s {
            0 => r.stationarity = r.stationarity.max(g.abs()),
            // at +1 the gradient must be <= 0, at -1 it must be >= 0
            _ => r.multiplier = r.multiplier.max((f64::from(s) * g).max(0.0)),
        }
        r.feasibility = r.feasibility.max(p[e].abs() - 1.0).max(0.0);
    }
    r
}

/// Solves the box QP by trying every assignment of each coordinate to `-1`,
/// free or `+1`. Free coordinates solve the reduced stationarity system
/// (Cholesky, or an SVD least-squares solve when the block is singular).
/// Candidates must be feasible with correctly signed multipliers; the one of
/// least objective wins, ties going to the lexicographically first pattern.
pub fn enumerate_box_qp(q: &DMatrix<f64>, c: &[f64]) -> Result<BoxQpSolution> {
    let m = c.len();
    if q.nrows() != m || q.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: q.nrows().max(q.ncols()),
        });
    }
    if m > ENUMERATION_LIMIT {
        return Err(Error::GuardExceeded {
            what: "box QP enumeration size",
            limit: ENUMERATION_LIMIT,
            actual: m,
        });
    }
    let scale = 1.0 + q.amax() + c.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-10 * scale;
    let pivot_floor = 1e-12 * scale;
    let total = 3usize.pow(m as u32);
    let candidates: Vec<Candidate> = (0..total)
        .into_par_iter()
        .filter_map(|index| {
            let s = pattern_of(index, m);
            let mut p = [0.0; MAX];
            let mut free = [0usize; MAX];
            let mut k = 0;
            for e in 0..m {
                if s[e] == 0 {
                    free[k] = e;
                    k += 1;
                } else {
                    p[e] = f64::from(s[e]);
                }
            }
            if k > 0 {
                let mut a = [0.0; MAX * MAX];
                let mut b = [0.0; MAX];
                for (i, &fi) in free[..k].iter().enumerate() {
                    for (j, &fj) in free[..k].iter().enumerate() {
                        a[i * MAX + j] = q[(fi, fj)];
                    }
                    let mut rhs = -c[fi];
                    for e in 0..m {
                        if s[e] != 0 {
                            rhs -= q[(fi, e)] * p[e];
                        }
                    }
                    b[i] = rhs;
                }
                let original = a;
                let x = if cholesky(&mut a, k, pivot_floor) {
                    cholesky_solve(&a, k, &mut b);
                    b
                } else {
                    least_squares(&original, k, &b)
                };
                for i in 0..k {
                    if !(x[i].abs() <= 1.0 + tol) {
                        return None;
                    }
                    p[free[i]] = x[i].clamp(-1.0, 1.0);
                }
            }
            for e in 0..m {
                let g: f64 = (0..m).map(|j| q[(e, j)] * p[j]).sum::<f64>() + c[e];
                let bad = match s[e] {
                    0 => g.abs() > tol,
                    sign => f64::from(sign) * g > tol,
                };
                if bad {
                    return None;
                }
            }
            Some(Candidate {
                index,
                objective: objective(q, c, &p[..m]),
                p,
            })
        })
        .collect();
    let best = candidates
        .iter()
        .map(|c| c.objective)
        .fold(f64::INFINITY, f64::min);
    let winner = candidates
        .iter()
        .filter(|c| c.objective <= best + 1e-12 * (1.0 + best.abs()))
        .min_by_key(|c| c.index)
        .ok_or_else(|| Error::Numerical("no sign pattern satisfies the KKT conditions".into()))?;
    let p = winner.p[..m].to_vec();
    let pattern = pattern_of(winner.index, m)[..m].to_vec();
    let residuals = residuals(q, c, &p, &pattern);
    Ok(BoxQpSolution {
        objective: winner.objective,
        p,
        pattern,
        residuals,
        kkt_patterns: candidates.len(),
    })
}

/// `argmin_{||p||_inf <= 1} 1/2 ||K^T p + f||^2` for a dense `K` (rows are
/// edges), together with the primal point `u = f + K^T p`.
pub fn exact_box_qp(k: &DMatrix<f64>, f: &[f64]) -> Result<ExactSolution> {
    check_len(k.ncols(), f.len())?;
    let fv = DVector::from_column_slice(f);
    let q = k * k.transpose();
    let c = k * &fv;
    let sol = enumerate_box_qp(&q, c.as_slice())?;
    let u = fv + k.transpose() * DVector::from_column_slice(&sol.p);
    Ok(ExactSolution {
        active: active_set(&sol.p, DEFAULT_EPS_ACTIVE).active,
        p: sol.p,
        u: u.as_slice().to_vec(),
        residuals: sol.residuals,
    })
}

/// Options for [`reference_solution_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceOptions {
    /// Relative gap target.
    pub tol: f64,
    pub max_iter: usize,
    /// Also solve in the identity metric and require `||u - u_id||_inf <= agreement`.
    pub cross_validate: bool,
    pub agreement: f64,
    pub eps_active: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 200_000,
            cross_validate: true,
            agreement: 1e-6,
            eps_active: DEFAULT_EPS_ACTIVE,
        }
    }
}

/// [`reference_solution_with`] at the given tolerance and default options.
pub fn reference_solution(graph: &WeightedGraph, term: &dyn DataTerm, tol: f64) -> Result<ExactSolution> {
    reference_solution_with(graph, term, &ReferenceOptions { tol, ..Default::default() })
}

/// Tightly converged solution from FISTA in the inactively nested metric,
/// optionally cross-checked against FISTA in the identity metric. A
/// disagreement marks the instance as unusable and is returned as an error.
pub fn reference_solution_with(
    graph: &WeightedGraph,
    term: &dyn DataTerm,
    options: &ReferenceOptions,
) -> Result<ExactSolution> {
    let config = SolveConfig {
        algorithm: Algorithm::Fista,
        strategy: PrecondStrategy::InactivelyNested,
        recondition_every: Some(1),
        tol: options.tol,
        max_iter: options.max_iter,
        eps_active: options.eps_active,
        ..SolveConfig::default()
    };
    let run = solve(graph, term, &config)?;
    if !run.converged {
        return Err(Error::Numerical(format!(
            "reference run stopped at relative gap {:e} above {:e}",
            run.trace.last().map_or(f64::NAN, |r| r.gap),
            options.tol
        )));
    }
    if options.cross_validate {
        let check = solve(
            graph,
            term,
            &SolveConfig {
                strategy: PrecondStrategy::Identity,
                recondition_every: None,
                ..config.clone()
            },
        )?;
        let diff = run
            .u
            .iter()
            .zip(&check.u)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if !(diff <= options.agreement) {
            return Err(Error::Numerical(format!(
                "reference runs disagree by {diff:e} in u; instance unusable"
            )));
        }
    }
    let gap = duality_gap(graph, term, &run.u, &run.p)?;
    Ok(ExactSolution {
        active: active_set(&run.p, options.eps_active).active,
        residuals: Residuals {
            feasibility: run.p.iter().fold(0.0f64, |a, x| a.max(x.abs() - 1.0)),
            gap,
            ..Default::default()
        },
        p: run.p,
        u: run.u,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub trials: usize,
    pub failures: usize,
    /// Largest `|fd - analytic| / max(1, |analytic|)`.
    pub worst: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

const FD_STEP: f64 = 1e-6;
const FD_RTOL: f64 = 1e-5;

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn fd_directional(f: impl Fn(&[f64]) -> f64, x: &[f64], d: &[f64]) -> f64 {
    let plus: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + FD_STEP * b).collect();
    let minus: Vec<f64> = x.iter().zip(d).map(|(a, b)| a - FD_STEP * b).collect();
    (f(&plus) - f(&minus)) / (2.0 * FD_STEP)
}

fn fd_compare(report: &mut FdReport, fd: f64, analytic: f64) {
    let err = (fd - analytic).abs() / analytic.abs().max(1.0);
    report.worst = report.worst.max(err);
    if !(err <= FD_RTOL) {
        report.failures += 1;
    }
}

/// Central differences of `eval_gstar` along random directions against
/// `grad_gstar`, at step `1e-6` and relative tolerance `1e-5`.
pub fn fd_gradient_check(term: &dyn DataTerm, trials: usize, seed: u64) -> Result<FdReport> {
    if !term.has_grad_gstar() {
        return Err(Error::Unsupported("gradient of the conjugate"));
    }
    let n = term.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport {
        trials,
        failures: 0,
        worst: 0.0,
    };
    let mut grad = vec![0.0; n];
    for _ in 0..trials {
        let w = random_vector(n, &mut rng);
        let d = random_vector(n, &mut rng);
        term.grad_gstar(&w, &mut grad)?;
        let analytic: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        let fd = fd_directional(|x| term.eval_gstar(x), &w, &d);
        fd_compare(&mut report, fd, analytic);
    }
    Ok(report)
}

/// Checks `s (z - prox_G(z, s))` against central differences of `eval_g` at
/// the prox point, i.e. the optimality condition of the proximal map for a
/// differentiable `G`.
pub fn fd_prox_check(term: &dyn DataTerm, trials: usize, seed: u64) -> Result<FdReport> {
    if !term.has_prox_g() {
        return Err(Error::Unsupported("proximal map"));
    }
    let n = term.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport {
        trials,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..trials {
        let z = random_vector(n, &mut rng);
        let d = random_vector(n, &mut rng);
        let s = rng.random_range(0.5..4.0);
        let mut u = vec![0.0; n];
        term.prox_g(&z, s, &mut u)?;
        let analytic: f64 = z.iter().zip(&u).zip(&d).map(|((zi, ui), di)| s * (zi - ui) * di).sum();
        let fd = fd_directional(|x| term.eval_g(x), &u, &d);
        fd_compare(&mut report, fd, analytic);
    }
    Ok(report)
}

/// Random forest on `vertex_count` vertices with weights uniform in
/// `weights`. Each vertex after the first links to an earlier one with
/// probability 0.85, so some instances have several trees.
pub fn random_forest_graph(vertex_count: usize, weights: (f64, f64), seed: u64) -> Result<WeightedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..vertex_count {
        if rng.random_bool(0.85) {
            let parent = rng.random_range(0..v);
            let w = rng.random_range(weights.0..=weights.1);
            // random orientation
            if rng.random_bool(0.5) {
                edges.push((parent, v, w));
            } else {
                edges.push((v, parent, w));
            }
        }
    }
    WeightedGraph::new(vertex_count, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dense_incidence;
    use crate::forest::ForestDecomposition;
    use crate::graph::generate_grid;
    use crate::problems::{DeconvDataTerm, Kernel, RofDataTerm};
    use crate::treeprox::{retrieve_dual, tv_on_forest};

    fn forest_of(g: &WeightedGraph) -> ForestDecomposition {
        ForestDecomposition::from_edge_sets(g, vec![(0..g.edge_count()).collect()]).unwrap()
    }

    #[test]
    fn single_edge_matches_tree_prox() {
        let g = WeightedGraph::new(2, [(0, 1, 0.5)]).unwrap();
        let k = dense_incidence(&g).unwrap();
        let sol = exact_box_qp(&k, &[3.0, 1.0]).unwrap();
        assert_eq!(sol.p, vec![-1.0]);
        assert!((sol.u[0] - 2.5).abs() < 1e-14 && (sol.u[1] - 1.5).abs() < 1e-14);
        assert_eq!(sol.active, vec![0]);
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = generate_grid(3, 1, 1.0).unwrap();
        let k = dense_incidence(&g).unwrap();
        let sol = exact_box_qp(&k, &[0.0; 3]).unwrap();
        assert!(sol.p.iter().all(|&x| x == 0.0));
        // on a cycle p is not unique, but u is
        let g = generate_grid(2, 2, 1.0).unwrap();
        let k = dense_incidence(&g).unwrap();
        let sol = exact_box_qp(&k, &[0.0; 4]).unwrap();
        assert!(sol.u.iter().all(|&x| x.abs() < 1e-14));
        assert!(sol.residuals.kkt() <= 1e-10);
    }

    #[test]
    fn guard_and_dimension_errors() {
        let q = DMatrix::identity(13, 13);
        assert!(matches!(enumerate_box_qp(&q, &[0.0; 13]), Err(Error::GuardExceeded { .. })));
        assert!(matches!(
            enumerate_box_qp(&DMatrix::identity(2, 2), &[0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn box_qp_against_projected_gradient() {
        // strongly convex instances: compare with many projected gradient steps
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = rng.random_range(1..=6);
            let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let q = &a * a.transpose() + DMatrix::identity(m, m) * 0.5;
            let c: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let sol = enumerate_box_qp(&q, &c).unwrap();
            assert!(sol.residuals.kkt() <= 1e-10);
            let step = 1.0 / q.symmetric_eigenvalues().max();
            let mut p = DVector::zeros(m);
            for _ in 0..20_000 {
                let g = &q * &p + DVector::from_column_slice(&c);
                p = (p - g * step).map(|x: f64| x.clamp(-1.0, 1.0));
            }
            for e in 0..m {
                assert!((p[e] - sol.p[e]).abs() < 1e-8, "{} vs {}", p[e], sol.p[e]);
            }
        }
    }

    #[test]
    fn random_trees_mutual_optimality() {
        for seed in 0..30 {
            let g = random_forest_graph(9, (0.1, 2.0), seed).unwrap();
            if g.edge_count() == 0 {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let f: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..2.0)).collect();
            let d = forest_of(&g);
            let v = tv_on_forest(&g, &d.forests()[0], &f).unwrap();
            let p = retrieve_dual(&g, &d.forests()[0], &f, &v).unwrap();
            let k = dense_incidence(&g).unwrap();
            let exact = exact_box_qp(&k, &f).unwrap();
            let obj = |p: &[f64]| {
                let kt = k.transpose() * DVector::from_column_slice(p) + DVector::from_column_slice(&f);
                0.5 * kt.norm_squared()
            };
            assert!(obj(&exact.p) <= obj(&p) + 1e-12);
            assert!(obj(&p) <= obj(&exact.p) + 1e-12);
            for i in 0..9 {
                assert!((v[i] - exact.u[i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cyclic_graph_uses_least_squares() {
        // 4-cycle: Q = K K^T is singular; the enumeration still certifies a minimizer
        let g = WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]).unwrap();
        let k = dense_incidence(&g).unwrap();
        let sol = exact_box_qp(&k, &[0.3, -0.2, 0.1, 0.05]).unwrap();
        assert!(sol.residuals.kkt() <= 1e-10);
        // interior solution: u is the mean
        for x in &sol.u {
            assert!((x - 0.0625).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_limits_in_the_weight() {
        let f = vec![0.3, -0.4, 1.2, 0.0, 0.7, -1.1];
        let term = RofDataTerm::new(f.clone()).unwrap();
        let small = generate_grid(3, 2, 1e-9).unwrap();
        let sol = reference_solution(&small, &term, 1e-13).unwrap();
        // every edge with f_i != f_j saturates
        assert_eq!(sol.active.len(), small.edge_count());
        for (a, b) in sol.u.iter().zip(&f) {
            assert!((a - b).abs() < 1e-8);
        }
        let big = generate_grid(3, 2, 20.0).unwrap();
        let sol = reference_solution(&big, &term, 1e-13).unwrap();
        let mean = f.iter().sum::<f64>() / 6.0;
        for x in &sol.u {
            assert!((x - mean).abs() < 1e-8);
        }
        assert!(sol.active.is_empty());
        assert!(sol.residuals.gap.abs() <= 1e-10);
    }

    #[test]
    fn fd_checks_pass_for_rof_and_deconv() {
        let term = RofDataTerm::new(vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        assert!(fd_gradient_check(&term, 20, 1).unwrap().passed());
        assert!(fd_prox_check(&term, 20, 1).unwrap().passed());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (w, h) = (6, 5);
        let kernel = Kernel::motion_blur(1);
        let out = (w + 2) * h;
        let f: Vec<f64> = (0..out).map(|_| rng.random_range(0.0..1.0)).collect();
        let deconv = DeconvDataTerm::new(kernel, w, h, f).unwrap();
        let report = fd_prox_check(&deconv, 10, 2).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    struct Broken(RofDataTerm);

    impl DataTerm for Broken {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn eval_g(&self, u: &[f64]) -> f64 {
            self.0.eval_g(u)
        }
        fn eval_gstar(&self, w: &[f64]) -> f64 {
            self.0.eval_gstar(w)
        }
        fn has_grad_gstar(&self) -> bool {
            true
        }
        fn grad_gstar(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
            self.0.grad_gstar(w, out)?;
            out.iter_mut().for_each(|x| *x *= 1.01);
            Ok(())
        }
    }

    #[test]
    fn broken_oracle_is_caught() {
        let term = Broken(RofDataTerm::new(vec![0.5, -1.0, 2.0]).unwrap());
        let report = fd_gradient_check(&term, 10, 4).unwrap();
        assert!(!report.passed());
        assert!(matches!(fd_prox_check(&term, 1, 0), Err(Error::Unsupported(_))));
    }
}
