//! Active sets, duality gaps and the spectral quantities behind the local
//! convergence rate: the inactive projector `Pi_I`, the rate `phi`, the
//! iteration bound after identification and a direct check of the gradient
//! descent contraction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::forest::ForestDecomposition;
use crate::graph::WeightedGraph;
use crate::precond::{dense_t, Preconditioner, DENSE_EDGE_LIMIT};
use crate::problems::DataTerm;

/// Default threshold for `|p_e| >= 1 - eps` to count as active.
pub const DEFAULT_EPS_ACTIVE: f64 = 1e-7;

/// Relative cutoff for zero singular values and eigenvalues.
pub const SPECTRAL_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSetReport {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    /// `1 - |p_e|` per edge.
    pub margin: Vec<f64>,
}

impl ActiveSetReport {
    pub fn active_fraction(&self) -> f64 {
        let m = self.margin.len();
        if m == 0 {
            0.0
        } else {
            self.active.len() as f64 / m as f64
        }
    }

    /// `true` for inactive edges.
    pub fn inactive_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.margin.len()];
        for &e in &self.inactive {
            mask[e] = true;
        }
        mask
    }
}

pub fn active_set(p: &[f64], eps_active: f64) -> ActiveSetReport {
    let mut active = Vec::new();
    let mut inactive = Vec::new();
    let margin: Vec<f64> = p.iter().map(|x| 1.0 - x.abs()).collect();
    for (e, &m) in margin.iter().enumerate() {
        if m <= eps_active {
            active.push(e);
        } else {
            inactive.push(e);
        }
    }
    ActiveSetReport {
        active,
        inactive,
        margin,
    }
}

/// `true` for inactive edges.
pub fn inactive_mask(p: &[f64], eps_active: f64) -> Vec<bool> {
    p.iter().map(|x| 1.0 - x.abs() > eps_active).collect()
}

/// `G(u) + ||K u||_1`.
pub fn primal_objective(graph: &WeightedGraph, term: &dyn DataTerm, u: &[f64]) -> f64 {
    term.eval_g(u) + graph.total_variation(u)
}

/// `G*(-K^T p)`.
pub fn dual_objective(graph: &WeightedGraph, term: &dyn DataTerm, p: &[f64]) -> Result<f64> {
    let mut w = graph.apply_kt(p)?;
    w.iter_mut().for_each(|x| *x = -*x);
    Ok(term.eval_gstar(&w))
}

/// Signed duality gap `[G(u) + ||K u||_1] + G*(-K^T p)`.
pub fn duality_gap(graph: &WeightedGraph, term: &dyn DataTerm, u: &[f64], p: &[f64]) -> Result<f64> {
    check_len(graph.vertex_count(), u.len())?;
    check_len(graph.edge_count(), p.len())?;
    if let Some(x) = p.iter().find(|x| !(x.abs() <= 1.0 + 1e-8)) {
        return Err(Error::InvalidArgument(format!("dual point is infeasible: |p_e| = {}", x.abs())));
    }
    Ok(primal_objective(graph, term, u) + dual_objective(graph, term, p)?)
}

/// Gap normalized by `1 + |primal objective|`.
pub fn relative_gap(gap: f64, primal: f64) -> f64 {
    gap / (1.0 + primal.abs())
}

fn check_dense(rows: usize, cols: usize) -> Result<()> {
    let size = rows.max(cols);
    if size > DENSE_EDGE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "dense matrix dimension",
            limit: DENSE_EDGE_LIMIT,
            actual: size,
        });
    }
    Ok(())
}

/// Dense `K` with rows indexed by edges.
pub fn dense_incidence(graph: &WeightedGraph) -> Result<DMatrix<f64>> {
    check_dense(graph.edge_count(), graph.vertex_count())?;
    let mut k = DMatrix::zeros(graph.edge_count(), graph.vertex_count());
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        k[(e, i)] = graph.weight(e);
        k[(e, j)] = -graph.weight(e);
    }
    Ok(k)
}

/// `sigma_max / sigma_min>0` with singular values below `1e-9 sigma_max` treated as zero.
pub fn kappa(m: &DMatrix<f64>) -> Result<f64> {
    check_dense(m.nrows(), m.ncols())?;
    let sv = m.singular_values();
    let smax = sv.max();
    if !(smax > 0.0) {
        return Err(Error::InvalidArgument("condition number of a zero matrix".into()));
    }
    let smin = sv
        .iter()
        .cloned()
        .filter(|&s| s > SPECTRAL_RTOL * smax)
        .fold(f64::INFINITY, f64::min);
    Ok(smax / smin)
}

/// Largest and smallest positive eigenvalue of a positive semidefinite
/// spectrum. Spectra with all entries below `1e-10` count as zero.
pub fn spectrum_extremes(eigenvalues: &[f64]) -> Option<(f64, f64)> {
    let max = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 1e-10) {
        return None;
    }
    let min = eigenvalues
        .iter()
        .cloned()
        .filter(|&x| x > SPECTRAL_RTOL * max)
        .fold(f64::INFINITY, f64::min);
    Some((max, min))
}

fn symmetric_power(m: &DMatrix<f64>, exponent: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|x| x.powf(exponent));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Orthogonal projector onto the column space of `m` (full column rank).
fn column_projector(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let gram = m.transpose() * m;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("incidence columns of a forest are dependent".into()))?;
    Ok(m * chol.solve(&m.transpose()))
}

/// `T^{-1/2} P_A`-based pieces shared by the direct projector formulas.
fn metric_pieces(
    graph: &WeightedGraph,
    d: &ForestDecomposition,
    inactive: &[bool],
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let k = dense_incidence(graph)?;
    let pre = Preconditioner::block_forest(graph, d.clone())?;
    let t = dense_t(&pre, graph)?;
    let t_inv_half = symmetric_power(&t, -0.5);
    let active: Vec<usize> = (0..graph.edge_count()).filter(|&e| !inactive[e]).collect();
    // T is positive definite, so these columns are independent
    let proj_a = column_projector(&t_inv_half.select_columns(&active))?;
    let m = graph.edge_count();
    let pi_u = DMatrix::identity(m, m) - proj_a;
    Ok((k, t_inv_half, pi_u))
}

/// `Pi_U T^{-1/2} K`, where `Pi_U` projects onto `ker(P_A T^{-1/2})`.
pub fn restricted_operator(graph: &WeightedGraph, d: &ForestDecomposition, inactive: &[bool]) -> Result<DMatrix<f64>> {
    check_len(graph.edge_count(), inactive.len())?;
    let (k, t_inv_half, pi_u) = metric_pieces(graph, d, inactive)?;
    Ok(pi_u * t_inv_half * k)
}

#[derive(Clone, Debug)]
pub struct ProjectorReport {
    /// `K^T T^{-1/2} (I - B B^+) T^{-1/2} K` with `B = T^{-1/2} P_A`.
    pub direct: DMatrix<f64>,
    /// Projectors onto the span of the inactive incidence rows of each forest.
    pub parts: Vec<DMatrix<f64>>,
    pub summed: DMatrix<f64>,
    /// Frobenius distance between `direct` and `summed`.
    pub decomposition_residual: f64,
    /// Eigenvalues of `direct`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl ProjectorReport {
    pub fn agrees(&self, tol: f64) -> bool {
        self.decomposition_residual <= tol
    }

    /// `(lambda_max, lambda_min>0)`, or `None` for the zero matrix.
    pub fn extremes(&self) -> Option<(f64, f64)> {
        spectrum_extremes(&self.eigenvalues)
    }
}

/// Dense inactive projector assembled directly and as a sum of per-forest projectors.
pub fn inactive_projector(
    graph: &WeightedGraph,
    d: &ForestDecomposition,
    inactive: &[bool],
) -> Result<ProjectorReport> {
    check_len(graph.edge_count(), inactive.len())?;
    let (k, t_inv_half, pi_u) = metric_pieces(graph, d, inactive)?;
    let s = &t_inv_half * &k;
    let direct = s.transpose() * pi_u * &s;
    let direct = (&direct + direct.transpose()) * 0.5;

    let n = graph.vertex_count();
    let mut parts = Vec::with_capacity(d.len());
    let mut summed = DMatrix::zeros(n, n);
    for forest in d.forests() {
        let edges: Vec<usize> = forest.edges().iter().copied().filter(|&e| inactive[e]).collect();
        let mut cols = DMatrix::zeros(n, edges.len());
        for (c, &e) in edges.iter().enumerate() {
            let (i, j) = graph.edge(e);
            cols[(i, c)] = 1.0;
            cols[(j, c)] = -1.0;
        }
        let part = column_projector(&cols)?;
        summed += &part;
        parts.push(part);
    }
    let decomposition_residual = (&direct - &summed).norm();
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(direct.clone()).eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(ProjectorReport {
        direct,
        parts,
        summed,
        decomposition_residual,
        eigenvalues,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateReport {
    pub forest_count: usize,
    pub lhat: usize,
    pub kappa_gstar: f64,
    pub phi: f64,
    /// `(phi - 1) / (phi + 1)`.
    pub contraction: f64,
}

/// `phi = (L / lhat) * kappa(G*)`.
pub fn local_rate(forest_count: usize, lhat: usize, kappa_gstar: f64) -> Result<RateReport> {
    if lhat == 0 || lhat > forest_count {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= lhat <= L, got lhat = {lhat}, L = {forest_count}"
        )));
    }
    if !(kappa_gstar >= 1.0 && kappa_gstar.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa(G*) must be >= 1, got {kappa_gstar}")));
    }
    let phi = forest_count as f64 / lhat as f64 * kappa_gstar;
    Ok(RateReport {
        forest_count,
        lhat,
        kappa_gstar,
        phi,
        contraction: contraction_factor(phi),
    })
}

pub fn contraction_factor(phi: f64) -> f64 {
    (phi - 1.0) / (phi + 1.0)
}

/// `kbar + ceil((phi + 1) / 2 * ln(dist * sqrt(kappa_T) / eps))`, or `kbar`
/// when `eps` already exceeds the scaled distance.
pub fn iteration_bound(kbar: usize, dist: f64, kappa_t: f64, eps: f64, phi: f64) -> Result<usize> {
    for (name, v) in [("dist", dist), ("kappa_T", kappa_t), ("eps", eps), ("phi", phi)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    let ratio = dist * kappa_t.sqrt() / eps;
    if ratio <= 1.0 {
        return Ok(kbar);
    }
    Ok(kbar + ((phi + 1.0) / 2.0 * ratio.ln()).ceil() as usize)
}

/// Finite condition number of `T`, i.e. `lambda_max / lambda_min` of the dense metric.
pub fn metric_condition(pre: &Preconditioner, graph: &WeightedGraph) -> Result<f64> {
    let t = dense_t(pre, graph)?;
    let eig = SymmetricEigen::new(t).eigenvalues;
    let (max, min) = (eig.max(), eig.min());
    if !(min > 0.0) {
        return Err(Error::Numerical("metric is not positive definite".into()));
    }
    Ok(max / min)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Report {
    pub trials: usize,
    pub steps_checked: usize,
    pub violations: usize,
    /// Largest observed `contraction / bound` (0 when the bound is 0 and met exactly).
    pub worst_ratio: f64,
}

impl Lemma1Report {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Gradient descent on `h(A x)` with `h = 1/2 x^T H x`, `l_h I <= H <= L_h I`,
/// and step `1/t`, `t = (L_h sigma_max^2 + l_h sigma_min>0^2) / 2`. Every step
/// is checked against the contraction `(phi - 1)/(phi + 1)`, `phi = kappa(A)^2 L_h / l_h`,
/// relaxed by the factor `1 + 1e-10`. `H` is drawn afresh per trial.
pub fn lemma1_verify(a: &DMatrix<f64>, l_h: f64, big_l_h: f64, trials: usize, seed: u64) -> Result<Lemma1Report> {
    if !(l_h > 0.0 && big_l_h >= l_h) {
        return Err(Error::InvalidArgument(format!("need 0 < l_h <= L_h, got {l_h}, {big_l_h}")));
    }
    check_dense(a.nrows(), a.ncols())?;
    // squared singular values straight from the Gram matrix
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let s2max = eig.max();
    if !(s2max > 0.0) {
        return Err(Error::InvalidArgument("A must be nonzero".into()));
    }
    let s2min = eig
        .iter()
        .cloned()
        .filter(|&s| s > 1e-12 * s2max)
        .fold(f64::INFINITY, f64::min);
    let t = (big_l_h * s2max + l_h * s2min) / 2.0;
    let phi = s2max / s2min * big_l_h / l_h;
    let bound = contraction_factor(phi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = a.nrows();
    let mut report = Lemma1Report {
        trials,
        steps_checked: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    for _ in 0..trials {
        let q = random_orthogonal(m, &mut rng);
        let mut spec: Vec<f64> = (0..m).map(|_| rng.random_range(l_h..=big_l_h)).collect();
        if m >= 2 {
            spec[0] = l_h;
            spec[1] = big_l_h;
        }
        let h = &q * DMatrix::from_diagonal(&DVector::from_vec(spec)) * q.transpose();
        // minimizer x* = 0; start in ran A^T
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x = a.transpose() * y;
        let x0 = x.norm();
        for _ in 0..60 {
            let before = x.norm();
            if before <= 1e-8 * x0 || before == 0.0 {
                break;
            }
            let step = a.transpose() * (&h * (a * &x));
            x -= step / t;
            let ratio = x.norm() / before;
            report.steps_checked += 1;
            if ratio > bound * (1.0 + 1e-10) + 1e-14 {
                report.violations += 1;
            }
            let rel = if bound > 0.0 { ratio / bound } else if ratio <= 1e-14 { 0.0 } else { f64::INFINITY };
            report.worst_ratio = report.worst_ratio.max(rel);
        }
    }
    Ok(report)
}

/// Checks strict complementarity at a solution: every active edge must have
/// `|(K u*)_e| > threshold`. Returns the smallest such value (infinity without active edges).
pub fn strict_complementarity_margin(graph: &WeightedGraph, u: &[f64], p: &[f64], eps_active: f64) -> Result<f64> {
    let ku = graph.apply_k(u)?;
    check_len(graph.edge_count(), p.len())?;
    Ok(active_set(p, eps_active)
        .active
        .iter()
        .map(|&e| ku[e].abs())
        .fold(f64::INFINITY, f64::min))
}

/// First index after which the sequence never changes again.
pub fn stabilization_index<T: PartialEq>(seq: &[T]) -> Option<usize> {
    let last = seq.last()?;
    let mut k = seq.len() - 1;
    while k > 0 && seq[k - 1] == *last {
        k -= 1;
    }
    Some(k)
}

/// Least-squares slope of `log10(values)` against the index over entries above `floor`.
pub fn log_slope(values: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > floor)
        .map(|(k, &v)| (k as f64, v.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// First `j` where `dists[j] > rate^j * dists[0] * (1 + rtol) + atol`, if any.
pub fn envelope_violation(dists: &[f64], rate: f64, rtol: f64, atol: f64) -> Option<usize> {
    let d0 = *dists.first()?;
    let mut env = d0;
    for (j, &d) in dists.iter().enumerate() {
        if d > env * (1.0 + rtol) + atol {
            return Some(j);
        }
        env *= rate;
    }
    None
}
