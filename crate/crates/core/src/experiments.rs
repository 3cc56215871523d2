//! Desk-scale instance builders shared by the CLI presets and the acceptance
//! suite: random ROF data, regularization calibration to an active-fraction
//! band and the local rate analysis of a converged run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    active_set, envelope_violation, iteration_bound, local_rate, log_slope, metric_condition,
    stabilization_index, strict_complementarity_margin, DEFAULT_EPS_ACTIVE,
};
use crate::forest::nesting_profile_combinatorial;
use crate::error::{Error, Result};
use crate::graph::{generate_grid, generate_random_graph, WeightedGraph};
use crate::precond::{scaled_dual_update, t_norm_sq, Preconditioner};
use crate::problems::{synth_deconv_instance, DataTerm, DeconvDataTerm, Kernel, RofDataTerm};
use crate::solvers::SolveResult;
use crate::solvers::{solve, solve_observed, Algorithm, PrecondStrategy, SolveConfig, StepRule};

/// `n` values uniform in `[0, 1)`.
pub fn uniform_data(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
}

/// A ROF instance whose weights are `lambda` times those of a base graph.
#[derive(Clone, Debug)]
pub struct RofInstance {
    pub graph: WeightedGraph,
    pub term: RofDataTerm,
    pub lambda: f64,
    /// Active fraction of the calibration solve (`NaN` when not calibrated).
    pub active_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub lambda: f64,
    pub active_fraction: f64,
    pub solves: usize,
}

/// Largest number of solves spent by [`calibrate_lambda`].
pub const CALIBRATION_SOLVES: usize = 30;

fn calibration_config() -> SolveConfig {
    SolveConfig {
        algorithm: Algorithm::Pg,
        strategy: PrecondStrategy::InactivelyNested,
        recondition_every: Some(1),
        tol: 1e-10,
        max_iter: 20_000,
        ..SolveConfig::default()
    }
}

/// Active fraction of the solution at weight scale `lambda`.
pub fn active_fraction_at(base: &WeightedGraph, term: &dyn DataTerm, lambda: f64) -> Result<f64> {
    let graph = base.scaled(lambda)?;
    let run = solve(&graph, term, &calibration_config())?;
    Ok(active_set(&run.p, DEFAULT_EPS_ACTIVE).active_fraction())
}

/// Bisects `log lambda` in `[1e-4, 1e2]` until the active fraction of the
/// solution lies in `band`, using at most [`CALIBRATION_SOLVES`] solves. The
/// fraction decreases as `lambda` grows.
pub fn calibrate_lambda(base: &WeightedGraph, term: &dyn DataTerm, band: (f64, f64)) -> Result<Calibration> {
    let (lo_band, hi_band) = band;
    if !(0.0 <= lo_band && lo_band <= hi_band && hi_band <= 1.0) {
        return Err(Error::InvalidArgument(format!("bad active-fraction band [{lo_band}, {hi_band}]")));
    }
    let (mut lo, mut hi) = (1e-4f64.ln(), 1e2f64.ln());
    for solves in 1..=CALIBRATION_SOLVES {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        let frac = active_fraction_at(base, term, lambda)?;
        if frac > hi_band {
            lo = mid;
        } else if frac < lo_band {
            hi = mid;
        } else {
            return Ok(Calibration {
                lambda,
                active_fraction: frac,
                solves,
            });
        }
    }
    Err(Error::Numerical(format!(
        "no weight scale in the search range gives an active fraction in [{lo_band}, {hi_band}]"
    )))
}

fn calibrated(base: WeightedGraph, f: Vec<f64>, band: (f64, f64)) -> Result<RofInstance> {
    let term = RofDataTerm::new(f)?;
    let cal = calibrate_lambda(&base, &term, band)?;
    Ok(RofInstance {
        graph: base.scaled(cal.lambda)?,
        term,
        lambda: cal.lambda,
        active_fraction: cal.active_fraction,
    })
}

/// Active-fraction band of the small grid instance.
pub const FIG1_BAND: (f64, f64) = (0.2, 0.5);

/// `4 x 3` grid, `f` uniform in `[0, 1]`, active fraction in `FIG1_BAND`.
pub fn fig1_instance(seed: u64) -> Result<RofInstance> {
    let base = generate_grid(4, 3, 1.0)?;
    let f = uniform_data(base.vertex_count(), seed);
    calibrated(base, f, FIG1_BAND)
}

/// Square grid with about 30% active edges at the solution.
pub fn fig3_instance(side: usize, seed: u64) -> Result<RofInstance> {
    let base = generate_grid(side, side, 1.0)?;
    let f = uniform_data(base.vertex_count(), seed);
    calibrated(base, f, (0.25, 0.35))
}

/// Random graph with `ratio * vertex_count` edges, weights uniform in
/// `(0.5, 1.5]`, and an active fraction within `0.05` of `target`.
pub fn fig2_instance(vertex_count: usize, ratio: f64, target: f64, seed: u64) -> Result<RofInstance> {
    let edges = (ratio * vertex_count as f64).round() as usize;
    let base = generate_random_graph(vertex_count, edges, (0.5, 1.5), seed)?;
    let f = uniform_data(vertex_count, seed ^ 0x9e37_79b9_7f4a_7c15);
    calibrated(base, f, ((target - 0.05).max(0.0), (target + 0.05).min(1.0)))
}

/// TV deconvolution on a `side x side` grid with horizontal motion blur.
pub fn deconv_instance(
    side: usize,
    radius: usize,
    sigma: f64,
    lambda: f64,
    seed: u64,
) -> Result<(WeightedGraph, DeconvDataTerm, Vec<f64>)> {
    let graph = generate_grid(side, side, lambda)?;
    let (term, phantom) = synth_deconv_instance(side, side, Kernel::motion_blur(radius), seed, sigma)?;
    Ok((graph, term, phantom))
}

/// Iterations to reach `tol`, `None` when the run never got there.
pub fn iterations_to(run: &SolveResult, tol: f64) -> Option<usize> {
    run.trace.iterations_to_tol(tol)
}

/// Local convergence quantities of one preconditioned run.
#[derive(Clone, Debug)]
pub struct LocalAnalysis {
    /// First iterate after which the active set stays fixed.
    pub kbar: usize,
    /// Whether the run also kept its decomposition fixed from `kbar` on.
    pub metric_fixed_in_run: bool,
    /// `L` and `lhat` of the effective inactive chain at `kbar`.
    pub forests: usize,
    pub lhat: usize,
    pub phi: f64,
    /// `(phi - 1) / (phi + 1)`.
    pub contraction: f64,
    /// Two-sided rate factor `max |1 - lambda / t|` over the restricted spectrum for
    /// the dual step of the run; equals `contraction` at the locally optimal step.
    pub step_contraction: f64,
    pub dual_step: f64,
    /// Smallest `|(K u*)_e|` over active edges.
    pub complementarity_margin: f64,
    /// `||p^k - p*||_T` for `k >= kbar`, down to the roundoff floor.
    pub dists_t: Vec<f64>,
    /// First offset from `kbar` where the envelope is exceeded.
    pub envelope_violation: Option<usize>,
    pub kappa_t: f64,
    pub eps: f64,
    /// A priori bound on the iteration where `||p^k - p*|| <= eps`.
    pub bound: usize,
    /// Observed iteration where `||p^k - p*|| <= eps` first holds.
    pub measured: Option<usize>,
    /// `log10` of `step_contraction`.
    pub theoretical_slope: f64,
    /// Least-squares slope of `log10 dists_t`.
    pub empirical_slope: Option<f64>,
    pub p_star: Vec<f64>,
    pub u_star: Vec<f64>,
}

impl LocalAnalysis {
    pub fn envelope_holds(&self) -> bool {
        self.envelope_violation.is_none()
    }

    pub fn bound_holds(&self) -> bool {
        matches!(self.measured, Some(k) if k <= self.bound)
    }

    /// Strict complementarity at the limit, with `threshold` on `|(K u*)_e|`.
    pub fn strictly_complementary(&self, threshold: f64) -> bool {
        self.complementarity_margin > threshold
    }
}

fn primal_of(graph: &WeightedGraph, term: &dyn DataTerm, p: &[f64]) -> Result<Vec<f64>> {
    let mut w = graph.apply_kt(p)?;
    w.iter_mut().for_each(|x| *x = -*x);
    let mut u = vec![0.0; graph.vertex_count()];
    term.grad_gstar(&w, &mut u)?;
    Ok(u)
}

/// Runs `config` for `iterations` steps without a gap stop and finds `kbar`,
/// the iterate after which the active set no longer changes. From `p^kbar`
/// the proximal gradient iteration is continued for another `iterations`
/// steps in the metric and step of iterate `kbar`, held fixed, which is the
/// setting of the local theory. When the run itself never rebuilt a
/// different metric after `kbar` the continuation is the run's own tail. Its
/// last iterate serves as `p*`: on cyclic graphs the dual solution set is not
/// a point, so only the limit of the same iteration is meaningful for
/// distance envelopes.
pub fn local_analysis(
    graph: &WeightedGraph,
    term: &dyn DataTerm,
    config: &SolveConfig,
    iterations: usize,
    eps: f64,
) -> Result<LocalAnalysis> {
    if config.algorithm != Algorithm::Pg {
        return Err(Error::Unsupported("local analysis of methods other than PG"));
    }
    let (l_g, big_l_g) = term
        .curvature()
        .ok_or(Error::Unsupported("curvature bounds of the conjugate"))?;
    let run_config = SolveConfig {
        tol: 0.0,
        max_iter: iterations,
        ..config.clone()
    };
    let mut ps: Vec<Vec<f64>> = Vec::with_capacity(iterations + 1);
    let mut actives: Vec<Vec<usize>> = Vec::with_capacity(iterations + 1);
    let mut metrics: Vec<(Preconditioner, f64)> = Vec::new();
    let mut metric_of: Vec<usize> = Vec::with_capacity(iterations + 1);
    solve_observed(graph, term, &run_config, &mut |view| {
        ps.push(view.p.to_vec());
        actives.push(active_set(view.p, config.eps_active).active);
        if metrics.last().map(|m| (&m.0, m.1)) != Some((view.preconditioner, view.dual_step)) {
            metrics.push((view.preconditioner.clone(), view.dual_step));
        }
        metric_of.push(metrics.len() - 1);
    })?;
    let kbar = stabilization_index(&actives).ok_or_else(|| Error::Numerical("empty run".into()))?;
    let metric_fixed_in_run = metric_of[kbar..].iter().all(|&m| m == metric_of[kbar]);
    let (metric, t) = &metrics[metric_of[kbar]];
    let d = metric
        .decomposition()
        .ok_or(Error::Unsupported("local analysis needs a block-forest metric"))?;

    let mut tail = vec![ps[kbar].clone()];
    for _ in 0..iterations {
        let p = tail.last().expect("nonempty");
        let u = primal_of(graph, term, p)?;
        tail.push(scaled_dual_update(metric, graph, p, &u, *t)?);
    }
    let p_star = tail.last().expect("nonempty").clone();
    let u_star = primal_of(graph, term, &p_star)?;

    let inactive = active_set(&ps[kbar], config.eps_active).inactive_mask();
    let profile = nesting_profile_combinatorial(d, graph, &inactive)?;
    let kappa_g = big_l_g / l_g;
    let (forests, lhat, rate, step_contraction) = match profile.rate_pair() {
        Some((forests, lhat)) => {
            let rate = local_rate(forests, lhat, kappa_g)?;
            let q = (1.0 - l_g * lhat as f64 / t).abs().max((1.0 - big_l_g * forests as f64 / t).abs());
            (forests, lhat, rate, q)
        }
        // no inactive edge: the face is a point reached in one step
        None if profile.effective_count == 0 => (0, 0, local_rate(1, 1, kappa_g)?, 0.0),
        None => {
            return Err(Error::Numerical(format!(
                "decomposition at iterate {kbar} is not inactively nested: spans {:?}",
                profile.span_dims
            )))
        }
    };

    let diff = |p: &[f64]| -> Vec<f64> { p.iter().zip(&p_star).map(|(a, b)| a - b).collect() };
    let floor = 1e-12 * (1.0 + p_star.iter().map(|x| x * x).sum::<f64>().sqrt());
    let mut dists_t = Vec::new();
    for p in &tail {
        let dt = t_norm_sq(metric, graph, &diff(p))?.max(0.0).sqrt();
        if dt <= floor {
            break;
        }
        dists_t.push(dt);
    }
    let violation = envelope_violation(&dists_t, step_contraction, 1e-6, floor);

    let euclid = |p: &[f64]| diff(p).iter().map(|x| x * x).sum::<f64>().sqrt();
    let kappa_t = metric_condition(metric, graph)?;
    let dist0 = euclid(&tail[0]);
    let bound = if dist0 > 0.0 {
        iteration_bound(kbar, dist0, kappa_t, eps, rate.phi)?
    } else {
        kbar
    };
    let measured = tail.iter().position(|p| euclid(p) <= eps).map(|j| kbar + j);
    Ok(LocalAnalysis {
        kbar,
        metric_fixed_in_run,
        forests,
        lhat,
        phi: rate.phi,
        contraction: rate.contraction,
        step_contraction,
        dual_step: *t,
        complementarity_margin: strict_complementarity_margin(graph, &u_star, &p_star, config.eps_active)?,
        envelope_violation: violation,
        empirical_slope: log_slope(&dists_t, 0.0),
        theoretical_slope: step_contraction.log10(),
        dists_t,
        kappa_t,
        eps,
        bound,
        measured,
        p_star,
        u_star,
    })
}

/// PG with the locally optimal step in the inactively nested metric, `n = 1`.
pub fn preconditioned_pg() -> SolveConfig {
    SolveConfig {
        algorithm: Algorithm::Pg,
        strategy: PrecondStrategy::InactivelyNested,
        recondition_every: Some(1),
        step: StepRule::LocalOptimal,
        ..SolveConfig::default()
    }
}

/// PG with the global step in the identity metric.
pub fn identity_pg() -> SolveConfig {
    SolveConfig {
        algorithm: Algorithm::Pg,
        strategy: PrecondStrategy::Identity,
        recondition_every: None,
        step: StepRule::Auto,
        ..SolveConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_data_is_seeded() {
        assert_eq!(uniform_data(5, 1), uniform_data(5, 1));
        assert_ne!(uniform_data(5, 1), uniform_data(5, 2));
        assert!(uniform_data(100, 3).iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn calibration_lands_in_band() {
        let inst = fig1_instance(0).unwrap();
        assert!((0.2..=0.5).contains(&inst.active_fraction), "{}", inst.active_fraction);
        let again = fig1_instance(0).unwrap();
        assert_eq!(inst.lambda, again.lambda);
    }

    #[test]
    fn calibration_rejects_bad_band() {
        let g = generate_grid(2, 2, 1.0).unwrap();
        let term = RofDataTerm::new(vec![0.0; 4]).unwrap();
        assert!(calibrate_lambda(&g, &term, (0.6, 0.4)).is_err());
        // constant data never activates an edge
        assert!(calibrate_lambda(&g, &term, (0.5, 0.6)).is_err());
    }

    #[test]
    fn local_analysis_on_small_grid() {
        let inst = fig1_instance(1).unwrap();
        let a = local_analysis(&inst.graph, &inst.term, &preconditioned_pg(), 400, 1e-8).unwrap();
        assert!(a.phi >= 1.0 && a.contraction < 1.0);
        assert!(a.lhat >= 1 && a.lhat <= a.forests);
        assert!(a.bound >= a.kbar);
    }

    #[test]
    fn local_analysis_needs_forests() {
        let inst = fig1_instance(1).unwrap();
        assert!(local_analysis(&inst.graph, &inst.term, &identity_pg(), 10, 1e-8).is_err());
    }
}
