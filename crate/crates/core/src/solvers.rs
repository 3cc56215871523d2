//! Dual proximal gradient, its accelerated variant and PDHG, each running in a
//! metric that can be rebuilt from the current dual iterate.

use std::fmt::Write as _;
use std::time::Instant;

use crate::analysis::{active_set, inactive_mask, primal_objective, relative_gap, DEFAULT_EPS_ACTIVE};
use crate::error::{Error, Result};
use crate::forest::{
    fixed_nested_forest, greedy_inactively_nested, grid_chain_decomposition, nesting_profile_combinatorial,
};
use crate::graph::WeightedGraph;
use crate::precond::{operator_norm_sq, scaled_dual_update, DiagonalKind, Preconditioner};
use crate::problems::DataTerm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Pg,
    Fista,
    Pdhg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondStrategy {
    Identity,
    Diagonal(DiagonalKind),
    /// Peeling with `rho = 0`, built once.
    NestedForest,
    /// Horizontal and vertical chains of a grid, built once.
    Chains,
    /// Peeling by `rho(p)`, rebuilt every `recondition_every` iterations.
    InactivelyNested,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `t = L_{G*} * lambda_max(K^T T^{-1} K)`; for PDHG `s t >= lambda_max (1 + 1e-3)`.
    Auto,
    /// `t = (L_{G*} L + l_{G*} lhat) / 2` from the nesting profile of the current
    /// inactive set, leaving out trailing forests without inactive edges. Falls
    /// back to `Auto` outside PG with nested block forests.
    LocalOptimal,
    /// Explicit dual step `t`.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    pub strategy: PrecondStrategy,
    /// Reconditioning period `n`; `None` builds the metric once.
    pub recondition_every: Option<usize>,
    pub step: StepRule,
    /// Explicit PDHG primal step `s`.
    pub primal_step: Option<f64>,
    /// PDHG split `s = sqrt(lambda_max) * balance`.
    pub balance: f64,
    /// Stop once `gap / (1 + |primal|) <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub eps_active: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Pg,
            strategy: PrecondStrategy::InactivelyNested,
            recondition_every: Some(1),
            step: StepRule::Auto,
            primal_step: None,
            balance: 1.0,
            tol: 1e-10,
            max_iter: 1000,
            eps_active: DEFAULT_EPS_ACTIVE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// Relative gap `gap / (1 + |primal_obj|)`.
    pub gap: f64,
    pub abs_gap: f64,
    pub active_frac: f64,
    pub recond: bool,
    pub forests: Option<usize>,
    pub lhat: Option<usize>,
    pub time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub const CSV_HEADER: &'static str = "iter,primal_obj,dual_obj,gap,active_frac,recond,L,lhat,time_s";

    /// First iteration whose relative gap is at most `tol`.
    pub fn iterations_to_tol(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.gap <= tol).map(|r| r.iter)
    }

    pub fn time_to_tol(&self, tol: f64) -> Option<f64> {
        self.records.iter().find(|r| r.gap <= tol).map(|r| r.time_s)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn gap_at(&self, iter: usize) -> Option<f64> {
        self.records.iter().find(|r| r.iter == iter).map(|r| r.gap)
    }

    /// CSV text; `with_time = false` writes `0` in the time column.
    pub fn to_csv(&self, with_time: bool) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{},{},{},{},{}",
                r.iter,
                r.primal_obj,
                r.dual_obj,
                r.gap,
                r.active_frac,
                u8::from(r.recond),
                opt(r.forests),
                opt(r.lhat),
                if with_time { r.time_s } else { 0.0 }
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub trace: ConvergenceTrace,
    pub converged: bool,
    /// Number of updates performed.
    pub iterations: usize,
    /// Dual step `t` in use at termination.
    pub dual_step: f64,
    /// PDHG primal step `s`.
    pub primal_step: Option<f64>,
    pub preconditioner: Preconditioner,
}

/// State passed to observers after the record of iteration `iter`.
pub struct IterateView<'a> {
    pub iter: usize,
    pub p: &'a [f64],
    pub u: &'a [f64],
    pub preconditioner: &'a Preconditioner,
    pub dual_step: f64,
}

/// Builds the metric for `strategy` at the dual point `p`.
pub fn build_preconditioner(strategy: PrecondStrategy, graph: &WeightedGraph, p: &[f64]) -> Result<Preconditioner> {
    Ok(match strategy {
        PrecondStrategy::Identity => Preconditioner::Identity,
        PrecondStrategy::Diagonal(kind) => Preconditioner::diagonal(graph, kind),
        PrecondStrategy::NestedForest => Preconditioner::block_forest(graph, fixed_nested_forest(graph)?)?,
        PrecondStrategy::Chains => Preconditioner::block_forest(graph, grid_chain_decomposition(graph)?)?,
        PrecondStrategy::InactivelyNested => {
            Preconditioner::block_forest(graph, greedy_inactively_nested(graph, p)?)?
        }
    })
}

/// Rebuilds the metric when iteration `k` is a reconditioning point. Only the
/// inactively nested strategy changes after the initial build at `k = 0`.
pub fn reconditioning_hook(
    config: &SolveConfig,
    graph: &WeightedGraph,
    k: usize,
    p: &[f64],
    current: &mut Option<Preconditioner>,
) -> Result<bool> {
    let due = match current {
        None => true,
        Some(_) => {
            config.strategy == PrecondStrategy::InactivelyNested
                && matches!(config.recondition_every, Some(n) if k % n == 0)
        }
    };
    if due {
        *current = Some(build_preconditioner(config.strategy, graph, p)?);
    }
    Ok(due)
}

// `(L, lhat)` of the effective inactive chain, when nested.
fn rate_pair_of(pre: &Preconditioner, graph: &WeightedGraph, p: &[f64], eps: f64) -> Result<Option<(usize, usize)>> {
    match pre.decomposition() {
        Some(d) => Ok(nesting_profile_combinatorial(d, graph, &inactive_mask(p, eps))?.rate_pair()),
        None => Ok(None),
    }
}

fn validate(config: &SolveConfig, graph: &WeightedGraph, term: &dyn DataTerm) -> Result<()> {
    if term.dim() != graph.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.vertex_count(),
            found: term.dim(),
        });
    }
    if let Some(0) = config.recondition_every {
        return Err(Error::InvalidArgument("reconditioning period must be positive".into()));
    }
    if let StepRule::Fixed(t) = config.step {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("dual step must be positive, got {t}")));
        }
    }
    if let Some(s) = config.primal_step {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("primal step must be positive, got {s}")));
        }
    }
    if !(config.balance > 0.0 && config.balance.is_finite()) {
        return Err(Error::InvalidArgument("balance must be positive".into()));
    }
    if !(config.tol >= 0.0) {
        return Err(Error::InvalidArgument("tolerance must be nonnegative".into()));
    }
    Ok(())
}

// Dual step for PG and FISTA.
fn gradient_step(
    config: &SolveConfig,
    graph: &WeightedGraph,
    pre: &Preconditioner,
    curvature: (f64, f64),
    rate_pair: Option<(usize, usize)>,
) -> f64 {
    let (l, big_l) = curvature;
    match config.step {
        StepRule::Fixed(t) => t,
        StepRule::LocalOptimal if config.algorithm == Algorithm::Pg => match rate_pair {
            Some((forests, lhat)) => (big_l * forests as f64 + l * lhat as f64) / 2.0,
            None => big_l * operator_norm_sq(pre, graph),
        },
        _ => big_l * operator_norm_sq(pre, graph),
    }
}

struct Recorder {
    start: Instant,
    trace: ConvergenceTrace,
}

impl Recorder {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        iter: usize,
        primal: f64,
        dual: f64,
        p: &[f64],
        eps: f64,
        recond: bool,
        pre: &Preconditioner,
        lhat: Option<usize>,
    ) -> f64 {
        let abs_gap = primal + dual;
        let gap = relative_gap(abs_gap, primal);
        self.trace.records.push(TraceRecord {
            iter,
            primal_obj: primal,
            dual_obj: dual,
            gap,
            abs_gap,
            active_frac: active_set(p, eps).active_fraction(),
            recond,
            forests: pre.forest_count(),
            lhat,
            time_s: self.start.elapsed().as_secs_f64(),
        });
        gap
    }
}

/// Runs the configured algorithm.
pub fn solve(graph: &WeightedGraph, term: &dyn DataTerm, config: &SolveConfig) -> Result<SolveResult> {
    solve_observed(graph, term, config, &mut |_| {})
}

/// Like [`solve`], calling `observer` after every recorded iterate.
pub fn solve_observed(
    graph: &WeightedGraph,
    term: &dyn DataTerm,
    config: &SolveConfig,
    observer: &mut dyn FnMut(&IterateView),
) -> Result<SolveResult> {
    validate(config, graph, term)?;
    match config.algorithm {
        Algorithm::Pg | Algorithm::Fista => solve_gradient(graph, term, config, observer),
        Algorithm::Pdhg => solve_pdhg_inner(graph, term, config, observer),
    }
}

pub fn solve_pg(graph: &WeightedGraph, term: &dyn DataTerm, config: &SolveConfig) -> Result<SolveResult> {
    solve(graph, term, &SolveConfig { algorithm: Algorithm::Pg, ..config.clone() })
}

pub fn solve_fista(graph: &WeightedGraph, term: &dyn DataTerm, config: &SolveConfig) -> Result<SolveResult> {
    solve(graph, term, &SolveConfig { algorithm: Algorithm::Fista, ..config.clone() })
}

pub fn solve_pdhg(graph: &WeightedGraph, term: &dyn DataTerm, config: &SolveConfig) -> Result<SolveResult> {
    solve(graph, term, &SolveConfig { algorithm: Algorithm::Pdhg, ..config.clone() })
}

/// Momentum weight of update `k >= 1`: `(k - 1) / (k + 2)`.
pub fn fista_beta(k: usize) -> f64 {
    (k as f64 - 1.0).max(0.0) / (k as f64 + 2.0)
}

fn solve_gradient(
    graph: &WeightedGraph,
    term: &dyn DataTerm,
    config: &SolveConfig,
    observer: &mut dyn FnMut(&IterateView),
) -> Result<SolveResult> {
    if !term.has_grad_gstar() {
        return Err(Error::Unsupported("gradient of the conjugate"));
    }
    let curvature = term
        .curvature()
        .ok_or(Error::Unsupported("curvature bounds of the conjugate"))?;
    let (n, m) = (graph.vertex_count(), graph.edge_count());
    let fista = config.algorithm == Algorithm::Fista;
    let mut rec = Recorder {
        start: Instant::now(),
        trace: ConvergenceTrace::default(),
    };
    let mut p = vec![0.0; m];
    let mut p_prev = p.clone();
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut pre: Option<Preconditioner> = None;
    let mut t = 0.0;
    let mut lhat = None;
    let mut momentum_off = false;
    let mut k = 0;
    let converged = loop {
        let rebuilt = reconditioning_hook(config, graph, k, &p, &mut pre)?;
        let metric = pre.as_ref().expect("built at k = 0");
        if rebuilt {
            let pair = rate_pair_of(metric, graph, &p, config.eps_active)?;
            lhat = pair.map(|x| x.1);
            t = gradient_step(config, graph, metric, curvature, pair);
            momentum_off = k > 0;
        }
        graph.apply_kt_into(&p, &mut w);
        w.iter_mut().for_each(|x| *x = -*x);
        term.grad_gstar(&w, &mut u)?;
        let primal = primal_objective(graph, term, &u);
        let dual = term.eval_gstar(&w);
        let gap = rec.record(k, primal, dual, &p, config.eps_active, rebuilt, metric, lhat);
        observer(&IterateView {
            iter: k,
            p: &p,
            u: &u,
            preconditioner: metric,
            dual_step: t,
        });
        if gap <= config.tol {
            break true;
        }
        if k >= config.max_iter {
            break false;
        }
        let next = if fista {
            let beta = if momentum_off { 0.0 } else { fista_beta(k + 1) };
            momentum_off = false;
            let y: Vec<f64> = p.iter().zip(&p_prev).map(|(a, b)| a + beta * (a - b)).collect();
            let mut wy = graph.apply_kt(&y)?;
            wy.iter_mut().for_each(|x| *x = -*x);
            let mut uy = vec![0.0; n];
            term.grad_gstar(&wy, &mut uy)?;
            scaled_dual_update(metric, graph, &y, &uy, t)?
        } else {
            scaled_dual_update(metric, graph, &p, &u, t)?
        };
        p_prev = std::mem::replace(&mut p, next);
        k += 1;
    };
    Ok(SolveResult {
        u,
        p,
        trace: rec.trace,
        converged,
        iterations: k,
        dual_step: t,
        primal_step: None,
        preconditioner: pre.expect("built at k = 0"),
    })
}

fn pdhg_steps(config: &SolveConfig, graph: &WeightedGraph, pre: &Preconditioner) -> (f64, f64) {
    let norm = operator_norm_sq(pre, graph).max(f64::MIN_POSITIVE);
    let s = config.primal_step.unwrap_or(norm.sqrt() * config.balance);
    let t = match config.step {
        StepRule::Fixed(t) => t,
        _ => norm * (1.0 + 1e-3) / s,
    };
    (s, t)
}

fn solve_pdhg_inner(
    graph: &WeightedGraph,
    term: &dyn DataTerm,
    config: &SolveConfig,
    observer: &mut dyn FnMut(&IterateView),
) -> Result<SolveResult> {
    if !term.has_prox_g() {
        return Err(Error::Unsupported("proximal map"));
    }
    let (n, m) = (graph.vertex_count(), graph.edge_count());
    let mut rec = Recorder {
        start: Instant::now(),
        trace: ConvergenceTrace::default(),
    };
    let mut p = vec![0.0; m];
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut u_next = vec![0.0; n];
    let mut pre: Option<Preconditioner> = None;
    let (mut s, mut t) = (0.0, 0.0);
    let mut lhat = None;
    let mut k = 0;
    let converged = loop {
        let rebuilt = reconditioning_hook(config, graph, k, &p, &mut pre)?;
        let metric = pre.as_ref().expect("built at k = 0");
        if rebuilt {
            lhat = rate_pair_of(metric, graph, &p, config.eps_active)?.map(|x| x.1);
            (s, t) = pdhg_steps(config, graph, metric);
        }
        graph.apply_kt_into(&p, &mut w);
        let primal = primal_objective(graph, term, &u);
        w.iter_mut().for_each(|x| *x = -*x);
        let dual = term.eval_gstar(&w);
        let gap = rec.record(k, primal, dual, &p, config.eps_active, rebuilt, metric, lhat);
        observer(&IterateView {
            iter: k,
            p: &p,
            u: &u,
            preconditioner: metric,
            dual_step: t,
        });
        if gap <= config.tol {
            break true;
        }
        if k >= config.max_iter {
            break false;
        }
        // u+ = prox_G(u - K^T p / s, s); w holds -K^T p
        for i in 0..n {
            z[i] = u[i] + w[i] / s;
        }
        u_next.copy_from_slice(&u);
        term.prox_g(&z, s, &mut u_next)?;
        let ubar: Vec<f64> = u_next.iter().zip(&u).map(|(a, b)| 2.0 * a - b).collect();
        p = scaled_dual_update(metric, graph, &p, &ubar, t)?;
        std::mem::swap(&mut u, &mut u_next);
        k += 1;
    };
    Ok(SolveResult {
        u,
        p,
        trace: rec.trace,
        converged,
        iterations: k,
        dual_step: t,
        primal_step: Some(s),
        preconditioner: pre.expect("built at k = 0"),
    })
}
