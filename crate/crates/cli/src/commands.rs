//! The four subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use graphtv::analysis::{active_set, inactive_projector, local_rate};
use graphtv::experiments::{calibrate_lambda, local_analysis, uniform_data};
use graphtv::forest::{grid_chain_decomposition, greedy_inactively_nested, nesting_profile_combinatorial, NestingProfile};
use graphtv::graph::{generate_grid, generate_random_graph, load_benchmark};
use graphtv::precond::DENSE_EDGE_LIMIT;
use graphtv::problems::{synth_deconv_instance, write_pgm};
use graphtv::*;

use crate::config::Config;
use crate::error::{CliError, CliResult};

/// Marker for a run that never reached the tolerance.
pub const FAILED: &str = "--";

fn bad(msg: impl Into<String>) -> CliError {
    CliError::BadInput(msg.into())
}

fn parse_strategy(name: &str) -> CliResult<PrecondStrategy> {
    Ok(match name {
        "identity" | "none" => PrecondStrategy::Identity,
        "diagonal" => PrecondStrategy::Diagonal(DiagonalKind::KKt),
        "diagonal-rowsum" => PrecondStrategy::Diagonal(DiagonalKind::RowSum),
        "nested-forest" => PrecondStrategy::NestedForest,
        "chains" => PrecondStrategy::Chains,
        "inactively-nested" => PrecondStrategy::InactivelyNested,
        other => return Err(bad(format!("unknown strategy '{other}'"))),
    })
}

fn parse_algorithm(name: &str) -> CliResult<Algorithm> {
    Ok(match name {
        "pg" => Algorithm::Pg,
        "fista" => Algorithm::Fista,
        "pdhg" => Algorithm::Pdhg,
        other => return Err(bad(format!("unknown algorithm '{other}'"))),
    })
}

fn parse_step(raw: &str) -> CliResult<StepRule> {
    Ok(match raw {
        "auto" => StepRule::Auto,
        "local-optimal" => StepRule::LocalOptimal,
        x => {
            let t: f64 = x.parse().map_err(|_| bad(format!("bad step '{x}'")))?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(bad(format!("step must be positive, got {t}")));
            }
            StepRule::Fixed(t)
        }
    })
}

/// `inf` (or `none`) builds the metric once.
fn parse_period(raw: &str) -> CliResult<Option<usize>> {
    match raw {
        "inf" | "none" => Ok(None),
        x => match x.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(bad(format!("recondition period must be a positive integer or inf, got '{x}'"))),
        },
    }
}

/// Solver settings shared by every run of a preset.
struct SolverDefaults {
    algorithm: &'static str,
    step: &'static str,
    max_iter: usize,
}

fn base_config(cfg: &Config, d: &SolverDefaults) -> CliResult<SolveConfig> {
    let primal_step = match cfg.str_or("primal_step", "auto").as_str() {
        "auto" => None,
        x => Some(x.parse::<f64>().map_err(|_| bad(format!("bad primal_step '{x}'")))?),
    };
    let config = SolveConfig {
        algorithm: parse_algorithm(&cfg.str_or("algorithm", d.algorithm))?,
        step: parse_step(&cfg.str_or("step", d.step))?,
        primal_step,
        balance: cfg.get_or("balance", 1.0)?,
        tol: cfg.get_or("tol", 1e-10)?,
        max_iter: cfg.get_or("max_iter", d.max_iter)?,
        eps_active: cfg.get_or("eps_active", graphtv::analysis::DEFAULT_EPS_ACTIVE)?,
        ..SolveConfig::default()
    };
    if !(config.tol >= 0.0) || config.max_iter == 0 {
        return Err(bad("tol must be nonnegative and max_iter positive"));
    }
    Ok(config)
}

fn with_strategy(base: &SolveConfig, strategy: PrecondStrategy, period: Option<usize>) -> SolveConfig {
    SolveConfig {
        strategy,
        recondition_every: period,
        ..base.clone()
    }
}

/// Graph from `grid:WxH`, `random:NV:NE` or a benchmark file, scaled by `lambda`.
fn load_graph(cfg: &Config, source: &str, seed: u64) -> CliResult<(WeightedGraph, Option<Vec<f64>>)> {
    let (graph, data) = if let Some(dims) = source.strip_prefix("grid:") {
        let (w, h) = dims
            .split_once('x')
            .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
            .ok_or_else(|| bad(format!("bad grid size '{dims}', expected WxH")))?;
        (generate_grid(w, h, 1.0)?, None)
    } else if let Some(spec) = source.strip_prefix("random:") {
        let (nv, ne) = spec
            .split_once(':')
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
            .ok_or_else(|| bad(format!("bad random graph '{spec}', expected NV:NE")))?;
        (generate_random_graph(nv, ne, (0.5, 1.5), seed)?, None)
    } else {
        load_benchmark(source)?
    };
    let lambda: f64 = cfg.get_or("lambda", 1.0)?;
    Ok((graph.scaled(lambda)?, data))
}

fn read_vector(path: &str, len: usize, what: &str) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read {what} file {path}: {e}")))?;
    let values = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number '{t}' in {path}"))))
        .collect::<CliResult<Vec<_>>>()?;
    if values.len() != len {
        return Err(bad(format!("{what} file {path} holds {} values, expected {len}", values.len())));
    }
    Ok(values)
}

/// `uniform` draws `f` in `[0, 1]` from the seed, anything else is a file.
fn load_data(cfg: &Config, graph: &WeightedGraph, from_source: Option<Vec<f64>>, seed: u64) -> CliResult<Vec<f64>> {
    let default = if from_source.is_some() { "source" } else { "uniform" };
    match cfg.str_or("data", default).as_str() {
        "source" => from_source.ok_or_else(|| bad("graph source carries no data; set data = uniform or a file")),
        "uniform" => Ok(uniform_data(graph.vertex_count(), seed)),
        path => read_vector(path, graph.vertex_count(), "data"),
    }
}

fn load_dual(cfg: &Config, graph: &WeightedGraph) -> CliResult<Vec<f64>> {
    match cfg.str_or("p", "zero").as_str() {
        "zero" => Ok(vec![0.0; graph.edge_count()]),
        path => {
            let p = read_vector(path, graph.edge_count(), "dual")?;
            if p.iter().any(|x| x.abs() > 1.0) {
                return Err(bad("dual values must lie in [-1, 1]"));
            }
            Ok(p)
        }
    }
}

fn parse_band(cfg: &Config, default: &str) -> CliResult<(f64, f64)> {
    let band: Vec<f64> = cfg.list_or("band", default)?;
    match band[..] {
        [lo, hi] => Ok((lo, hi)),
        _ => Err(bad("band needs two comma-separated values")),
    }
}

fn show_iters(n: Option<usize>) -> String {
    n.map(|n| n.to_string()).unwrap_or_else(|| FAILED.into())
}

fn show_time(t: Option<f64>) -> String {
    t.map(|t| format!("{t:.6}")).unwrap_or_else(|| FAILED.into())
}

struct Run {
    name: String,
    tol: f64,
    result: SolveResult,
}

fn execute(graph: &WeightedGraph, term: &dyn DataTerm, name: impl Into<String>, config: &SolveConfig) -> CliResult<Run> {
    let name = name.into();
    let result = solve(graph, term, config)?;
    eprintln!(
        "{name}: {} iterations, final gap {:.3e}",
        result.iterations,
        result.trace.last().map_or(f64::NAN, |r| r.gap)
    );
    Ok(Run {
        name,
        tol: config.tol,
        result,
    })
}

fn write(out: &Path, file: &str, text: &str) -> CliResult<()> {
    fs::write(out.join(file), text)?;
    Ok(())
}

/// Trace CSVs, `summary.csv` and the resolved config. Fails with
/// `NotConverged` when any run missed its tolerance.
fn finish_runs(cfg: &Config, out: &Path, runs: &[Run]) -> CliResult<()> {
    let mut summary = String::from("run,iterations_to_tol,time_to_tol_s,final_gap,converged\n");
    let mut missed = Vec::new();
    for run in runs {
        write(out, &format!("{}.csv", run.name), &run.result.trace.to_csv(true))?;
        let tr = &run.result.trace;
        let _ = writeln!(
            summary,
            "{},{},{},{:e},{}",
            run.name,
            show_iters(tr.iterations_to_tol(run.tol)),
            show_time(tr.time_to_tol(run.tol)),
            tr.last().map_or(f64::NAN, |r| r.gap),
            run.result.converged
        );
        if !run.result.converged {
            missed.push(run.name.clone());
        }
    }
    write(out, "summary.csv", &summary)?;
    write(out, "config.txt", &cfg.resolved_text())?;
    print!("{summary}");
    if missed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "{} did not reach the tolerance",
            missed.join(", ")
        )))
    }
}

pub fn cmd_run(cfg: &Config, out: &Path) -> CliResult<()> {
    let preset = cfg.str_or("preset", "custom");
    let seed: u64 = cfg.get_or("seed", 0)?;
    let runs = match preset.as_str() {
        "fig1-grid" => run_small_grid(cfg, seed)?,
        "fig2-random" => run_random_sweep(cfg, out)?,
        "fig3-grid" => run_large_grid(cfg, seed)?,
        "table1-benchmark" => {
            let source = cfg.required("graph")?;
            let (graph, data) = load_graph(cfg, &source, seed)?;
            let term = RofDataTerm::new(load_data(cfg, &graph, data, seed)?)?;
            let base = base_config(cfg, &TABLE_DEFAULTS)?;
            let period = parse_period(&cfg.str_or("recondition", "30"))?;
            table_methods(&base, period)
                .into_iter()
                .map(|(name, c)| execute(&graph, &term, name, &c))
                .collect::<CliResult<Vec<_>>>()?
        }
        "fig4-deconv" => run_deconv(cfg, out, seed)?,
        "custom" => {
            let source = cfg.required("graph")?;
            let (graph, data) = load_graph(cfg, &source, seed)?;
            let term = RofDataTerm::new(load_data(cfg, &graph, data, seed)?)?;
            let base = base_config(
                cfg,
                &SolverDefaults {
                    algorithm: "pg",
                    step: "auto",
                    max_iter: 20000,
                },
            )?;
            let strategy_name = cfg.str_or("strategy", "inactively-nested");
            let period = parse_period(&cfg.str_or("recondition", "1"))?;
            let config = with_strategy(&base, parse_strategy(&strategy_name)?, period);
            vec![execute(&graph, &term, strategy_name, &config)?]
        }
        other => return Err(bad(format!("unknown preset '{other}'"))),
    };
    finish_runs(cfg, out, &runs)
}

fn calibrated_rof(cfg: &Config, base: WeightedGraph, seed: u64, band: &str) -> CliResult<(WeightedGraph, RofDataTerm)> {
    let term = RofDataTerm::new(uniform_data(base.vertex_count(), seed))?;
    let band = parse_band(cfg, band)?;
    let cal = calibrate_lambda(&base, &term, band)?;
    eprintln!("weight scale {:.6e}, active fraction {:.3}", cal.lambda, cal.active_fraction);
    Ok((base.scaled(cal.lambda)?, term))
}

fn run_small_grid(cfg: &Config, seed: u64) -> CliResult<Vec<Run>> {
    let (graph, term) = calibrated_rof(cfg, generate_grid(4, 3, 1.0)?, seed, "0.2,0.5")?;
    let base = base_config(
        cfg,
        &SolverDefaults {
            algorithm: "pg",
            step: "local-optimal",
            max_iter: 20000,
        },
    )?;
    let identity = SolveConfig {
        step: StepRule::Auto,
        ..with_strategy(&base, PrecondStrategy::Identity, None)
    };
    let inact = with_strategy(&base, PrecondStrategy::InactivelyNested, Some(1));
    Ok(vec![
        execute(&graph, &term, "identity", &identity)?,
        execute(&graph, &term, "inactively-nested", &inact)?,
    ])
}

const PG_AUTO: SolverDefaults = SolverDefaults {
    algorithm: "pg",
    step: "auto",
    max_iter: 20000,
};

fn run_large_grid(cfg: &Config, seed: u64) -> CliResult<Vec<Run>> {
    let side: usize = cfg.get_or("side", 50)?;
    let (graph, term) = calibrated_rof(cfg, generate_grid(side, side, 1.0)?, seed, "0.25,0.35")?;
    let base = base_config(cfg, &PG_AUTO)?;
    let periods: Vec<usize> = cfg.list_or("periods", "20,10,5,1")?;
    let mut configs = vec![
        ("identity".to_string(), with_strategy(&base, PrecondStrategy::Identity, None)),
        ("nested-forest".to_string(), with_strategy(&base, PrecondStrategy::NestedForest, None)),
        ("chains".to_string(), with_strategy(&base, PrecondStrategy::Chains, None)),
    ];
    for n in periods {
        if n == 0 {
            return Err(bad("periods must be positive"));
        }
        configs.push((format!("inact-n{n}"), with_strategy(&base, PrecondStrategy::InactivelyNested, Some(n))));
    }
    configs.into_iter().map(|(name, c)| execute(&graph, &term, name, &c)).collect()
}

fn run_random_sweep(cfg: &Config, out: &Path) -> CliResult<Vec<Run>> {
    let vertices: usize = cfg.get_or("vertices", 512)?;
    let ratios: Vec<f64> = cfg.list_or("ratio", "5")?;
    let targets: Vec<f64> = cfg.list_or("targets", "0.1,0.3,0.5,0.7,0.9")?;
    let seeds: Vec<u64> = cfg.list_or("seeds", "0")?;
    let base = base_config(cfg, &PG_AUTO)?;
    let methods = [
        ("identity", PrecondStrategy::Identity, None),
        ("nested-forest", PrecondStrategy::NestedForest, None),
        ("inact-n1", PrecondStrategy::InactivelyNested, Some(1)),
    ];
    let mut table = String::from("ratio,target,seed,active_frac,method,iterations_to_tol\n");
    let mut runs = Vec::new();
    for &ratio in &ratios {
        for &target in &targets {
            if !(0.0..=1.0).contains(&target) {
                return Err(bad(format!("target active fraction {target} outside [0, 1]")));
            }
            for &seed in &seeds {
                let inst = graphtv::experiments::fig2_instance(vertices, ratio, target, seed)?;
                for (method, strategy, period) in methods {
                    let name = format!("r{ratio}-a{target}-s{seed}-{method}");
                    let run = execute(&inst.graph, &inst.term, name, &with_strategy(&base, strategy, period))?;
                    let _ = writeln!(
                        table,
                        "{ratio},{target},{seed},{},{method},{}",
                        inst.active_fraction,
                        show_iters(run.result.trace.iterations_to_tol(run.tol))
                    );
                    runs.push(run);
                }
            }
        }
    }
    write(out, "sweep.csv", &table)?;
    Ok(runs)
}

const TABLE_DEFAULTS: SolverDefaults = SolverDefaults {
    algorithm: "fista",
    step: "auto",
    max_iter: 20000,
};

fn table_methods(base: &SolveConfig, period: Option<usize>) -> Vec<(String, SolveConfig)> {
    vec![
        ("none".into(), with_strategy(base, PrecondStrategy::Identity, None)),
        ("diagonal".into(), with_strategy(base, PrecondStrategy::Diagonal(DiagonalKind::KKt), None)),
        ("nested-forest".into(), with_strategy(base, PrecondStrategy::NestedForest, None)),
        ("inact-nf".into(), with_strategy(base, PrecondStrategy::InactivelyNested, period)),
    ]
}

fn run_deconv(cfg: &Config, out: &Path, seed: u64) -> CliResult<Vec<Run>> {
    let side: usize = cfg.get_or("side", 32)?;
    let radius: usize = cfg.get_or("radius", 3)?;
    let sigma: f64 = cfg.get_or("sigma", 0.05)?;
    let kernel = Kernel::by_name(&cfg.str_or("kernel", "motion"), radius)?;
    let lambda: f64 = cfg.get_or("lambda", 0.01)?;
    let graph = generate_grid(side, side, lambda)?;
    let (term, phantom) = synth_deconv_instance(side, side, kernel, seed, sigma)?;
    let base = base_config(
        cfg,
        &SolverDefaults {
            algorithm: "pdhg",
            step: "auto",
            max_iter: 50000,
        },
    )?;
    let period = parse_period(&cfg.str_or("recondition", "5"))?;
    let configs = [
        ("identity", PrecondStrategy::Identity, None),
        ("diagonal", PrecondStrategy::Diagonal(DiagonalKind::RowSum), None),
        ("nested-forest", PrecondStrategy::NestedForest, None),
        ("chains", PrecondStrategy::Chains, None),
        ("inact-nf", PrecondStrategy::InactivelyNested, period),
    ];
    let runs = configs
        .into_iter()
        .map(|(name, s, n)| execute(&graph, &term, name, &with_strategy(&base, s, n)))
        .collect::<CliResult<Vec<_>>>()?;
    let (ow, oh) = term.operator().output_dims();
    write(out, "phantom.pgm", &write_pgm(side, side, &phantom)?)?;
    write(out, "observation.pgm", &write_pgm(ow, oh, term.observation())?)?;
    let last = runs.last().expect("five runs");
    write(out, "reconstruction.pgm", &write_pgm(side, side, &last.result.u)?)?;
    Ok(runs)
}

fn profile_text(profile: &NestingProfile) -> String {
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_else(|| "none".into());
    let dims: Vec<String> = profile.span_dims.iter().map(|d| d.to_string()).collect();
    format!(
        "forests = {}\nlhat = {}\nnested = {}\nspan_dims = {}\neffective_forests = {}\neffective_lhat = {}\n",
        profile.forest_count,
        opt(profile.lhat),
        profile.nested,
        dims.join(","),
        profile.effective_count,
        opt(profile.effective_lhat)
    )
}

pub fn cmd_partition(cfg: &Config, out: &Path) -> CliResult<()> {
    let seed: u64 = cfg.get_or("seed", 0)?;
    let (graph, _) = load_graph(cfg, &cfg.required("graph")?, seed)?;
    let p = load_dual(cfg, &graph)?;
    let d = if cfg.get_or("chains", false)? {
        grid_chain_decomposition(&graph)?
    } else {
        greedy_inactively_nested(&graph, &p)?
    };
    let eps: f64 = cfg.get_or("eps_active", graphtv::analysis::DEFAULT_EPS_ACTIVE)?;
    let inactive = active_set(&p, eps).inactive_mask();
    let profile = nesting_profile_combinatorial(&d, &graph, &inactive)?;
    write(out, "decomposition.txt", &d.to_text())?;
    let report = profile_text(&profile);
    write(out, "nesting.txt", &report)?;
    write(out, "config.txt", &cfg.resolved_text())?;
    print!("{report}");
    Ok(())
}

pub fn cmd_analyze(cfg: &Config, out: &Path) -> CliResult<()> {
    let report = match cfg.str_or("preset", "custom").as_str() {
        "fig1-grid" => analyze_small_grid(cfg, out)?,
        "custom" => analyze_decomposition(cfg)?,
        other => return Err(bad(format!("analyze supports presets fig1-grid and custom, got '{other}'"))),
    };
    write(out, "analysis.txt", &report)?;
    write(out, "config.txt", &cfg.resolved_text())?;
    print!("{report}");
    Ok(())
}

fn analyze_small_grid(cfg: &Config, out: &Path) -> CliResult<String> {
    let seed: u64 = cfg.get_or("seed", 0)?;
    let (graph, term) = calibrated_rof(cfg, generate_grid(4, 3, 1.0)?, seed, "0.2,0.5")?;
    let base = base_config(
        cfg,
        &SolverDefaults {
            algorithm: "pg",
            step: "local-optimal",
            max_iter: 400,
        },
    )?;
    let config = with_strategy(&base, PrecondStrategy::InactivelyNested, parse_period(&cfg.str_or("recondition", "1"))?);
    let iterations: usize = cfg.get_or("iterations", 400)?;
    let eps: f64 = cfg.get_or("eps", 1e-8)?;
    let a = local_analysis(&graph, &term, &config, iterations, eps)?;

    let mut env = String::from("k,dist_t,envelope\n");
    for (j, d) in a.dists_t.iter().enumerate() {
        let bound = a.dists_t[0] * a.step_contraction.powi(j as i32);
        let _ = writeln!(env, "{},{d:e},{bound:e}", a.kbar + j);
    }
    write(out, "envelope.csv", &env)?;

    let slope = a.empirical_slope.map(|s| format!("{s:.6}")).unwrap_or_else(|| "none".into());
    let measured = a.measured.map(|m| m.to_string()).unwrap_or_else(|| FAILED.into());
    Ok(format!(
        "kbar = {}\nforests = {}\nlhat = {}\nphi = {:.6}\ncontraction = {:.6}\nstep_contraction = {:.6}\n\
         theoretical_slope = {:.6}\nempirical_slope = {slope}\nenvelope_holds = {}\n\
         complementarity_margin = {:e}\neps = {:e}\nmeasured = {measured}\nbound = {}\nbound_holds = {}\n",
        a.kbar,
        a.forests,
        a.lhat,
        a.phi,
        a.contraction,
        a.step_contraction,
        a.theoretical_slope,
        a.envelope_holds(),
        a.complementarity_margin,
        a.eps,
        a.bound,
        a.bound_holds()
    ))
}

fn analyze_decomposition(cfg: &Config) -> CliResult<String> {
    let seed: u64 = cfg.get_or("seed", 0)?;
    let (graph, _) = load_graph(cfg, &cfg.required("graph")?, seed)?;
    let p = load_dual(cfg, &graph)?;
    let d = match cfg.str_or("decomposition", "peel").as_str() {
        "peel" => greedy_inactively_nested(&graph, &p)?,
        path => {
            let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read decomposition {path}: {e}")))?;
            ForestDecomposition::from_text(&graph, &text)?
        }
    };
    let eps: f64 = cfg.get_or("eps_active", graphtv::analysis::DEFAULT_EPS_ACTIVE)?;
    let kappa: f64 = cfg.get_or("kappa_gstar", 1.0)?;
    let inactive = active_set(&p, eps).inactive_mask();
    let profile = nesting_profile_combinatorial(&d, &graph, &inactive)?;
    let mut report = profile_text(&profile);
    match profile.rate_pair() {
        Some((l, lhat)) => {
            let rate = local_rate(l, lhat, kappa)?;
            let _ = write!(report, "phi = {:.6}\ncontraction = {:.6}\n", rate.phi, rate.contraction);
        }
        None => report.push_str("phi = none\ncontraction = none\n"),
    }
    if graph.edge_count() <= DENSE_EDGE_LIMIT {
        if let Some((max, min)) = inactive_projector(&graph, &d, &inactive)?.extremes() {
            let _ = write!(report, "projector_lambda_max = {max:.9}\nprojector_lambda_min = {min:.9}\n");
        }
    }
    Ok(report)
}

fn benchmark_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| bad(format!("cannot read benchmark directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(bad(format!("no benchmark files in {}", dir.display())));
    }
    Ok(files)
}

pub fn cmd_bench(cfg: &Config, out: &Path) -> CliResult<()> {
    let dir = PathBuf::from(cfg.required("benchmarks")?);
    let seed: u64 = cfg.get_or("seed", 0)?;
    let lambda: f64 = cfg.get_or("lambda", 1.0)?;
    let base = base_config(cfg, &TABLE_DEFAULTS)?;
    let period = parse_period(&cfg.str_or("recondition", "30"))?;
    let methods = table_methods(&base, period);
    let traces = out.join("traces");
    fs::create_dir_all(&traces)?;

    let mut csv = String::from("name,active_frac");
    for (m, _) in &methods {
        let _ = write!(csv, ",{m}_iters,{m}_time_s");
    }
    csv.push('\n');
    let mut table = format!("{:<20} {:>8}", "name", "|A|/|E|");
    for (m, _) in &methods {
        let _ = write!(table, " {:>14} {:>10}", format!("{m} it"), "time[s]");
    }
    table.push('\n');

    for file in benchmark_files(&dir)? {
        let name = file.file_stem().and_then(|s| s.to_str()).unwrap_or("instance").to_string();
        let (graph, data) = load_benchmark(&file)?;
        let graph = graph.scaled(lambda)?;
        let f = data.unwrap_or_else(|| uniform_data(graph.vertex_count(), seed));
        let term = RofDataTerm::new(f)?;
        let results = methods
            .iter()
            .map(|(m, c)| {
                let r = solve(&graph, &term, c)?;
                fs::write(traces.join(format!("{name}-{m}.csv")), r.trace.to_csv(true))?;
                Ok(r)
            })
            .collect::<CliResult<Vec<_>>>()?;
        // active fraction at the most accurate of the final iterates
        let best = results
            .iter()
            .min_by(|a, b| {
                let g = |r: &SolveResult| r.trace.last().map_or(f64::INFINITY, |t| t.gap);
                g(a).total_cmp(&g(b))
            })
            .expect("at least one method");
        let af = active_set(&best.p, base.eps_active).active_fraction();
        let _ = write!(csv, "{name},{af:.4}");
        let _ = write!(table, "{name:<20} {af:>8.3}");
        for r in &results {
            let it = show_iters(r.trace.iterations_to_tol(base.tol));
            let t = show_time(r.trace.time_to_tol(base.tol));
            let _ = write!(csv, ",{it},{t}");
            let _ = write!(table, " {it:>14} {t:>10}");
        }
        csv.push('\n');
        table.push('\n');
    }
    write(out, "bench.csv", &csv)?;
    write(out, "config.txt", &cfg.resolved_text())?;
    print!("{table}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsers() {
        assert_eq!(parse_period("inf").unwrap(), None);
        assert_eq!(parse_period("30").unwrap(), Some(30));
        assert!(parse_period("0").is_err());
        assert_eq!(parse_step("auto").unwrap(), StepRule::Auto);
        assert_eq!(parse_step("2.5").unwrap(), StepRule::Fixed(2.5));
        assert!(parse_step("-1").is_err());
        assert_eq!(parse_strategy("none").unwrap(), PrecondStrategy::Identity);
        assert!(parse_strategy("linear-forest").is_err());
        assert_eq!(parse_algorithm("fista").unwrap(), Algorithm::Fista);
    }

    #[test]
    fn graph_sources() {
        let cfg = Config::parse("lambda = 2").unwrap();
        let (g, data) = load_graph(&cfg, "grid:4x3", 0).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (12, 17));
        assert!(data.is_none() && g.weights().iter().all(|&w| w == 2.0));
        let (g, _) = load_graph(&cfg, "random:10:20", 3).unwrap();
        assert_eq!(g.edge_count(), 20);
        assert!(load_graph(&cfg, "grid:4by3", 0).is_err());
        assert!(load_graph(&cfg, "/nonexistent/file", 0).is_err());
    }

    #[test]
    fn missing_marker() {
        assert_eq!(show_iters(None), "--");
        assert_eq!(show_time(Some(1.23456)), "1.234560");
    }
}
