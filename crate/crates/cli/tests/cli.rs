use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn graphtv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphtv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn field<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
}

fn benchmarks() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/benchmarks").to_string()
}

#[test]
fn small_grid_preset_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphtv(&["run", "--set", "preset=fig1-grid"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read(dir.path(), "summary.csv");
    assert!(summary.starts_with("run,iterations_to_tol,time_to_tol_s,final_gap,converged\n"));
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",true")));
    for f in ["identity.csv", "inactively-nested.csv"] {
        let trace = read(dir.path(), f);
        assert!(trace.lines().count() > 2);
    }
    assert!(read(dir.path(), "config.txt").contains("preset = fig1-grid"));
}

#[test]
fn runs_are_deterministic_apart_from_timing() {
    let strip_time = |csv: String| -> Vec<String> {
        let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
        let skip = header.iter().position(|h| h.starts_with("time"));
        csv.lines()
            .map(|l| {
                l.split(',')
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != skip)
                    .map(|(_, c)| c)
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    };
    let args = ["run", "--set", "graph=random:30:60", "--set", "seed=4", "--set", "lambda=0.1"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(graphtv(&args, a.path()).status.success());
    assert!(graphtv(&args, b.path()).status.success());
    let ta = strip_time(read(a.path(), "inactively-nested.csv"));
    let tb = strip_time(read(b.path(), "inactively-nested.csv"));
    assert!(ta.len() > 2);
    assert_eq!(ta, tb);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small custom run\ngraph = grid:5x4\nstrategy = nested-forest\nlambda = 0.2\n").unwrap();
    let out = dir.path().join("out");
    let o = graphtv(&["run", "--config", cfg.to_str().unwrap(), "--set", "algorithm=fista"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = read(&out, "config.txt");
    assert!(resolved.contains("algorithm = fista"));
    assert!(resolved.contains("strategy = nested-forest"));
    assert!(out.join("nested-forest.csv").exists());
}

#[test]
fn missed_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphtv(&["run", "--set", "graph=grid:5x5", "--set", "max_iter=1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let summary = read(dir.path(), "summary.csv");
    assert!(summary.lines().nth(1).unwrap().contains(",--,--,"));
    assert!(summary.trim_end().ends_with(",false"));
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["run", "--set", "colour=red"],
        &["run", "--set", "preset=nonsense"],
        &["run", "--set", "graph=grid:5x5", "--set", "strategy=linear-forest"],
        &["run", "--set", "graph=/no/such/file"],
        &["run", "--set", "graph=grid:3x3", "--set", "tol=abc"],
        &["partition"],
        &["bench", "--set", "benchmarks=/no/such/dir"],
    ];
    for args in cases {
        let o = graphtv(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn partition_reports_nesting() {
    let dir = tempfile::tempdir().unwrap();
    // 2x2 grid is a 4-cycle
    let o = graphtv(&["partition", "--set", "graph=grid:2x2"], dir.path());
    assert!(o.status.success());
    let report = read(dir.path(), "nesting.txt");
    assert_eq!(field(&report, "forests"), "2");
    assert_eq!(field(&report, "lhat"), "1");
    assert_eq!(field(&report, "nested"), "true");
    assert!(!read(dir.path(), "decomposition.txt").is_empty());

    let o = graphtv(&["partition", "--set", "graph=grid:6x1"], dir.path());
    assert!(o.status.success());
    assert_eq!(field(&read(dir.path(), "nesting.txt"), "forests"), "1");

    let o = graphtv(&["partition", "--set", "graph=grid:4x3", "--set", "chains=true"], dir.path());
    assert!(o.status.success());
    assert_eq!(field(&read(dir.path(), "nesting.txt"), "forests"), "2");
}

#[test]
fn analyze_cycle_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphtv(&["analyze", "--set", "graph=grid:2x2"], dir.path());
    assert!(o.status.success());
    let report = read(dir.path(), "analysis.txt");
    let phi: f64 = field(&report, "phi").parse().unwrap();
    let contraction: f64 = field(&report, "contraction").parse().unwrap();
    assert!((phi - 2.0).abs() < 1e-6);
    assert!((contraction - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn analyze_small_grid_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphtv(&["analyze", "--set", "preset=fig1-grid"], dir.path());
    assert!(o.status.success());
    let report = read(dir.path(), "analysis.txt");
    assert_eq!(field(&report, "envelope_holds"), "true");
    assert_eq!(field(&report, "bound_holds"), "true");
    let env = read(dir.path(), "envelope.csv");
    assert!(env.starts_with("k,dist_t,envelope\n"));
    for line in env.lines().skip(1) {
        let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        // same roundoff floor as the library check, 1e-12 (1 + |p*|)
        assert!(v[0] <= v[1] * (1.0 + 1e-6) + 1e-11, "{line}");
    }
}

#[test]
fn bench_marks_unreached_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let b = benchmarks();
    let o = graphtv(&["bench", "--set", &format!("benchmarks={b}")], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "bench.csv");
    assert_eq!(csv.lines().count(), 3);
    assert!(!csv.contains("--"));
    assert!(dir.path().join("traces/square-inact-nf.csv").exists());

    let o = graphtv(&["bench", "--set", &format!("benchmarks={b}"), "--set", "max_iter=1"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("--"));
    assert!(read(dir.path(), "bench.csv").contains(",--,--"));
}

#[test]
fn deconvolution_preset_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let o = graphtv(&["run", "--set", "preset=fig4-deconv", "--set", "side=12", "--set", "tol=1e-6"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["phantom.pgm", "observation.pgm", "reconstruction.pgm"] {
        assert!(read(dir.path(), f).starts_with("P2"), "{f}");
    }
    assert_eq!(read(dir.path(), "summary.csv").lines().count(), 6);
}
