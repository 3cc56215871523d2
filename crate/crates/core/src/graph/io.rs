//! Benchmark ingestion.
//!
//! Two text formats are accepted:
//!
//! * DIMACS max-flow (`p max n m`, `n i s|t`, `a u v cap`). Arcs leaving the
//!   source add their capacity to the unary datum of the head, arcs entering
//!   the sink subtract theirs from the tail: `f_i = cap(s, i) - cap(i, t)`.
//!   Arcs between two non-terminal nodes are merged into one undirected edge
//!   whose weight is the sum of the capacities in both directions.
//!   Non-terminal nodes are renumbered in increasing DIMACS order.
//! * Plain edge list: a `V E` header, `E` lines `tail head weight` with
//!   1-based indices, optionally followed by `V` lines holding `f_i`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::WeightedGraph;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchmarkFormat {
    Dimacs,
    EdgeList,
}

/// Reads a benchmark file; returns the graph and the unary data if present.
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<(WeightedGraph, Option<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    parse_benchmark(&text).map(|(g, f, _)| (g, f))
}

/// Parses benchmark text, detecting the format from the first content line.
pub fn parse_benchmark(text: &str) -> Result<(WeightedGraph, Option<Vec<f64>>, BenchmarkFormat)> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('c') && !l.starts_with('#'));
    match first {
        Some(l) if l.starts_with('p') => {
            parse_dimacs(text).map(|(g, f)| (g, Some(f), BenchmarkFormat::Dimacs))
        }
        Some(_) => parse_edge_list(text).map(|(g, f)| (g, f, BenchmarkFormat::EdgeList)),
        None => Err(Error::Parse {
            line: 0,
            message: "empty input".into(),
        }),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what}")))
}

fn parse_dimacs(text: &str) -> Result<(WeightedGraph, Vec<f64>)> {
    let mut node_count: Option<usize> = None;
    let mut source = None;
    let mut sink = None;
    let mut arcs = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            None | Some("c") => {}
            Some("p") => {
                if node_count.is_some() {
                    return Err(parse_err(line, "duplicate problem line"));
                }
                if toks.next() != Some("max") {
                    return Err(parse_err(line, "expected 'p max n m'"));
                }
                let n: usize = field(toks.next(), line, "node count")?;
                let _m: usize = field(toks.next(), line, "arc count")?;
                node_count = Some(n);
            }
            Some("n") => {
                let id: usize = field(toks.next(), line, "node id")?;
                match toks.next() {
                    Some("s") => source = Some(id),
                    Some("t") => sink = Some(id),
                    _ => return Err(parse_err(line, "terminal must be 's' or 't'")),
                }
            }
            Some("a") => {
                let u: usize = field(toks.next(), line, "arc tail")?;
                let v: usize = field(toks.next(), line, "arc head")?;
                let cap: f64 = field(toks.next(), line, "capacity")?;
                if !cap.is_finite() || cap < 0.0 {
                    return Err(parse_err(line, format!("invalid capacity {cap}")));
                }
                arcs.push((line, u, v, cap));
            }
            Some(other) => return Err(parse_err(line, format!("unknown line type '{other}'"))),
        }
    }
    let n = node_count.ok_or_else(|| parse_err(0, "missing 'p max' header"))?;
    let (s, t) = match (source, sink) {
        (Some(s), Some(t)) if s != t => (s, t),
        _ => return Err(parse_err(0, "source and sink must both be declared and distinct")),
    };
    if arcs.is_empty() {
        return Err(parse_err(0, "no arcs"));
    }
    for &id in &[s, t] {
        if id == 0 || id > n {
            return Err(parse_err(0, format!("terminal {id} outside 1..={n}")));
        }
    }
    // DIMACS id -> vertex index, skipping the two terminals.
    let index = |id: usize| -> usize {
        let mut k = id - 1;
        if id > s {
            k -= 1;
        }
        if id > t {
            k -= 1;
        }
        k
    };
    let vertex_count = n - 2;
    let mut f = vec![0.0; vertex_count];
    let mut pair_weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(line, u, v, cap) in &arcs {
        if u == 0 || u > n || v == 0 || v > n {
            return Err(parse_err(line, format!("arc ({u}, {v}) references a node outside 1..={n}")));
        }
        match (u == s || u == t, v == s || v == t) {
            (true, true) => {}
            (true, false) => {
                if u == s {
                    f[index(v)] += cap;
                }
            }
            (false, true) => {
                if v == t {
                    f[index(u)] -= cap;
                }
            }
            (false, false) => {
                if u == v {
                    return Err(parse_err(line, "self-loop arc"));
                }
                let (a, b) = (index(u).min(index(v)), index(u).max(index(v)));
                *pair_weights.entry((a, b)).or_insert(0.0) += cap;
            }
        }
    }
    if vertex_count == 0 {
        return Err(parse_err(0, "no non-terminal nodes"));
    }
    if let Some((&(a, b), &w)) = pair_weights.iter().find(|(_, &w)| w <= 0.0) {
        return Err(Error::InvalidGraph(format!(
            "merged weight {w} between vertices {a} and {b} is not positive"
        )));
    }
    let graph = WeightedGraph::new(
        vertex_count,
        pair_weights.into_iter().map(|((a, b), w)| (a, b, w)),
    )?;
    Ok((graph, f))
}

fn parse_edge_list(text: &str) -> Result<(WeightedGraph, Option<Vec<f64>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty input"))?;
    let mut toks = header.split_whitespace();
    let v: usize = field(toks.next(), hl, "vertex count")?;
    let e: usize = field(toks.next(), hl, "edge count")?;
    let mut edges = Vec::with_capacity(e);
    for _ in 0..e {
        let (line, l) = lines
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {e} edge lines")))?;
        let mut toks = l.split_whitespace();
        let a: usize = field(toks.next(), line, "tail")?;
        let b: usize = field(toks.next(), line, "head")?;
        let w: f64 = field(toks.next(), line, "weight")?;
        if a == 0 || b == 0 || a > v || b > v {
            return Err(parse_err(line, format!("edge ({a}, {b}) outside 1..={v}")));
        }
        edges.push((a - 1, b - 1, w));
    }
    let rest: Vec<_> = lines.collect();
    let data = if rest.is_empty() {
        None
    } else {
        if rest.len() != v {
            return Err(parse_err(rest[0].0, format!("expected {v} data lines, found {}", rest.len())));
        }
        Some(
            rest.iter()
                .map(|&(line, l)| field(l.split_whitespace().next(), line, "datum"))
                .collect::<Result<Vec<f64>>>()?,
        )
    };
    Ok((WeightedGraph::new(v, edges)?, data))
}

/// Serialises a graph (and optional data) in the plain edge-list format.
pub fn write_edge_list(graph: &WeightedGraph, data: Option<&[f64]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", graph.vertex_count(), graph.edge_count());
    for (&(i, j), w) in graph.edges().iter().zip(graph.weights()) {
        let _ = writeln!(out, "{} {} {w:e}", i + 1, j + 1);
    }
    if let Some(f) = data {
        for v in f {
            let _ = writeln!(out, "{v:e}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimacs_toy_mapping() {
        let text = "c toy\np max 4 4\nn 3 s\nn 4 t\na 3 1 3\na 1 4 1\na 1 2 2\na 2 1 0\n";
        let (g, f, fmt) = parse_benchmark(text).unwrap();
        assert_eq!(fmt, BenchmarkFormat::Dimacs);
        assert_eq!(f.unwrap(), vec![2.0, 0.0]);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.weights(), &[2.0]);
    }

    #[test]
    fn dimacs_terminals_in_the_middle_are_skipped() {
        let text = "p max 5 3\nn 1 s\nn 3 t\na 1 2 5\na 4 3 2\na 2 4 1.5\na 5 4 1\n";
        let (g, f, _) = parse_benchmark(text).unwrap();
        // nodes 2, 4, 5 -> vertices 0, 1, 2
        assert_eq!(f.unwrap(), vec![5.0, -2.0, 0.0]);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.weights(), &[1.5, 1.0]);
    }

    #[test]
    fn dimacs_errors() {
        assert!(parse_benchmark("p max 4 0\nn 3 s\nn 4 t\n").is_err());
        assert!(parse_benchmark("p max 4 1\nn 3 s\nn 4 t\na 1 9 1\n").is_err());
        assert!(parse_benchmark("p min 4 1\n").is_err());
        assert!(parse_benchmark("p max 4 1\nn 3 s\na 1 2 1\n").is_err());
        let zero = "p max 4 2\nn 3 s\nn 4 t\na 1 2 0\na 2 1 0\n";
        assert!(matches!(parse_benchmark(zero), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = WeightedGraph::new(3, [(0, 1, 0.5), (1, 2, 2.0)]).unwrap();
        let text = write_edge_list(&g, Some(&[1.0, -2.0, 3.5]));
        let (h, f, fmt) = parse_benchmark(&text).unwrap();
        assert_eq!(fmt, BenchmarkFormat::EdgeList);
        assert_eq!(g, h);
        assert_eq!(f.unwrap(), vec![1.0, -2.0, 3.5]);
        let (_, none, _) = parse_benchmark(&write_edge_list(&g, None)).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn edge_list_errors() {
        assert!(parse_benchmark("2 1\n1 3 1.0\n").is_err());
        assert!(parse_benchmark("2 2\n1 2 1.0\n").is_err());
        assert!(parse_benchmark("2 1\n1 2 1.0\n0.5\n").is_err());
        assert!(parse_benchmark("2 1\n1 2 -1.0\n").is_err());
    }
}
