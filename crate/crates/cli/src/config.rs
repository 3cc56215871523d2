//! Flat `key = value` configuration with command-line overrides.
//!
//! Lines starting with `#` are comments. Every value read through a typed
//! getter, defaults included, is recorded so the resolved configuration can
//! be written next to the results.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

const KNOWN_KEYS: &[&str] = &[
    "preset",
    "seed",
    "algorithm",
    "strategy",
    "recondition",
    "step",
    "primal_step",
    "balance",
    "tol",
    "max_iter",
    "eps_active",
    "graph",
    "data",
    "lambda",
    "band",
    "side",
    "vertices",
    "ratio",
    "targets",
    "seeds",
    "periods",
    "kernel",
    "radius",
    "sigma",
    "p",
    "decomposition",
    "chains",
    "kappa_gstar",
    "iterations",
    "eps",
    "benchmarks",
];

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut config = Self::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::BadInput(format!("config line {}: expected key = value", ln + 1)))?;
            config.insert(k.trim(), v.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::BadInput(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::BadInput(format!("override '{assignment}' is not key=value")))?;
        self.insert(k.trim(), v.trim())
    }

    fn insert(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::BadInput(format!("unknown config key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn record(&self, key: &str, value: &str) {
        self.resolved.borrow_mut().insert(key.to_string(), value.to_string());
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        let v = self.values.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    pub fn required(&self, key: &str) -> CliResult<String> {
        let v = self
            .values
            .get(key)
            .cloned()
            .ok_or_else(|| CliError::BadInput(format!("missing required key '{key}'")))?;
        self.record(key, &v);
        Ok(v)
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T: ToString,
    {
        match self.values.get(key) {
            Some(v) => {
                let parsed = parse_value(key, v)?;
                self.record(key, v);
                Ok(parsed)
            }
            None => {
                self.record(key, &default.to_string());
                Ok(default)
            }
        }
    }

    /// Comma-separated list.
    pub fn list_or<T: FromStr>(&self, key: &str, default: &str) -> CliResult<Vec<T>> {
        let raw = self.str_or(key, default);
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_value(key, s))
            .collect()
    }

    /// Every value that was read, with defaults filled in.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.resolved.borrow().iter() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> CliResult<T> {
    raw.parse()
        .map_err(|_| CliError::BadInput(format!("cannot parse '{raw}' for key '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = Config::parse("# comment\npreset = fig1-grid\n\ntol=1e-8\n").unwrap();
        c.set("tol=1e-6").unwrap();
        assert_eq!(c.str_or("preset", "custom"), "fig1-grid");
        assert_eq!(c.get_or("tol", 1e-10).unwrap(), 1e-6);
        assert_eq!(c.get_or("max_iter", 7usize).unwrap(), 7);
        assert_eq!(c.resolved_text(), "max_iter = 7\npreset = fig1-grid\ntol = 1e-6\n");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("no equals sign").is_err());
        assert!(Config::parse("colour = red").is_err());
        let c = Config::parse("tol = abc").unwrap();
        assert!(c.get_or("tol", 1.0).is_err());
        assert!(c.required("graph").is_err());
        let mut c = Config::default();
        assert!(c.set("tol").is_err());
    }

    #[test]
    fn lists() {
        let c = Config::parse("periods = 20, 10,5").unwrap();
        assert_eq!(c.list_or::<usize>("periods", "1").unwrap(), vec![20, 10, 5]);
        assert_eq!(c.list_or::<f64>("targets", "0.3,0.5").unwrap(), vec![0.3, 0.5]);
    }
}
