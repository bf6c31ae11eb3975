//! Flat `key: value` run configuration, one key per line.
//!
//! ```text
//! # elliptic benchmark at full scale
//! problem: elliptic
//! M: 100
//! N: 100000
//! eps1: 1e-6
//! ```
//!
//! `=` works as a separator too. Blank lines and `#` comments are ignored.

use std::collections::HashSet;
use std::path::Path;

use stochsep::benchmarks::{create, Benchmark, Settings};
use stochsep::mcoracle::DEFAULT_ORACLE_SAMPLES;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "problem",
    "M",
    "N",
    "seed",
    "eps1",
    "eps2",
    "max_outer",
    "max_inner",
    "mesh_nodes",
    "nx",
    "nt",
    "probe",
    "initial_amplitude",
    "oracle",
    "oracle_samples",
];

pub struct RunConfig {
    pub benchmark: Box<dyn Benchmark>,
    pub settings: Settings,
    pub oracle: bool,
    pub oracle_samples: usize,
}

impl std::fmt::Debug for RunConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunConfig")
            .field("problem", &self.benchmark.name())
            .field("settings", &self.settings)
            .field("oracle", &self.oracle)
            .field("oracle_samples", &self.oracle_samples)
            .finish()
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: cannot read: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}:{msg}", path.display())),
        other => other,
    })
}

/// Parses a configuration. Error messages start with the offending line
/// number followed by `": "`.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some(pos) = line.find([':', '=']) else {
            return Err(at(line_no, format!("expected 'key: value', got '{line}'")));
        };
        let (key, value) = (line[..pos].trim(), line[pos + 1..].trim());
        if !KEYS.contains(&key) {
            return Err(at(line_no, format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(at(line_no, format!("missing value for '{key}'")));
        }
        if !seen.insert(key) {
            return Err(at(line_no, format!("duplicate key '{key}'")));
        }
        entries.push((line_no, key, value));
    }
    let Some(&(line_no, _, name)) = entries.iter().find(|e| e.1 == "problem") else {
        return Err(CliError::Config("1: missing required key 'problem'".into()));
    };
    let benchmark = create(name).map_err(|e| at(line_no, e.to_string()))?;
    let mut settings = benchmark.default_settings();
    let mut oracle = false;
    let mut oracle_samples = DEFAULT_ORACLE_SAMPLES;
    for &(line_no, key, value) in &entries {
        let bad = |what: &str| at(line_no, format!("'{key}' {what}, got '{value}'"));
        match key {
            "problem" => {}
            "M" => settings.m = count(value).ok_or_else(|| bad("must be a non-negative integer"))?,
            "N" => settings.n = count(value).filter(|&n| n >= 2).ok_or_else(|| bad("must be an integer >= 2"))?,
            "seed" => settings.seed = value.parse().map_err(|_| bad("must be a non-negative integer"))?,
            "eps1" => settings.eps_global = tolerance(value).ok_or_else(|| bad("must be > 0"))?,
            "eps2" => settings.eps_local = tolerance(value).ok_or_else(|| bad("must be > 0"))?,
            "max_outer" => settings.max_outer = count(value).filter(|&v| v > 0).ok_or_else(|| bad("must be a positive integer"))?,
            "max_inner" => settings.max_inner = count(value).filter(|&v| v > 0).ok_or_else(|| bad("must be a positive integer"))?,
            "mesh_nodes" => settings.mesh_nodes = count(value).ok_or_else(|| bad("must be a positive integer"))?,
            "nx" => settings.nx = count(value).ok_or_else(|| bad("must be a positive integer"))?,
            "nt" => settings.nt = count(value).ok_or_else(|| bad("must be a positive integer"))?,
            "probe" => {
                settings.probe = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad("must be a comma-separated list of numbers"))?;
                if settings.probe.len() != benchmark.probe_len() {
                    return Err(bad(&format!("needs {} coordinates", benchmark.probe_len())));
                }
            }
            "initial_amplitude" => {
                settings.initial_amplitude =
                    value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("must be a number"))?
            }
            "oracle" => oracle = flag(value).ok_or_else(|| bad("must be true or false"))?,
            "oracle_samples" => {
                oracle_samples = count(value).filter(|&v| v >= 100).ok_or_else(|| bad("must be an integer >= 100"))?
            }
            _ => unreachable!(),
        }
    }
    Ok(RunConfig { benchmark, settings, oracle, oracle_samples })
}

fn at(line: usize, msg: String) -> CliError {
    CliError::Config(format!("{line}: {msg}"))
}

/// Non-negative integer, also accepting exact forms like `1e5`.
fn count(v: &str) -> Option<usize> {
    v.parse::<usize>().ok().or_else(|| {
        let f = v.parse::<f64>().ok()?;
        (f >= 0.0 && f.fract() == 0.0 && f < 1e15).then_some(f as usize)
    })
}

fn tolerance(v: &str) -> Option<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite() && *x > 0.0)
}

fn flag(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        match parse(text) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn full_scale_elliptic_config() {
        let c = parse("problem: elliptic\nM: 100\nN: 100000\neps1: 1e-6\neps2: 1e-3\nseed: 1\n").unwrap();
        assert_eq!(c.benchmark.name(), "elliptic");
        assert_eq!((c.settings.m, c.settings.n, c.settings.seed), (100, 100_000, 1));
        assert_eq!((c.settings.eps_global, c.settings.eps_local), (1e-6, 1e-3));
        assert!(!c.oracle);
    }

    #[test]
    fn defaults_follow_the_problem() {
        let c = parse("problem = burgers").unwrap();
        assert_eq!(c.settings.eps_global, 1e-2);
        assert_eq!(c.settings.m, 1000);
        let c = parse("# comment\n\nproblem: wave # trailing\noracle: true\noracle_samples: 1e4\nprobe: 0.1, 0, 1").unwrap();
        assert!(c.oracle);
        assert_eq!(c.oracle_samples, 10_000);
        assert_eq!(c.settings.probe, vec![0.1, 0.0, 1.0]);
    }

    #[test]
    fn zero_tolerance_is_rejected() {
        let m = err("problem: elliptic\neps1: 0\n");
        assert!(m.starts_with("2: "), "{m}");
        assert!(m.contains("eps1"));
    }

    #[test]
    fn errors_name_the_line() {
        assert!(err("problem: elliptic\n\nfoo: 3").starts_with("3: unknown key"));
        assert!(err("problem: elliptic\nM: 2\nM: 3").starts_with("3: duplicate"));
        let m = err("problem: heat");
        assert!(m.starts_with("1: ") && m.contains("unknown problem"), "{m}");
        assert!(err("M: 3").contains("missing required key 'problem'"));
        assert!(err("problem: wave\nprobe: 0, 0").starts_with("2: "));
        assert!(err("problem: wave\nN: 1.5").starts_with("2: "));
        assert!(err("problem wave").starts_with("1: expected"));
    }
}
