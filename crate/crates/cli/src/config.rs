//! Flat `section.key = value` configuration files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Every key the runner understands, with the default written to the manifest when the key is
/// absent. `None` marks keys that have no default (required, or only meaningful together with
/// another setting).
pub const SCHEMA: &[(&str, Option<&str>)] = &[
    ("problem.dim", None),
    ("problem.x0", None),
    ("problem.domain", Some("whole")),
    ("problem.domain.lo", None),
    ("problem.domain.hi", None),
    ("problem.domain.center", None),
    ("problem.domain.radius", None),
    ("problem.domain.normals", None),
    ("problem.domain.offsets", None),
    ("problem.domain.interior", None),
    ("problem.drift", Some("zero")),
    ("problem.drift.value", None),
    ("problem.drift.alpha", None),
    ("problem.drift.beta", None),
    ("problem.drift.x_coef", None),
    ("problem.drift.y_coef", None),
    ("problem.drift.offset", None),
    ("problem.drift.amp", None),
    ("problem.drift.freq", None),
    ("problem.diffusion", Some("zero")),
    ("problem.diffusion.matrix", None),
    ("problem.diffusion.base", None),
    ("problem.diffusion.x_diag", None),
    ("problem.diffusion.y_diag", None),
    ("problem.jump", Some("zero")),
    ("problem.jump.c0", None),
    ("problem.jump.c1", Some("0")),
    ("problem.jump.c2", Some("0")),
    ("problem.marks", Some("none")),
    ("problem.marks.values", None),
    ("problem.marks.weights", None),
    ("problem.marks.a", None),
    ("problem.marks.b", None),
    ("problem.marks.density", None),
    ("problem.marks.gamma", None),
    ("problem.marks.l1", None),
    ("problem.marks.l2", None),
    ("problem.marks.l3", None),
    ("problem.growth", Some("1")),
    ("problem.modulus", Some("linear 1")),
    ("problem.rho_b", Some("zero")),
    ("problem.rho_sigma", Some("zero")),
    ("problem.rho_g", Some("zero")),
    ("problem.h_b", Some("zero")),
    ("problem.h_sigma", Some("zero")),
    ("problem.h_g", Some("zero")),
    ("run.t_end", None),
    ("run.dt", None),
    ("run.epsilon", Some("0.1")),
    ("run.theta", Some("0.25")),
    ("run.particles", Some("1")),
    ("run.replicas", Some("1")),
    ("run.seed", None),
    ("task.kind", None),
    ("task.regime", Some("ldp")),
    ("task.event", Some("halfspace")),
    ("task.event.normal", None),
    ("task.event.level", None),
    ("task.event.target", None),
    ("task.event.threshold", None),
    ("task.event.relative", Some("true")),
    ("task.phi", Some("zero")),
    ("task.psi", Some("null")),
    ("task.half_q2", Some("false")),
    ("task.constraint", Some("interior")),
    ("task.iterations", Some("2000")),
    ("task.restarts", Some("3")),
    ("task.rounds", Some("4")),
    ("task.penalty0", Some("100")),
    ("task.residual_tol", Some("1e-5")),
    ("task.cell_factor", Some("1")),
    ("task.oracle", Some("false")),
    ("task.mode", Some("limit")),
    ("task.samples", Some("1000")),
    ("task.atoms", Some("4")),
    ("task.c0_constant", Some("1")),
    ("task.c0_power", Some("2")),
    ("task.c", Some("1")),
    ("task.q", Some("1")),
    ("task.rho", Some("linear 1")),
    ("output.dir", Some("out")),
    ("output.prefix", Some("")),
];

fn schema_default(key: &str) -> Option<Option<&'static str>> {
    SCHEMA.iter().find(|(k, _)| *k == key).map(|(_, d)| *d)
}

/// Raw key-value pairs as written in the file.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if schema_default(k).is_none() {
                return Err(CliError::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }
}

/// Typed access to a [`RawConfig`] that remembers every value it handed out, defaults
/// included, in schema order.
#[derive(Debug)]
pub struct Resolver {
    raw: RawConfig,
    used: BTreeMap<&'static str, String>,
}

impl Resolver {
    pub fn new(raw: RawConfig) -> Self {
        Resolver {
            raw,
            used: BTreeMap::new(),
        }
    }

    fn static_key(key: &str) -> &'static str {
        SCHEMA
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(k, _)| *k)
            .unwrap_or_else(|| panic!("key `{key}` missing from schema"))
    }

    /// The raw string for `key`, falling back to its default.
    pub fn get(&mut self, key: &str) -> Option<String> {
        let k = Self::static_key(key);
        let v = self
            .raw
            .entries
            .get(k)
            .cloned()
            .or_else(|| schema_default(k).flatten().map(str::to_string))?;
        self.used.insert(k, v.clone());
        Some(v)
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.entries.contains_key(key)
    }

    pub fn require(&mut self, key: &str) -> Result<String, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn parse<T: FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
    }

    pub fn bool(&mut self, key: &str) -> Result<bool, CliError> {
        self.parse(key)
    }

    pub fn vector(&mut self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.require(key)?;
        parse_numbers(&v).map_err(|e| CliError::Config(format!("`{key}`: {e}")))
    }

    /// Rows separated by `;`.
    pub fn matrix(&mut self, key: &str) -> Result<Vec<Vec<f64>>, CliError> {
        let v = self.require(key)?;
        v.split(';')
            .map(|row| parse_numbers(row).map_err(|e| CliError::Config(format!("`{key}`: {e}"))))
            .collect()
    }

    /// Head word and numeric arguments, as in `power 1 0.5`.
    pub fn tagged(&mut self, key: &str) -> Result<(String, Vec<f64>), CliError> {
        let v = self.require(key)?;
        let mut it = v.split_whitespace();
        let head = it
            .next()
            .ok_or_else(|| CliError::Config(format!("`{key}` is empty")))?
            .to_string();
        let rest: Vec<&str> = it.collect();
        let args = parse_numbers(&rest.join(" ")).map_err(|e| CliError::Config(format!("`{key}`: {e}")))?;
        Ok((head, args))
    }

    /// The resolved configuration as a config file, in schema order.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        for (k, _) in SCHEMA {
            if let Some(v) = self.used.get(k) {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    /// `sha256:<hex>` of the resolved inputs, hashed with a git-style `blob <len>\0` header.
    /// Output locations are left out so that relocated re-runs share the hash.
    pub fn content_hash(&self) -> String {
        let inputs: String = self
            .resolved_text()
            .lines()
            .filter(|l| !l.starts_with("output."))
            .map(|l| format!("{l}\n"))
            .collect();
        content_hash(&inputs)
    }
}

pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    let mut out = String::from("sha256:");
    for b in h.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn parse_numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_unknown_keys() {
        let raw = RawConfig::parse("# header\nrun.seed = 7 # trailing\n\nrun.dt=0.1\n").unwrap();
        let mut r = Resolver::new(raw);
        assert_eq!(r.parse::<u64>("run.seed").unwrap(), 7);
        assert_eq!(r.get("run.theta").unwrap(), "0.25");
        assert_eq!(r.resolved_text(), "run.theta = 0.25\nrun.seed = 7\n");
        let err = RawConfig::parse("run.sed = 7").unwrap_err();
        assert!(err.to_string().contains("run.sed"));
        assert!(RawConfig::parse("run.seed = 1\nrun.seed = 2").is_err());
        assert!(RawConfig::parse("run.seed").is_err());
    }

    #[test]
    fn schema_keys_are_unique() {
        let mut keys: Vec<&str> = SCHEMA.iter().map(|(k, _)| *k).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), SCHEMA.len());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(content_hash("a"), content_hash("a"));
        assert_ne!(content_hash("a"), content_hash("b"));
    }
}
