//! The line-oriented `key = value` run description.
//!
//! ```text
//! # half derivative of t^2
//! command  = derivative
//! alpha    = 0.5
//! N        = 100
//! K        = 20
//! function = pow2
//! ```
//!
//! Unknown keys, repeated keys and keys the chosen command does not use are
//! all rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use diffrep_core::diffusive::INTEGER_ORDER_TOL;
use diffrep_core::oracle::corpus;
use diffrep_core::quadrature::MAX_NODES;
use diffrep_core::Method;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: Some(key.to_owned()),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Derivative,
    Decompose,
    Convergence,
    Nodes,
    Stiffness,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "derivative" => Ok(Self::Derivative),
            "decompose" => Ok(Self::Decompose),
            "convergence" => Ok(Self::Convergence),
            "nodes" => Ok(Self::Nodes),
            "stiffness" => Ok(Self::Stiffness),
            _ => Err(format!(
                "unknown command `{s}` (expected derivative, decompose, convergence, nodes or stiffness)"
            )),
        }
    }
}

impl Command {
    /// Keys the command accepts besides `command` and `output`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::Nodes => &["K", "K_star"],
            Self::Stiffness => &["alpha", "K", "K_star"],
            Self::Derivative => &[
                "alpha", "a", "T", "N", "K", "K_star", "method", "grid", "function",
            ],
            Self::Decompose => &[
                "alpha",
                "a",
                "T",
                "N",
                "K",
                "method",
                "grid",
                "function",
                "truth_tol",
            ],
            Self::Convergence => &[
                "alpha",
                "a",
                "T",
                "N",
                "N_list",
                "K",
                "K_list",
                "K_star",
                "method",
                "grid",
                "function",
                "truth_tol",
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Uniform,
    /// `t_n = a + T (n/N)^exponent`
    Graded(f64),
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "uniform" {
            return Ok(Self::Uniform);
        }
        let inner = s
            .strip_prefix("graded(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("expected `uniform` or `graded(<exponent>)`, got `{s}`"))?;
        let exponent: f64 = inner
            .trim()
            .parse()
            .map_err(|_| format!("grading exponent `{inner}` is not a number"))?;
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(format!("grading exponent must be >= 1, got {exponent}"));
        }
        Ok(Self::Graded(exponent))
    }
}

/// A validated run description. Fields a command does not use keep their
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub alpha: f64,
    pub a: f64,
    pub length: f64,
    pub steps: Option<usize>,
    pub steps_list: Vec<usize>,
    pub nodes: Option<usize>,
    pub nodes_list: Vec<usize>,
    pub k_star: Option<usize>,
    pub method: Method,
    pub grid: GridSpec,
    pub function: Option<&'static str>,
    pub truth_tol: f64,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    fn defaults(command: Command) -> Self {
        Self {
            command,
            alpha: f64::NAN,
            a: 0.0,
            length: 1.0,
            steps: None,
            steps_list: Vec::new(),
            nodes: None,
            nodes_list: Vec::new(),
            k_star: None,
            method: Method::BackwardEuler,
            grid: GridSpec::Uniform,
            function: None,
            truth_tol: 1e-9,
            output: None,
        }
    }
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

fn parse_value<T: FromStr>(key: &str, e: &Entry) -> Result<T, ConfigError> {
    e.value
        .parse()
        .map_err(|_| err(Some(e.line), key, format!("cannot parse `{}`", e.value)))
}

fn parse_list(key: &str, e: &Entry) -> Result<Vec<usize>, ConfigError> {
    let items = e
        .value
        .split(',')
        .map(|s| {
            s.trim().parse::<usize>().map_err(|_| {
                err(
                    Some(e.line),
                    key,
                    format!("`{}` is not a positive integer", s.trim()),
                )
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if items.len() < 3 {
        return Err(err(
            Some(e.line),
            key,
            "need at least three entries for a rate fit",
        ));
    }
    if items.windows(2).any(|p| p[0] >= p[1]) || items[0] == 0 {
        return Err(err(
            Some(e.line),
            key,
            "entries must be positive and strictly increasing",
        ));
    }
    Ok(items)
}

fn check_nodes(key: &str, line: usize, k: usize) -> Result<usize, ConfigError> {
    if k == 0 || k > MAX_NODES {
        return Err(err(
            Some(line),
            key,
            format!("must lie in 1..={MAX_NODES}, got {k}"),
        ));
    }
    Ok(k)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: None,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError {
                line: Some(line),
                key: (!key.is_empty()).then(|| key.to_owned()),
                message: "empty key or value".into(),
            });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(err(Some(line), key, "unknown key"));
        }
        if let Some(prev) = entries.get(key) {
            return Err(err(
                Some(line),
                key,
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
        entries.insert(key, Entry { line, value });
    }

    let command = match entries.get("command") {
        Some(e) => {
            let command: Command = e
                .value
                .parse()
                .map_err(|m| err(Some(e.line), "command", m))?;
            let allowed = command.keys();
            for (key, other) in &entries {
                if *key != "command" && *key != "output" && !allowed.contains(key) {
                    return Err(err(
                        Some(other.line),
                        key,
                        format!("not used by command `{}`", e.value),
                    ));
                }
            }
            Some(command)
        }
        None => None,
    };

    // value checks come before the missing-command check so that a lone bad
    // value is reported as such
    let mut cfg = RunConfig::defaults(command.unwrap_or(Command::Nodes));
    let require = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| err(None, key, "missing required key"))
    };

    if let Some(e) = entries.get("alpha") {
        let alpha: f64 = parse_value("alpha", e)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(err(
                Some(e.line),
                "alpha",
                format!("must be positive, got {alpha}"),
            ));
        }
        if (alpha - alpha.round()).abs() <= INTEGER_ORDER_TOL {
            return Err(err(
                Some(e.line),
                "alpha",
                format!("integer order {alpha} is not supported"),
            ));
        }
        cfg.alpha = alpha;
    }
    if let Some(e) = entries.get("a") {
        cfg.a = parse_value("a", e)?;
        if !cfg.a.is_finite() {
            return Err(err(Some(e.line), "a", "must be finite"));
        }
    }
    if let Some(e) = entries.get("T") {
        cfg.length = parse_value("T", e)?;
        if !(cfg.length > 0.0 && cfg.length.is_finite()) {
            return Err(err(
                Some(e.line),
                "T",
                format!("must be positive, got {}", cfg.length),
            ));
        }
    }
    if let Some(e) = entries.get("N") {
        let n: usize = parse_value("N", e)?;
        if n == 0 {
            return Err(err(Some(e.line), "N", "must be at least 1"));
        }
        cfg.steps = Some(n);
    }
    if let Some(e) = entries.get("N_list") {
        cfg.steps_list = parse_list("N_list", e)?;
    }
    if let Some(e) = entries.get("K") {
        cfg.nodes = Some(check_nodes("K", e.line, parse_value("K", e)?)?);
    }
    if let Some(e) = entries.get("K_list") {
        cfg.nodes_list = parse_list("K_list", e)?;
        if let Some(&k) = cfg.nodes_list.last() {
            check_nodes("K_list", e.line, k)?;
        }
    }
    if let Some(e) = entries.get("K_star") {
        let k: usize = parse_value("K_star", e)?;
        if k == 0 {
            return Err(err(Some(e.line), "K_star", "must be at least 1"));
        }
        let cap = cfg.nodes.or(cfg.nodes_list.first().copied());
        if let Some(cap) = cap {
            if k > cap {
                return Err(err(
                    Some(e.line),
                    "K_star",
                    format!("exceeds the rule size K = {cap}"),
                ));
            }
        }
        cfg.k_star = Some(k);
    }
    if let Some(e) = entries.get("method") {
        cfg.method = parse_value("method", e)?;
    }
    if let Some(e) = entries.get("grid") {
        cfg.grid = e.value.parse().map_err(|m| err(Some(e.line), "grid", m))?;
    }
    if let Some(e) = entries.get("function") {
        let f = corpus::by_name(e.value).ok_or_else(|| {
            let names: Vec<_> = corpus::CORPUS.iter().map(|f| f.name).collect();
            err(
                Some(e.line),
                "function",
                format!(
                    "unknown function `{}` (known: {})",
                    e.value,
                    names.join(", ")
                ),
            )
        })?;
        cfg.function = Some(f.name);
    }
    if let Some(e) = entries.get("truth_tol") {
        let tol: f64 = parse_value("truth_tol", e)?;
        if !(1e-14..=1e-8).contains(&tol) {
            return Err(err(
                Some(e.line),
                "truth_tol",
                format!("must lie in [1e-14, 1e-8], got {tol:e}"),
            ));
        }
        cfg.truth_tol = tol;
    }
    if let Some(e) = entries.get("output") {
        cfg.output = Some(PathBuf::from(e.value));
    }

    let command = command.ok_or_else(|| err(None, "command", "missing required key"))?;
    cfg.command = command;
    if command != Command::Nodes {
        require("alpha")?;
    }
    match command {
        Command::Nodes | Command::Stiffness => {
            require("K")?;
        }
        Command::Derivative | Command::Decompose => {
            require("N")?;
            require("K")?;
            require("function")?;
        }
        Command::Convergence => {
            require("function")?;
            match (cfg.steps_list.is_empty(), cfg.nodes_list.is_empty()) {
                (false, true) => {
                    require("K")?;
                    if entries.contains_key("N") {
                        return Err(err(
                            entries.get("N").map(|e| e.line),
                            "N",
                            "conflicts with N_list",
                        ));
                    }
                    if cfg.grid != GridSpec::Uniform {
                        return Err(err(
                            entries.get("grid").map(|e| e.line),
                            "grid",
                            "step-size sweeps need a uniform grid",
                        ));
                    }
                }
                (true, false) => {
                    require("N")?;
                    if entries.contains_key("K") {
                        return Err(err(
                            entries.get("K").map(|e| e.line),
                            "K",
                            "conflicts with K_list",
                        ));
                    }
                }
                _ => return Err(err(None, "N_list", "give exactly one of N_list or K_list")),
            }
        }
    }
    Ok(cfg)
}

const KNOWN_KEYS: [&str; 14] = [
    "command",
    "alpha",
    "a",
    "T",
    "N",
    "N_list",
    "K",
    "K_list",
    "K_star",
    "method",
    "grid",
    "function",
    "truth_tol",
    "output",
];
