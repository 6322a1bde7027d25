//! Tool configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment; values may be
//! wrapped in double quotes. Recognised keys:
//!
//! ```text
//! budget      = 20000          # LUTs
//! latency     = 25             # cycles per hardware invocation
//! bandwidth   = 4e9            # bytes per second, or inf
//! clock       = 1e-9           # seconds per cycle
//! mode        = FE+Merging     # FE, FLE, FE+Merging, FLE+Merging or sweep
//! model       = area.txt       # area model file; bundled model if absent
//! seed        = 7
//! similarity  = 0.5            # fingerprint cutoff for merge candidates
//! merge_depth = 2
//! max_pairs   = 64
//! trials      = 200            # differential checks per merge side
//! budgets     = 1000, 10000    # sweep lists
//! latencies   = 25, 500
//! bandwidths  = 1e9, inf
//! sw.mul      = 3              # opcode latency override (sw.* or hw.*)
//! ```
//!
//! Leaving out `budget`, `latency` or `bandwidth` makes `dse` sweep that
//! dimension over the preset grid.

use std::path::PathBuf;

use mergedse::cost::LatencyTable;
use mergedse::dse::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single(Configuration),
    Sweep,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        if s.eq_ignore_ascii_case("sweep") {
            Ok(Mode::Sweep)
        } else {
            s.parse().map(Mode::Single)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolConfig {
    pub budget: Option<u64>,
    pub latency: Option<f64>,
    pub bandwidth: Option<f64>,
    pub clock: Option<f64>,
    pub mode: Option<Mode>,
    pub model: Option<PathBuf>,
    pub seed: Option<u64>,
    pub similarity: Option<f64>,
    pub merge_depth: Option<usize>,
    pub max_pairs: Option<usize>,
    pub trials: Option<usize>,
    pub budgets: Option<Vec<u64>>,
    pub latencies: Option<Vec<f64>>,
    pub bandwidths: Option<Vec<f64>>,
    pub latency_table: LatencyTable,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            budget: None,
            latency: None,
            bandwidth: None,
            clock: None,
            mode: None,
            model: None,
            seed: None,
            similarity: None,
            merge_depth: None,
            max_pairs: None,
            trials: None,
            budgets: None,
            latencies: None,
            bandwidths: None,
            latency_table: LatencyTable::default(),
        }
    }
}

/// A configuration problem, tied to the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: key.to_owned(), message: message.into() }
}

/// Non-negative finite number, or `inf` where allowed.
pub fn parse_nonneg(key: &str, v: &str, allow_inf: bool) -> Result<f64, String> {
    let x: f64 = match v.trim() {
        "inf" | "infinity" | "unlimited" if allow_inf => f64::INFINITY,
        t => t.parse().map_err(|_| format!("`{t}` is not a number"))?,
    };
    if x.is_nan() || x < 0.0 {
        return Err(format!("{key} must be non-negative, got {v}"));
    }
    if x.is_infinite() && !allow_inf {
        return Err(format!("{key} must be finite"));
    }
    Ok(x)
}

pub fn parse_count(key: &str, v: &str) -> Result<u64, String> {
    let t = v.trim();
    if t.starts_with('-') {
        return Err(format!("{key} must be non-negative, got {t}"));
    }
    if let Ok(n) = t.parse::<u64>() {
        return Ok(n);
    }
    // accept 1e4 style
    match t.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(format!("{key} must be a non-negative integer, got {t}")),
    }
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err("empty list".into());
    }
    items.into_iter().map(f).collect()
}

impl ToolConfig {
    pub fn parse(src: &str) -> Result<ToolConfig, ConfigError> {
        let mut cfg = ToolConfig::default();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(Some(i + 1), line, "expected `key = value`"));
            };
            let key = k.trim();
            let value = v.trim().trim_matches('"');
            cfg.set(key, value).map_err(|m| err(Some(i + 1), key, m))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "budget" => self.budget = Some(parse_count(key, v)?),
            "latency" => self.latency = Some(parse_nonneg(key, v, false)?),
            "bandwidth" => self.bandwidth = Some(parse_nonneg(key, v, true)?),
            "clock" => {
                let c = parse_nonneg(key, v, false)?;
                if c == 0.0 {
                    return Err("clock must be positive".into());
                }
                self.clock = Some(c)
            }
            "mode" => self.mode = Some(v.parse()?),
            "model" => self.model = Some(PathBuf::from(v)),
            "seed" => self.seed = Some(parse_count(key, v)?),
            "similarity" => {
                let s = parse_nonneg(key, v, false)?;
                if s > 1.0 {
                    return Err("similarity must be in [0, 1]".into());
                }
                self.similarity = Some(s)
            }
            "merge_depth" => {
                let d = parse_count(key, v)? as usize;
                if !(1..=2).contains(&d) {
                    return Err("merge_depth must be 1 or 2".into());
                }
                self.merge_depth = Some(d)
            }
            "max_pairs" => self.max_pairs = Some(parse_count(key, v)? as usize),
            "trials" => self.trials = Some(parse_count(key, v)? as usize),
            "budgets" => self.budgets = Some(list(v, |x| parse_count(key, x))?),
            "latencies" => self.latencies = Some(list(v, |x| parse_nonneg(key, x, false))?),
            "bandwidths" => self.bandwidths = Some(list(v, |x| parse_nonneg(key, x, true))?),
            k if k.starts_with("sw.") || k.starts_with("hw.") => self.latency_table.apply_override(k, v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let cfg = ToolConfig::parse(
            "# platform\nbudget = 20000\nlatency = 25\nbandwidth = inf\nmode = \"FLE+Merging\"\n\
             budgets = 1000, 1e4\nsw.mul = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.budget, Some(20000));
        assert_eq!(cfg.bandwidth, Some(f64::INFINITY));
        assert_eq!(cfg.mode, Some(Mode::Single(Configuration::FleMerging)));
        assert_eq!(cfg.budgets, Some(vec![1000, 10_000]));
    }

    #[test]
    fn negative_values_name_the_field() {
        let e = ToolConfig::parse("latency = 25\nbudget = -5\n").unwrap_err();
        assert_eq!(e.key, "budget");
        assert_eq!(e.line, Some(2));
        assert!(ToolConfig::parse("bandwidth = -1").unwrap_err().to_string().contains("bandwidth"));
        assert!(ToolConfig::parse("colour = red").is_err());
        assert!(ToolConfig::parse("latency = inf").is_err());
    }
}
