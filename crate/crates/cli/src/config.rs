//! `key = value` sweep configuration files and flag overrides.

use std::path::{Path, PathBuf};

use algcf::simkit::{Scheme, SweepConfig};

use crate::CliError;

pub const KEYS: [&str; 8] = ["n", "L", "snr_db", "trials", "schemes", "seed", "d_list", "output"];

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub n: usize,
    pub users: usize,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub d_list: Vec<i64>,
    pub output: Option<PathBuf>,
}

impl Default for CliConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        CliConfig {
            n: sweep.n,
            users: sweep.users,
            snr_db: sweep.snr_db,
            trials: sweep.trials,
            schemes: sweep.schemes,
            seed: sweep.master_seed,
            d_list: vec![3, 5, 7],
            output: None,
        }
    }
}

impl CliConfig {
    pub fn sweep_config(&self, threads: usize) -> SweepConfig {
        SweepConfig {
            n: self.n,
            users: self.users,
            snr_db: self.snr_db.clone(),
            trials: self.trials,
            schemes: self.schemes.clone(),
            master_seed: self.seed,
            threads,
        }
    }
}

/// Raw string values, one slot per key; later assignments win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    pub n: Option<String>,
    pub users: Option<String>,
    pub snr_db: Option<String>,
    pub trials: Option<String>,
    pub schemes: Option<String>,
    pub seed: Option<String>,
    pub d_list: Option<String>,
    pub output: Option<String>,
}

impl RawConfig {
    fn slot(&mut self, key: &str) -> Option<&mut Option<String>> {
        Some(match key {
            "n" => &mut self.n,
            "L" => &mut self.users,
            "snr_db" => &mut self.snr_db,
            "trials" => &mut self.trials,
            "schemes" => &mut self.schemes,
            "seed" => &mut self.seed,
            "d_list" => &mut self.d_list,
            "output" => &mut self.output,
            _ => return None,
        })
    }

    /// Parses config file text. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Parse {
                    line: line_no,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(CliError::Parse {
                    line: line_no,
                    message: format!("missing value for `{key}`"),
                });
            }
            match raw.slot(key) {
                Some(slot) => *slot = Some(value.to_string()),
                None => {
                    return Err(CliError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            }
        }
        Ok(raw)
    }

    /// Values set in `other` replace those in `self`.
    pub fn overlay(mut self, other: &RawConfig) -> Self {
        for key in KEYS {
            let theirs = other.clone().slot(key).and_then(|s| s.take());
            if theirs.is_some() {
                *self.slot(key).expect("known key") = theirs;
            }
        }
        self
    }

    pub fn resolve(&self) -> Result<CliConfig, CliError> {
        let mut cfg = CliConfig::default();
        if let Some(v) = &self.n {
            cfg.n = parse_count("n", v)? as usize;
        }
        if let Some(v) = &self.users {
            cfg.users = parse_count("L", v)? as usize;
        }
        if let Some(v) = &self.trials {
            cfg.trials = parse_count("trials", v)?;
        }
        if let Some(v) = &self.seed {
            cfg.seed = v
                .parse()
                .map_err(|_| invalid("seed", format!("`{v}` is not an unsigned 64-bit integer")))?;
        }
        if let Some(v) = &self.snr_db {
            cfg.snr_db = parse_snr_list(v)?;
        }
        if let Some(v) = &self.d_list {
            cfg.d_list = v
                .split(',')
                .map(|d| {
                    d.trim()
                        .parse::<i64>()
                        .map_err(|_| invalid("d_list", format!("`{}` is not an integer", d.trim())))
                })
                .collect::<Result<_, _>>()?;
            if cfg.d_list.is_empty() {
                return Err(invalid("d_list", "empty list".into()));
            }
        }
        let scheme_text = self
            .schemes
            .clone()
            .unwrap_or_else(|| "mac,naive_Z,am_Z,am_ring".into());
        cfg.schemes = parse_schemes(&scheme_text, &cfg.d_list)?;
        if let Some(v) = &self.output {
            cfg.output = Some(PathBuf::from(v));
        }
        cfg.sweep_config(0)
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(cfg)
    }
}

fn invalid(key: &str, message: String) -> CliError {
    CliError::InvalidValue {
        key: key.to_string(),
        message,
    }
}

fn parse_count(key: &str, v: &str) -> Result<u64, CliError> {
    match v.parse::<i64>() {
        Ok(x) if x >= 1 => Ok(x as u64),
        Ok(x) => Err(invalid(key, format!("must be at least 1, got {x}"))),
        Err(_) => Err(invalid(key, format!("`{v}` is not an integer"))),
    }
}

/// A comma-separated list (`0,10,20`) or an inclusive range `lo:step:hi`.
pub fn parse_snr_list(v: &str) -> Result<Vec<f64>, CliError> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| invalid("snr_db", format!("`{}` is not a finite number", s.trim())))
    };
    let parts: Vec<&str> = v.split(':').collect();
    let list = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        [lo, step, hi] => {
            let (lo, step, hi) = (num(lo)?, num(step)?, num(hi)?);
            if step <= 0.0 || hi < lo {
                return Err(invalid("snr_db", format!("bad range {lo}:{step}:{hi}")));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            if count > 10_000 {
                return Err(invalid("snr_db", "range has too many points".into()));
            }
            (0..count).map(|k| lo + step * k as f64).collect()
        }
        _ => return Err(invalid("snr_db", format!("expected a list or lo:step:hi, got `{v}`"))),
    };
    if list.is_empty() {
        return Err(invalid("snr_db", "empty list".into()));
    }
    Ok(list)
}

/// Scheme names in order; a bare `am_ring` expands to one entry per `d_list` value.
pub fn parse_schemes(v: &str, d_list: &[i64]) -> Result<Vec<Scheme>, CliError> {
    let mut out = Vec::new();
    for name in v.split(',').map(str::trim) {
        if name == "am_ring" {
            out.extend(d_list.iter().map(|&d| Scheme::AmRing(d)));
        } else {
            out.push(name.parse().map_err(|e: algcf::simkit::SimkitError| invalid("schemes", e.to_string()))?);
        }
    }
    Ok(out)
}

/// Reads the optional config file and applies flag overrides on top.
pub fn parse_config(path: Option<&Path>, flags: &RawConfig) -> Result<CliConfig, CliError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    file.overlay(flags).resolve()
}
