//! CSV emission and parsing for sweep and codec results.

use std::io::Write;
use std::path::Path;

use algcf::simkit::{Scheme, SweepResult};

use crate::CliError;

pub const SWEEP_HEADER: &str = "snr_db,scheme,mean_rate_bits,stderr_bits,trials,seed";
pub const CODEC_HEADER: &str = "snr_db,error_rate,stderr,union_bound,trials";

/// One parsed sweep CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCsvRow {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub mean_rate_bits: f64,
    pub stderr_bits: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecCsvRow {
    pub snr_db: f64,
    pub error_rate: f64,
    pub stderr: f64,
    pub union_bound: f64,
    pub trials: u64,
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{:.6},{},{:.6},{:.6},{},{}\n",
            r.snr_db, r.scheme, r.mean_rate_bits, r.stderr_bits, r.trials, result.master_seed
        ));
    }
    out
}

pub fn codec_csv(rows: &[CodecCsvRow]) -> String {
    let mut out = String::from(CODEC_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6e},{}\n",
            r.snr_db, r.error_rate, r.stderr, r.union_bound, r.trials
        ));
    }
    out
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T, CliError> {
    s.parse().map_err(|_| CliError::Parse {
        line,
        message: format!("bad {name} `{s}`"),
    })
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepCsvRow>, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SWEEP_HEADER => {}
        _ => {
            return Err(CliError::Parse {
                line: 1,
                message: "missing sweep header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 6 {
                return Err(CliError::Parse {
                    line,
                    message: format!("expected 6 columns, got {}", cols.len()),
                });
            }
            Ok(SweepCsvRow {
                snr_db: field(line, "snr_db", cols[0])?,
                scheme: cols[1].parse().map_err(|_| CliError::Parse {
                    line,
                    message: format!("bad scheme `{}`", cols[1]),
                })?,
                mean_rate_bits: field(line, "mean_rate_bits", cols[2])?,
                stderr_bits: field(line, "stderr_bits", cols[3])?,
                trials: field(line, "trials", cols[4])?,
                seed: field(line, "seed", cols[5])?,
            })
        })
        .collect()
}

/// Writes `contents` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Runtime(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
