//! Seeded Monte Carlo sweeps of ergodic computation rates.
//!
//! Every trial draws one block-fading channel from its own substream and
//! evaluates all schemes at all SNRs on that draw (common random numbers).
//! Trials run in parallel; per-trial rates are collected in trial order and
//! aggregated sequentially, so results do not depend on the thread count.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::cfchan::{self, BlockFadingChannel, ChannelError};
use crate::numfield::CoefficientRing;
use crate::rng;
use crate::svp::{self, SvpError};

#[derive(Debug, Error)]
pub enum SimkitError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown scheme '{0}' (expected mac, naive_Z, am_Z or am_ring(d))")]
    UnknownScheme(String),
    #[error("need at least 3 SNR points in the window, found {found}")]
    InsufficientPoints { found: usize },
    #[error("scheme {0} is not part of this sweep")]
    MissingScheme(Scheme),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Svp(#[from] SvpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Gaussian MAC sum capacity, the upper benchmark.
    Mac,
    /// Best integer equation on the single best block.
    NaiveZ,
    /// AM decoder restricted to integer coefficients.
    AmZ,
    /// AM decoder over the ring of integers of `Q(√d)`.
    AmRing(i64),
}

impl Scheme {
    pub fn name(&self) -> String {
        match self {
            Scheme::Mac => "mac".into(),
            Scheme::NaiveZ => "naive_Z".into(),
            Scheme::AmZ => "am_Z".into(),
            Scheme::AmRing(d) => format!("am_ring({d})"),
        }
    }

    /// Coefficient ring searched by the AM schemes.
    pub fn ring(&self) -> Result<Option<CoefficientRing>, SimkitError> {
        match self {
            Scheme::AmZ => Ok(Some(CoefficientRing::Integers)),
            Scheme::AmRing(d) => CoefficientRing::quadratic(*d)
                .map(Some)
                .map_err(|e| SimkitError::InvalidConfig(format!("am_ring({d}): {e}"))),
            Scheme::Mac | Scheme::NaiveZ => Ok(None),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Scheme {
    type Err = SimkitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "mac" | "mac_capacity" => return Ok(Scheme::Mac),
            "naive_Z" => return Ok(Scheme::NaiveZ),
            "am_Z" => return Ok(Scheme::AmZ),
            _ => {}
        }
        s.strip_prefix("am_ring(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|d| d.trim().parse::<i64>().ok())
            .map(Scheme::AmRing)
            .ok_or_else(|| SimkitError::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Number of fading blocks.
    pub n: usize,
    /// Number of users.
    pub users: usize,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub schemes: Vec<Scheme>,
    pub master_seed: u64,
    /// Worker threads; 0 uses the global rayon pool.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n: 2,
            users: 2,
            snr_db: (0..=10).map(|k| 5.0 * k as f64).collect(),
            trials: 2000,
            schemes: vec![
                Scheme::Mac,
                Scheme::NaiveZ,
                Scheme::AmZ,
                Scheme::AmRing(3),
                Scheme::AmRing(5),
                Scheme::AmRing(7),
            ],
            master_seed: 1,
            threads: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SimkitError> {
        let bad = |m: String| Err(SimkitError::InvalidConfig(m));
        if self.n == 0 || self.users == 0 {
            return bad("n and L must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db must be a non-empty list of finite values".into());
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        for s in &self.schemes {
            if let Some(ring) = s.ring()? {
                ring.check_blocks(self.n)
                    .map_err(|e| SimkitError::InvalidConfig(format!("{s}: {e}")))?;
            }
        }
        Ok(())
    }

    /// SNR grid in ascending order without duplicates.
    pub fn sorted_snr_db(&self) -> Vec<f64> {
        let mut v = self.snr_db.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Gain matrix `h[j][l]` of trial `trial_index`: i.i.d. N(0, 1) entries drawn
/// block by block from the substream of `(master_seed, trial_index)`.
pub fn sample_channels(master_seed: u64, trial_index: u64, n: usize, users: usize) -> Vec<Vec<f64>> {
    let mut stream = rng::substream(master_seed, trial_index);
    let flat = rng::standard_normal_vec(&mut stream, n * users);
    flat.chunks(users).map(<[f64]>::to_vec).collect()
}

/// Rate of one scheme on one channel realization.
pub fn scheme_rate(scheme: Scheme, ch: &BlockFadingChannel) -> Result<f64, SimkitError> {
    Ok(match scheme {
        Scheme::Mac => cfchan::mac_sum_capacity(ch),
        Scheme::NaiveZ => cfchan::naive_rate(ch)?.rate_bits,
        Scheme::AmZ | Scheme::AmRing(_) => {
            let ring = scheme.ring()?.expect("AM schemes have a ring");
            svp::best_equation(&ring, ch)?.rate_bits
        }
    })
}

/// Rates of every `(snr, scheme)` pair on trial `trial_index`, indexed
/// `[snr][scheme]` with SNRs in the order given.
pub fn sweep_trial(cfg: &SweepConfig, snr_db: &[f64], trial_index: u64) -> Result<Vec<Vec<f64>>, SimkitError> {
    let h = sample_channels(cfg.master_seed, trial_index, cfg.n, cfg.users);
    let base = BlockFadingChannel::new(h, 1.0)?;
    snr_db
        .iter()
        .map(|&db| {
            let ch = base.with_snr(cfchan::db_to_linear(db))?;
            cfg.schemes.iter().map(|&s| scheme_rate(s, &ch)).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub mean_rate_bits: f64,
    pub stderr_bits: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub snr_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub master_seed: u64,
    /// One row per `(snr, scheme)`, SNRs ascending, schemes in config order.
    pub rows: Vec<SweepRow>,
    /// `per_trial[s][k][t]`: rate of scheme `k` at SNR index `s` on trial `t`.
    pub per_trial: Vec<Vec<Vec<f64>>>,
    /// Number of channel realizations drawn during the sweep.
    pub channel_draws: u64,
}

impl SweepResult {
    pub fn row(&self, snr_db: f64, scheme: Scheme) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.snr_db == snr_db)
    }

    pub fn scheme_index(&self, scheme: Scheme) -> Option<usize> {
        self.schemes.iter().position(|&s| s == scheme)
    }

    /// Per-trial rates of `scheme` at SNR index `s`.
    pub fn trial_rates(&self, s: usize, scheme: Scheme) -> Option<&[f64]> {
        let k = self.scheme_index(scheme)?;
        Some(&self.per_trial[s][k])
    }

    /// DOF slope of every scheme over `window` (dB), where defined.
    pub fn dof_slopes(&self, window: (f64, f64)) -> Vec<(Scheme, Option<f64>)> {
        self.schemes
            .iter()
            .map(|&s| (s, dof_slope(self, s, window).ok()))
            .collect()
    }
}

/// Neumaier-compensated sum, evaluated left to right.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error `s / √N` (with `s` the `N − 1` sample std).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = compensated_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error of the paired differences `a_t − b_t`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_stderr(&d)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult, SimkitError> {
    cfg.validate()?;
    if cfg.threads == 0 {
        return sweep_in_pool(cfg);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| SimkitError::ThreadPool(e.to_string()))?
        .install(|| sweep_in_pool(cfg))
}

fn sweep_in_pool(cfg: &SweepConfig) -> Result<SweepResult, SimkitError> {
    let snr_db = cfg.sorted_snr_db();
    let draws = AtomicU64::new(0);
    let per_trial: Vec<Vec<Vec<f64>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            draws.fetch_add(1, Ordering::Relaxed);
            sweep_trial(cfg, &snr_db, t)
        })
        .collect::<Result<_, _>>()?;

    let trials = cfg.trials as usize;
    let by_snr: Vec<Vec<Vec<f64>>> = (0..snr_db.len())
        .map(|s| {
            (0..cfg.schemes.len())
                .map(|k| (0..trials).map(|t| per_trial[t][s][k]).collect())
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(snr_db.len() * cfg.schemes.len());
    for (s, &db) in snr_db.iter().enumerate() {
        for (k, &scheme) in cfg.schemes.iter().enumerate() {
            let (mean, se) = mean_stderr(&by_snr[s][k]);
            rows.push(SweepRow {
                snr_db: db,
                scheme,
                mean_rate_bits: mean,
                stderr_bits: se,
                trials: cfg.trials,
            });
        }
    }
    Ok(SweepResult {
        snr_db,
        schemes: cfg.schemes.clone(),
        master_seed: cfg.master_seed,
        rows,
        per_trial: by_snr,
        channel_draws: draws.into_inner(),
    })
}

/// Least-squares slope of the mean rate against `(1/2) log₂ P` over the SNR
/// points inside `window = (lo_db, hi_db)`.
pub fn dof_slope(result: &SweepResult, scheme: Scheme, window: (f64, f64)) -> Result<f64, SimkitError> {
    if result.scheme_index(scheme).is_none() {
        return Err(SimkitError::MissingScheme(scheme));
    }
    let pts: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.scheme == scheme && r.snr_db >= window.0 && r.snr_db <= window.1)
        .map(|r| (0.5 * (r.snr_db / 10.0) * 10f64.log2(), r.mean_rate_bits))
        .collect();
    if pts.len() < 3 {
        return Err(SimkitError::InsufficientPoints { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}
