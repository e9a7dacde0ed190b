//! Block-fading multiple-access channel seen by one relay, and the closed-form
//! rate and noise expressions for compute-and-forward over it.
//!
//! Rates are in bits per channel-matrix use, i.e. per column of the `n × T`
//! received matrix (`n` real channel uses).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numfield::{CoefficientRing, NumFieldError, RingElement};
use crate::svp::{self, SvpError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("coefficient vector is zero")]
    ZeroCoefficient,
    #[error("coefficient vector has {got} entries, channel has {expected} users")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Ring(#[from] NumFieldError),
    #[error(transparent)]
    Search(#[from] Box<SvpError>),
}

/// Real block-fading channel: `n` blocks, `L` users, SNR `P` (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFadingChannel {
    /// `h[j][l]` is the gain of user `l` in block `j`.
    h: Vec<Vec<f64>>,
    snr: f64,
}

impl BlockFadingChannel {
    pub fn new(h: Vec<Vec<f64>>, snr: f64) -> Result<Self, ChannelError> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(ChannelError::InvalidChannel(format!("SNR must be positive, got {snr}")));
        }
        let users = h.first().map_or(0, Vec::len);
        if h.is_empty() || users == 0 {
            return Err(ChannelError::InvalidChannel("need at least one block and one user".into()));
        }
        if h.iter().any(|row| row.len() != users) {
            return Err(ChannelError::InvalidChannel("ragged gain matrix".into()));
        }
        if h.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ChannelError::InvalidChannel("non-finite channel gain".into()));
        }
        Ok(BlockFadingChannel { h, snr })
    }

    pub fn from_snr_db(h: Vec<Vec<f64>>, snr_db: f64) -> Result<Self, ChannelError> {
        Self::new(h, db_to_linear(snr_db))
    }

    pub fn blocks(&self) -> usize {
        self.h.len()
    }

    pub fn users(&self) -> usize {
        self.h[0].len()
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// `h_j`.
    pub fn gains(&self, j: usize) -> &[f64] {
        &self.h[j]
    }

    pub fn gain_matrix(&self) -> &[Vec<f64>] {
        &self.h
    }

    pub fn with_snr(&self, snr: f64) -> Result<Self, ChannelError> {
        Self::new(self.h.clone(), snr)
    }

    /// The single-block channel made of block `j` alone.
    pub fn block(&self, j: usize) -> BlockFadingChannel {
        BlockFadingChannel {
            h: vec![self.h[j].clone()],
            snr: self.snr,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `max(log₂ x, 0)`.
pub fn log2_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.log2()
    } else {
        0.0
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `M_j = I − P/(P‖h_j‖² + 1) · h_j h_jᵀ`.
pub fn gram_matrix(h: &[f64], snr: f64) -> DMatrix<f64> {
    let l = h.len();
    let hv = DVector::from_column_slice(h);
    let scale = snr / (snr * norm_sq(h) + 1.0);
    DMatrix::identity(l, l) - (&hv * hv.transpose()) * scale
}

/// MMSE scalar `b_j = P σ_j(a)ᵀ h_j / (P‖h_j‖² + 1)`.
pub fn mmse_scale(h: &[f64], sigma: &[f64], snr: f64) -> f64 {
    snr * dot(sigma, h) / (snr * norm_sq(h) + 1.0)
}

/// `ν²_eff = b² + P‖b·h − σ‖²`.
pub fn effective_noise(h: &[f64], sigma: &[f64], b: f64, snr: f64) -> f64 {
    let resid: f64 = h.iter().zip(sigma).map(|(hi, si)| (b * hi - si).powi(2)).sum();
    b * b + snr * resid
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    (v.transpose() * m * &v)[(0, 0)]
}

/// A coefficient vector `a ∈ O^L` with everything the relay derives from it.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationCandidate {
    pub a: Vec<RingElement>,
    /// `sigma[j]` is `σ_j(a) ∈ R^L`.
    pub sigma: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub nu_sq: Vec<f64>,
    /// `f(a) = Σ_j σ_j(a)ᵀ M_j σ_j(a)`.
    pub quad_form: f64,
    pub rate_bits: f64,
}

impl EquationCandidate {
    pub fn blocks(&self) -> usize {
        self.nu_sq.len()
    }

    /// `σ²_AM = (Σ_j ν²_eff,j) / n`.
    pub fn sigma_am_sq(&self) -> f64 {
        self.nu_sq.iter().sum::<f64>() / self.blocks() as f64
    }

    /// `σ²_GM = (Π_j ν²_eff,j)^{1/n}`, computed in the log domain.
    pub fn sigma_gm_sq(&self) -> f64 {
        if self.nu_sq.iter().any(|&v| v <= 0.0) {
            return 0.0;
        }
        let n = self.blocks() as f64;
        (self.nu_sq.iter().map(|v| v.ln()).sum::<f64>() / n).exp()
    }
}

/// Computation rate of the arithmetic-mean decoder for coefficient vector `a`,
/// `(n/2) log⁺(n / f(a))`, with per-block MMSE scalars.
pub fn am_rate(
    ch: &BlockFadingChannel,
    a: &[RingElement],
    ring: &CoefficientRing,
) -> Result<EquationCandidate, ChannelError> {
    let n = ch.blocks();
    ring.check_blocks(n)?;
    if a.len() != ch.users() {
        return Err(ChannelError::DimensionMismatch {
            expected: ch.users(),
            got: a.len(),
        });
    }
    if a.iter().all(RingElement::is_zero) {
        return Err(ChannelError::ZeroCoefficient);
    }
    let p = ch.snr();
    let mut sigma = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut nu_sq = Vec::with_capacity(n);
    let mut f = 0.0;
    for j in 0..n {
        let h = ch.gains(j);
        let s: Vec<f64> = a.iter().map(|&x| ring.conjugate(x, j)).collect();
        let bj = mmse_scale(h, &s, p);
        nu_sq.push(effective_noise(h, &s, bj, p));
        f += quad_form(&gram_matrix(h, p), &s);
        b.push(bj);
        sigma.push(s);
    }
    debug_assert!({
        let total: f64 = nu_sq.iter().sum();
        (total - p * f).abs() <= 1e-9 * total.abs().max(p * f.abs()) + 1e-12
    });
    let rate_bits = n as f64 / 2.0 * log2_plus(n as f64 / f);
    Ok(EquationCandidate {
        a: a.to_vec(),
        sigma,
        b,
        nu_sq,
        quad_form: f,
        rate_bits,
    })
}

/// Single-block integer computation rate `(1/2) log⁺(1 / aᵀ M a)`, the
/// MMSE-optimised form of the classic integer compute-and-forward rate.
pub fn block_rate_z(h: &[f64], a: &[i64], snr: f64) -> Result<f64, ChannelError> {
    if a.len() != h.len() {
        return Err(ChannelError::DimensionMismatch {
            expected: h.len(),
            got: a.len(),
        });
    }
    if a.iter().all(|&x| x == 0) {
        return Err(ChannelError::ZeroCoefficient);
    }
    let x: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    Ok(0.5 * log2_plus(1.0 / quad_form(&gram_matrix(h, snr), &x)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveRate {
    pub block: usize,
    pub a: Vec<i64>,
    pub rate_bits: f64,
}

/// Naive decoder: the best integer equation on the single best block.
/// The rate is not multiplied by `n`; only one block carries the equation.
pub fn naive_rate(ch: &BlockFadingChannel) -> Result<NaiveRate, ChannelError> {
    let mut best: Option<NaiveRate> = None;
    for j in 0..ch.blocks() {
        let single = ch.block(j);
        let cand = svp::best_equation(&CoefficientRing::Integers, &single)
            .map_err(|e| ChannelError::Search(Box::new(e)))?;
        let a: Vec<i64> = cand.a.iter().map(|x| x.u).collect();
        let rate_bits = block_rate_z(single.gains(0), &a, ch.snr())?;
        if best.as_ref().is_none_or(|b| rate_bits > b.rate_bits) {
            best = Some(NaiveRate {
                block: j,
                a,
                rate_bits,
            });
        }
    }
    Ok(best.expect("channel has at least one block"))
}

/// Gaussian MAC sum capacity applied per block, `Σ_j (1/2) log₂(1 + P‖h_j‖²)`.
pub fn mac_sum_capacity(ch: &BlockFadingChannel) -> f64 {
    (0..ch.blocks())
        .map(|j| 0.5 * (1.0 + ch.snr() * norm_sq(ch.gains(j))).log2())
        .sum()
}
