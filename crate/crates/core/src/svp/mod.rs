//! Equation-coefficient search as a shortest-vector problem.
//!
//! Minimising `f(a) = Σ_j σ_j(a)ᵀ M_j σ_j(a)` over `a ∈ O^L \ {0}` is the same
//! as finding a shortest nonzero vector of the lattice generated by
//! `Φ̄ = M_mix · Φ_mix`, where `M_mix` stacks the Cholesky factors of the
//! `M_j` block-diagonally and `Φ_mix` is a row shuffle of `I_L ⊗ Φ`. The
//! integer coordinate vector `ã` lists the Z-coordinates of `a_1, …, a_L`
//! one user after the other.
//!
//! The solver LLL-reduces `Φ̄` and then runs an exact Schnorr–Euchner
//! enumeration, so the returned vector is a global minimiser.

pub mod enumerate;
pub mod lll;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::cfchan::{am_rate, gram_matrix, BlockFadingChannel, ChannelError, EquationCandidate};
use crate::numfield::{CoefficientRing, NumFieldError};

pub use enumerate::enumerate;
pub use lll::{lll, Gso};

pub const LLL_DELTA: f64 = 0.99;
/// Relative tolerance under which two squared norms count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;
const CHOLESKY_JITTER: f64 = 1e-12;
const RANK_TOLERANCE: f64 = 1e-14;
const BRUTE_FORCE_LIMIT: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvpError {
    #[error("basis is rank deficient")]
    RankDeficient,
    #[error("Cholesky factorisation of block {block} failed even after jitter")]
    CholeskyFailure { block: usize },
    #[error("brute-force search over {points:.3e} points exceeds the limit")]
    TooLarge { points: f64 },
    #[error("brute-force bound must be at least 1")]
    EmptyDomain,
    #[error(transparent)]
    Ring(#[from] NumFieldError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// How a search basis was assembled from a channel and a coefficient ring.
#[derive(Debug, Clone)]
pub struct BasisLayout {
    pub ring: CoefficientRing,
    pub blocks: usize,
    pub users: usize,
    /// Upper-triangular `M̄_j` with `M_j = M̄_jᵀ M̄_j`.
    pub factors: Vec<DMatrix<f64>>,
    pub m_mix: DMatrix<f64>,
    pub phi_mix: DMatrix<f64>,
    /// Row `r` of `I_L ⊗ Φ` becomes row `shuffle[r]` of `Φ_mix`.
    pub shuffle: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchBasis {
    generator: DMatrix<f64>,
    layout: Option<BasisLayout>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvpResult {
    pub coords: Vec<i64>,
    pub norm_sq: f64,
    pub node_count: u64,
}

/// Cholesky factor `M̄` (upper triangular, `M = M̄ᵀ M̄`), retrying once with jitter.
pub fn cholesky_factor(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    m.clone()
        .cholesky()
        .or_else(|| (m + DMatrix::identity(n, n) * CHOLESKY_JITTER).cholesky())
        .map(|c| c.l().transpose())
}

impl SearchBasis {
    /// Builds `Φ̄ = M_mix · Φ_mix` for the given ring and channel.
    pub fn build(ring: &CoefficientRing, ch: &BlockFadingChannel) -> Result<Self, SvpError> {
        let n = ch.blocks();
        let l = ch.users();
        let phi = ring.embedding_matrix(n)?;
        let rank = ring.rank();

        let mut factors = Vec::with_capacity(n);
        let mut m_mix = DMatrix::zeros(n * l, n * l);
        for j in 0..n {
            let m = gram_matrix(ch.gains(j), ch.snr());
            let f = cholesky_factor(&m).ok_or(SvpError::CholeskyFailure { block: j })?;
            m_mix.view_mut((j * l, j * l), (l, l)).copy_from(&f);
            factors.push(f);
        }

        // I_L ⊗ Φ has row (user, block) at user·n + block; Φ_mix groups rows
        // by block instead.
        let mut phi_mix = DMatrix::zeros(n * l, rank * l);
        let mut shuffle = vec![0; n * l];
        for user in 0..l {
            for j in 0..n {
                shuffle[user * n + j] = j * l + user;
                for i in 0..rank {
                    phi_mix[(j * l + user, user * rank + i)] = phi[(j, i)];
                }
            }
        }
        let generator = &m_mix * &phi_mix;
        Ok(SearchBasis {
            generator,
            layout: Some(BasisLayout {
                ring: *ring,
                blocks: n,
                users: l,
                factors,
                m_mix,
                phi_mix,
                shuffle,
            }),
        })
    }

    /// Wraps an explicit generator matrix whose columns span the lattice.
    pub fn from_generator(generator: DMatrix<f64>) -> Self {
        SearchBasis {
            generator,
            layout: None,
        }
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn layout(&self) -> Option<&BasisLayout> {
        self.layout.as_ref()
    }

    /// Lattice rank (number of generator columns).
    pub fn dim(&self) -> usize {
        self.generator.ncols()
    }

    pub fn norm_sq(&self, coords: &[i64]) -> f64 {
        let x = nalgebra::DVector::from_iterator(coords.len(), coords.iter().map(|&c| c as f64));
        (&self.generator * x).norm_squared()
    }

    /// `√det(Φ̄ᵀΦ̄)`, which equals `|det Φ̄|` for a square generator.
    pub fn volume(&self) -> f64 {
        let g = self.generator.transpose() * &self.generator;
        g.determinant().max(0.0).sqrt()
    }

    /// Minkowski's bound `√k · vol^{1/k}` on the first successive minimum.
    pub fn minkowski_bound(&self) -> f64 {
        let k = self.dim() as f64;
        k.sqrt() * self.volume().powf(1.0 / k)
    }

    fn check_rank(&self) -> Result<Gso, SvpError> {
        if self.dim() == 0 || self.generator.nrows() < self.dim() {
            return Err(SvpError::RankDeficient);
        }
        let gso = Gso::new(&self.generator);
        if gso.is_degenerate(RANK_TOLERANCE) {
            return Err(SvpError::RankDeficient);
        }
        Ok(gso)
    }
}

/// Sign normalisation: first nonzero entry positive.
pub fn normalize_sign(v: &mut [i64]) {
    if v.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        v.iter_mut().for_each(|c| *c = -*c);
    }
}

fn within_tie(norm: f64, best: f64) -> bool {
    norm <= best * (1.0 + TIE_TOLERANCE) + f64::MIN_POSITIVE
}

/// Picks the deterministic representative among near-minimal vectors.
fn pick_tie_break(basis: &SearchBasis, candidates: Vec<Vec<i64>>) -> (Vec<i64>, f64) {
    let scored: Vec<(Vec<i64>, f64)> = candidates
        .into_iter()
        .map(|mut c| {
            normalize_sign(&mut c);
            let n = basis.norm_sq(&c);
            (c, n)
        })
        .collect();
    let best = scored.iter().map(|(_, n)| *n).fold(f64::INFINITY, f64::min);
    scored
        .into_iter()
        .filter(|(_, n)| within_tie(*n, best))
        .min_by(|a, b| a.0.cmp(&b.0))
        .expect("at least one candidate")
}

fn apply_transform(u: &DMatrix<i64>, x: &[i64]) -> Vec<i64> {
    (0..u.nrows())
        .map(|r| (0..u.ncols()).map(|c| u[(r, c)] * x[c]).sum())
        .collect()
}

/// Exact shortest nonzero vector of the lattice spanned by the basis.
pub fn shortest_vector(basis: &SearchBasis) -> Result<SvpResult, SvpError> {
    basis.check_rank()?;
    let (reduced, u) = lll(basis.generator(), LLL_DELTA);
    let gso = Gso::new(&reduced);
    if gso.is_degenerate(RANK_TOLERANCE) {
        return Err(SvpError::RankDeficient);
    }
    let k = basis.dim();
    let zeros = vec![0.0; k];
    let shortest_column = (0..k)
        .map(|c| reduced.column(c).norm_squared())
        .fold(f64::INFINITY, f64::min);

    // Pass 1: shrink the radius down to λ₁².
    let mut best = shortest_column;
    let mut nodes = enumerate(&gso, &zeros, shortest_column * (1.0 + TIE_TOLERANCE), true, |_, d| {
        best = best.min(d);
        best * (1.0 + TIE_TOLERANCE)
    });

    // Pass 2: collect every vector tied with the minimum.
    let mut ties = Vec::new();
    nodes += enumerate(&gso, &zeros, best * (1.0 + 2.0 * TIE_TOLERANCE), true, |x, _| {
        ties.push(apply_transform(&u, x));
        best * (1.0 + 2.0 * TIE_TOLERANCE)
    });
    let (coords, norm_sq) = pick_tie_break(basis, ties);
    Ok(SvpResult {
        coords,
        norm_sq,
        node_count: nodes,
    })
}

/// Exhaustive minimum over the box `‖ã‖∞ ≤ bound`, excluding zero.
pub fn brute_force_shortest(basis: &SearchBasis, bound: i64) -> Result<SvpResult, SvpError> {
    if bound < 1 {
        return Err(SvpError::EmptyDomain);
    }
    let k = basis.dim();
    let points = ((2 * bound + 1) as f64).powi(k as i32);
    if points > BRUTE_FORCE_LIMIT {
        return Err(SvpError::TooLarge { points });
    }
    let side = (2 * bound + 1) as u64;
    let total = side.pow(k as u32);
    let decode = |mut idx: u64| -> Vec<i64> {
        (0..k)
            .map(|_| {
                let c = (idx % side) as i64 - bound;
                idx /= side;
                c
            })
            .collect()
    };
    let mut best = f64::INFINITY;
    for idx in 0..total {
        let x = decode(idx);
        if x.iter().all(|&c| c == 0) {
            continue;
        }
        best = best.min(basis.norm_sq(&x));
    }
    let ties: Vec<Vec<i64>> = (0..total)
        .map(decode)
        .filter(|x| x.iter().any(|&c| c != 0) && within_tie(basis.norm_sq(x), best))
        .collect();
    let (coords, norm_sq) = pick_tie_break(basis, ties);
    Ok(SvpResult {
        coords,
        norm_sq,
        node_count: total,
    })
}

fn candidate_from_coords(
    ring: &CoefficientRing,
    ch: &BlockFadingChannel,
    coords: &[i64],
) -> Result<EquationCandidate, SvpError> {
    let rank = ring.rank();
    let a: Vec<_> = coords.chunks(rank).map(|c| ring.element(c)).collect();
    Ok(am_rate(ch, &a, ring)?)
}

/// Best equation over `O^L` for the AM decoder.
pub fn best_equation(
    ring: &CoefficientRing,
    ch: &BlockFadingChannel,
) -> Result<EquationCandidate, SvpError> {
    let basis = SearchBasis::build(ring, ch)?;
    let sv = shortest_vector(&basis)?;
    candidate_from_coords(ring, ch, &sv.coords)
}

/// Up to `count` equations whose coefficient vectors are linearly independent
/// over the field, picked greedily by norm among all vectors with
/// `‖Φ̄ã‖ ≤ slack · λ₁`.
pub fn best_equations(
    ring: &CoefficientRing,
    ch: &BlockFadingChannel,
    count: usize,
    slack: f64,
) -> Result<Vec<EquationCandidate>, SvpError> {
    assert!(slack >= 1.0, "slack must be at least 1");
    let basis = SearchBasis::build(ring, ch)?;
    let sv = shortest_vector(&basis)?;
    let (reduced, u) = lll(basis.generator(), LLL_DELTA);
    let gso = Gso::new(&reduced);
    let radius = sv.norm_sq * slack * slack * (1.0 + 2.0 * TIE_TOLERANCE);
    let mut found = Vec::new();
    enumerate(&gso, &vec![0.0; basis.dim()], radius, true, |x, _| {
        let mut c = apply_transform(&u, x);
        normalize_sign(&mut c);
        found.push(c);
        radius
    });
    found.sort();
    found.dedup();
    let mut scored: Vec<(f64, Vec<i64>)> = found.into_iter().map(|c| (basis.norm_sq(&c), c)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    // Independence over K is tested through the first real embedding, which is
    // injective on K, so minors vanish exactly when their images do.
    let rank_dim = ring.rank();
    let mut picked: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    for (_, c) in scored {
        if out.len() == count {
            break;
        }
        let image: Vec<f64> = c
            .chunks(rank_dim)
            .map(|chunk| ring.conjugate(ring.element(chunk), 0))
            .collect();
        let mut trial = picked.clone();
        trial.push(image);
        if real_rank(&trial) == trial.len() {
            picked = trial;
            out.push(candidate_from_coords(ring, ch, &c)?);
        }
    }
    Ok(out)
}

fn real_rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let scale = m.abs().max().max(1.0);
    m.svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-9 * scale)
        .count()
}
