//! Desk-scale Construction A lattice codes over `O_K/𝔭`.
//!
//! A nested pair of linear codes `C_c ⊆ C_f ⊆ F_q^T` (`q = p^r`) is lifted to
//! `O_K^T` and tiled by `𝔭^T`, giving the fine and coarse `O_K`-lattices
//! `Λ_f = M(C_f) + 𝔭^T` and `Λ_c = M(C_c) + 𝔭^T`. Points are transmitted
//! through the canonical embedding scaled by `γ`, as an `n × T` matrix whose
//! row `j` holds the `j`-th conjugates.
//!
//! Shaping uses a centred fundamental parallelepiped of the (LLL-reduced)
//! coarse lattice rather than its Voronoi cell, and `γ` is calibrated so that
//! the parallelepiped's second moment per real dimension equals the target
//! power. Decoding is exact nearest-point search over the fine lattice.

pub mod hnf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cfchan::{BlockFadingChannel, EquationCandidate};
use crate::gf::{Gf, ResidueField};
use crate::numfield::{NumFieldError, NumberField, PrimeIdeal, RingElement};
use crate::rng;
use crate::svp::{enumerate, lll, Gso, LLL_DELTA};

/// Largest number of fine coset leaders `q^{l_f}` accepted for exact decoding.
pub const MAX_COSET_LEADERS: u64 = 4096;
/// Absolute tolerance on O_K coordinates when pulling real points back.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;
const SHAPING_SAMPLES: usize = 100_000;
const SHAPING_SEED: u64 = 0x5EED_0F5A;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fine generator matrix does not have full column rank")]
    RankDeficientCode,
    #[error("{cosets} coset leaders exceed the desk-scale limit of {limit}")]
    TooManyCosets { cosets: u64, limit: u64 },
    #[error("no fine-lattice point outside the coarse lattice lies within the radius")]
    RadiusTooSmall,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Ring(#[from] NumFieldError),
}

/// Linear codes `C_c ⊆ C_f` over `F_q`; `G_c` is the first `l_c` columns of `G_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCodePair {
    field: ResidueField,
    length: usize,
    /// Columns of `G_f`, each of length `T`.
    columns: Vec<Vec<Gf>>,
    coarse_dim: usize,
}

impl NestedCodePair {
    pub fn new(
        field: ResidueField,
        columns: Vec<Vec<Gf>>,
        coarse_dim: usize,
    ) -> Result<Self, CodecError> {
        let length = columns.first().map_or(0, Vec::len);
        if length == 0 {
            return Err(CodecError::DimensionMismatch("empty generator".into()));
        }
        if columns.iter().any(|c| c.len() != length) {
            return Err(CodecError::DimensionMismatch("ragged generator columns".into()));
        }
        if columns.len() > length || coarse_dim > columns.len() {
            return Err(CodecError::DimensionMismatch(format!(
                "need l_c <= l_f <= T, got l_c={coarse_dim}, l_f={}, T={length}",
                columns.len()
            )));
        }
        if field.rank(&columns) != columns.len() {
            return Err(CodecError::RankDeficientCode);
        }
        Ok(NestedCodePair {
            field,
            length,
            columns,
            coarse_dim,
        })
    }

    /// Reed–Solomon generator `G_f(i, k) = α_i^k` with `α_i` the `(i+1)`-th
    /// field element; needs `T < q`.
    pub fn reed_solomon(
        field: ResidueField,
        length: usize,
        fine_dim: usize,
        coarse_dim: usize,
    ) -> Result<Self, CodecError> {
        if length as u64 >= field.order() {
            return Err(CodecError::InvalidParameter(format!(
                "Reed-Solomon length {length} needs more than {} field elements",
                field.order()
            )));
        }
        let columns = (0..fine_dim)
            .map(|k| {
                (0..length)
                    .map(|i| field.pow(field.from_index(i as u64 + 1), k as u64))
                    .collect()
            })
            .collect();
        Self::new(field, columns, coarse_dim)
    }

    pub fn field(&self) -> &ResidueField {
        &self.field
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn fine_dim(&self) -> usize {
        self.columns.len()
    }

    pub fn coarse_dim(&self) -> usize {
        self.coarse_dim
    }

    /// `l_f − l_c`.
    pub fn message_dim(&self) -> usize {
        self.fine_dim() - self.coarse_dim
    }

    pub fn fine_columns(&self) -> &[Vec<Gf>] {
        &self.columns
    }

    pub fn coarse_columns(&self) -> &[Vec<Gf>] {
        &self.columns[..self.coarse_dim]
    }

    /// Codeword of `C_f` carrying message `w ∈ F_q^{l_f − l_c}`.
    pub fn encode(&self, w: &[Gf]) -> Vec<Gf> {
        assert_eq!(w.len(), self.message_dim());
        self.field.combine_columns(&self.columns[self.coarse_dim..], w)
    }

    pub fn contains_fine(&self, c: &[Gf]) -> bool {
        self.field.solve(&self.columns, c).is_some()
    }

    pub fn contains_coarse(&self, c: &[Gf]) -> bool {
        if self.coarse_dim == 0 {
            c.iter().all(Gf::is_zero)
        } else {
            self.field.solve(self.coarse_columns(), c).is_some()
        }
    }

    /// Message label of the coset `c + C_c`, or `None` if `c ∉ C_f`.
    pub fn message_of(&self, c: &[Gf]) -> Option<Vec<Gf>> {
        self.field
            .solve(&self.columns, c)
            .map(|x| x[self.coarse_dim..].to_vec())
    }

    /// All `q^{l_f}` codewords of `C_f`, in mixed-radix order of their coefficients.
    pub fn codewords(&self) -> Vec<Vec<Gf>> {
        let q = self.field.order();
        let total = q.pow(self.fine_dim() as u32);
        (0..total)
            .map(|mut idx| {
                let coeffs: Vec<Gf> = (0..self.fine_dim())
                    .map(|_| {
                        let e = self.field.from_index(idx % q);
                        idx /= q;
                        e
                    })
                    .collect();
                self.field.combine_columns(&self.columns, &coeffs)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Fine,
    Coarse,
}

/// Per-block effective noise variances `ν²_eff,j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveNoiseSpec {
    pub nu_sq: Vec<f64>,
}

impl EffectiveNoiseSpec {
    pub fn new(nu_sq: Vec<f64>) -> Result<Self, CodecError> {
        if nu_sq.iter().any(|v| !(*v >= 0.0)) {
            return Err(CodecError::InvalidParameter("negative noise variance".into()));
        }
        Ok(EffectiveNoiseSpec { nu_sq })
    }

    pub fn from_candidate(c: &EquationCandidate) -> Self {
        EffectiveNoiseSpec {
            nu_sq: c.nu_sq.clone(),
        }
    }

    pub fn total(&self) -> f64 {
        self.nu_sq.iter().sum()
    }
}

/// One user's transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    /// Lattice point in O_K coordinates, reduced into the shaping region.
    pub point: Vec<RingElement>,
    /// `γσ(point)`, an `n × T` matrix.
    pub codeword: DMatrix<f64>,
    /// What goes on the air: the codeword, or `[codeword − dither] mod γΛ_c`.
    pub transmitted: DMatrix<f64>,
    pub dither: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedEquation {
    /// Residue vector of the nearest fine-lattice point (an element of `C_f`).
    pub codeword: Vec<Gf>,
    /// Its label in the message space, i.e. the coset modulo `C_c`.
    pub message: Vec<Gf>,
}

/// A fine-lattice point found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct FinePoint {
    pub coords: Vec<RingElement>,
    /// `γσ(x)` flattened block by block (length `nT`).
    pub embedded: Vec<f64>,
    pub in_coarse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnionBound {
    /// Partial sum over the enumerated fine-not-coarse points.
    pub value: f64,
    pub terms: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub dither: bool,
    /// Standard deviation of the receiver noise; 1 for the nominal channel.
    pub noise_std: f64,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimConfig {
            trials,
            seed,
            dither: true,
            noise_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    pub errors: u64,
    pub trials: u64,
    pub error_rate: f64,
    pub stderr: f64,
}

/// Block-wise product distance `Π_j Σ_{i ∈ block j} x(i)²` of a vector laid
/// out as `n` consecutive blocks of length `T`.
pub fn product_distance(x: &[f64], n: usize, t: usize) -> f64 {
    assert_eq!(x.len(), n * t, "vector length must be n·T");
    x.chunks(t).map(|blk| blk.iter().map(|v| v * v).sum::<f64>()).product()
}

fn to_f64(m: &DMatrix<i64>) -> DMatrix<f64> {
    m.map(|x| x as f64)
}

fn mat_mul_i64(a: &DMatrix<i64>, b: &DMatrix<i64>) -> DMatrix<i64> {
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        (0..a.ncols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
    })
}

/// Lattice `γσ(𝔭)` of one coordinate, prepared for closest-point search.
#[derive(Debug, Clone)]
struct IdealCvp {
    gso: Gso,
}

impl IdealCvp {
    fn min_dist_sq(&self, target: &[f64]) -> f64 {
        let tau = self.gso.project(target);
        let mut best = f64::INFINITY;
        enumerate(&self.gso, &tau, f64::INFINITY, false, |_, d| {
            best = best.min(d);
            best
        });
        best
    }
}

/// Fine/coarse Construction A lattice pair with its embedding and scaling.
#[derive(Debug, Clone)]
pub struct ConstructionALattice {
    field: NumberField,
    prime: PrimeIdeal,
    codes: NestedCodePair,
    target_power: f64,
    gamma: f64,
    second_moment_unscaled: f64,
    /// `nT × 2T` map from O_K coordinates `(u_1, v_1, …, u_T, v_T)` to the
    /// block-major embedding.
    embed: DMatrix<f64>,
    fine_int: DMatrix<i64>,
    coarse_int: DMatrix<i64>,
    /// LLL-reduced fine basis (integer and embedded, unscaled).
    fine_red_int: DMatrix<i64>,
    fine_gso: Gso,
    /// LLL-reduced coarse basis spanning the shaping parallelepiped.
    shaping_int: DMatrix<i64>,
    shaping_emb: DMatrix<f64>,
    shaping_inv: DMatrix<f64>,
    ideal: IdealCvp,
    /// `σ(lift(k))` for every residue index `k`.
    residue_offsets: Vec<[f64; 2]>,
    codewords: Vec<Vec<Gf>>,
}

impl ConstructionALattice {
    pub fn build(
        field: &NumberField,
        prime: &PrimeIdeal,
        codes: NestedCodePair,
        target_power: f64,
    ) -> Result<Self, CodecError> {
        if prime.field() != field {
            return Err(CodecError::DimensionMismatch("prime ideal belongs to another field".into()));
        }
        let residue = prime.residue_field();
        if codes.field() != &residue {
            return Err(CodecError::DimensionMismatch(format!(
                "codes are over F_{}^{} but O_K/𝔭 is F_{}^{}",
                codes.field().p(),
                codes.field().degree(),
                residue.p(),
                residue.degree()
            )));
        }
        if !(target_power > 0.0 && target_power.is_finite()) {
            return Err(CodecError::InvalidParameter(format!("power {target_power}")));
        }
        let q = residue.order();
        let cosets = (q as f64).powi(codes.fine_dim() as i32);
        if cosets > MAX_COSET_LEADERS as f64 {
            return Err(CodecError::TooManyCosets {
                cosets: cosets as u64,
                limit: MAX_COSET_LEADERS,
            });
        }

        let t = codes.length();
        let n = field.degree();
        let m = 2 * t;
        let z_basis = |cols: &[Vec<Gf>]| -> Result<DMatrix<i64>, CodecError> {
            let mut gens = Vec::new();
            for col in cols {
                for beta in residue.prime_basis() {
                    let mut g = vec![0i64; m];
                    for (i, &x) in col.iter().enumerate() {
                        let e = prime.lift(residue.mul(beta, x));
                        g[2 * i] = e.u;
                        g[2 * i + 1] = e.v;
                    }
                    gens.push(g);
                }
            }
            for i in 0..t {
                for b in prime.z_basis() {
                    let mut g = vec![0i64; m];
                    g[2 * i] = b.u;
                    g[2 * i + 1] = b.v;
                    gens.push(g);
                }
            }
            hnf::hermite_basis(&gens, m).ok_or(CodecError::RankDeficientCode)
        };
        let fine_int = z_basis(codes.fine_columns())?;
        let coarse_int = z_basis(codes.coarse_columns())?;

        let phi = field.embedding_matrix();
        let mut embed = DMatrix::zeros(n * t, m);
        for j in 0..n {
            for i in 0..t {
                embed[(j * t + i, 2 * i)] = phi[j][0];
                embed[(j * t + i, 2 * i + 1)] = phi[j][1];
            }
        }

        let (fine_red, fine_u) = lll(&(&embed * to_f64(&fine_int)), LLL_DELTA);
        let fine_red_int = mat_mul_i64(&fine_int, &fine_u);
        let fine_gso = Gso::new(&fine_red);

        let (shaping_emb, coarse_u) = lll(&(&embed * to_f64(&coarse_int)), LLL_DELTA);
        let shaping_int = mat_mul_i64(&coarse_int, &coarse_u);
        let shaping_inv = shaping_emb
            .clone()
            .try_inverse()
            .ok_or(CodecError::RankDeficientCode)?;

        let mut rng = ChaCha8Rng::seed_from_u64(SHAPING_SEED);
        let mut acc = 0.0;
        let mut alpha = DVector::zeros(m);
        for _ in 0..SHAPING_SAMPLES {
            alpha.iter_mut().for_each(|a| *a = rng.gen::<f64>() - 0.5);
            acc += (&shaping_emb * &alpha).norm_squared();
        }
        let second_moment_unscaled = acc / (SHAPING_SAMPLES * n * t) as f64;
        let gamma = (target_power / second_moment_unscaled).sqrt();

        let ideal_basis = DMatrix::from_fn(2, 2, |j, k| field.conjugate(prime.z_basis()[k], j));
        let (ideal_red, _) = lll(&ideal_basis, LLL_DELTA);
        let residue_offsets = residue
            .elements()
            .map(|x| {
                let e = prime.lift(x);
                [field.conjugate(e, 0), field.conjugate(e, 1)]
            })
            .collect();

        let codewords = codes.codewords();
        Ok(ConstructionALattice {
            field: *field,
            prime: *prime,
            codes,
            target_power,
            gamma,
            second_moment_unscaled,
            embed,
            fine_int,
            coarse_int,
            fine_red_int,
            fine_gso,
            shaping_int,
            shaping_emb,
            shaping_inv,
            ideal: IdealCvp {
                gso: Gso::new(&ideal_red),
            },
            residue_offsets,
            codewords,
        })
    }

    pub fn field(&self) -> &NumberField {
        &self.field
    }

    pub fn prime(&self) -> &PrimeIdeal {
        &self.prime
    }

    pub fn codes(&self) -> &NestedCodePair {
        &self.codes
    }

    pub fn residue_field(&self) -> &ResidueField {
        self.codes.field()
    }

    pub fn blocks(&self) -> usize {
        self.field.degree()
    }

    pub fn length(&self) -> usize {
        self.codes.length()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn target_power(&self) -> f64 {
        self.target_power
    }

    /// Monte Carlo second moment per real dimension of the scaled shaping region.
    pub fn second_moment(&self) -> f64 {
        self.gamma * self.gamma * self.second_moment_unscaled
    }

    /// Closed form `γ² tr(SᵀS) / (12 nT)` of the same quantity.
    pub fn second_moment_exact(&self) -> f64 {
        let dims = (self.blocks() * self.length()) as f64;
        self.gamma * self.gamma * self.shaping_emb.norm_squared() / (12.0 * dims)
    }

    /// `((l_f − l_c) r / T) · log₂ p` bits per channel-matrix use.
    pub fn message_rate_bits(&self) -> f64 {
        let r = self.prime.inertial_degree() as f64;
        self.codes.message_dim() as f64 * r / self.length() as f64 * (self.prime.p() as f64).log2()
    }

    /// Integer Z-basis (columns, in O_K coordinates) of `Λ_f` or `Λ_c`.
    pub fn z_basis(&self, which: Which) -> &DMatrix<i64> {
        match which {
            Which::Fine => &self.fine_int,
            Which::Coarse => &self.coarse_int,
        }
    }

    /// Embedded (unscaled, `γ = 1`) generator matrix of `Λ^Z_f` or `Λ^Z_c`.
    pub fn embedded_basis(&self, which: Which) -> DMatrix<f64> {
        &self.embed * to_f64(self.z_basis(which))
    }

    /// Volume at `γ = 1` from the Gram determinant of the embedded basis.
    pub fn volume(&self, which: Which) -> f64 {
        let b = self.embedded_basis(which);
        (b.transpose() * &b).determinant().sqrt()
    }

    /// `p^{(T − l) r} Δ_K^{T/2}` for `l = l_f` or `l_c`.
    pub fn volume_formula(&self, which: Which) -> f64 {
        let l = match which {
            Which::Fine => self.codes.fine_dim(),
            Which::Coarse => self.codes.coarse_dim(),
        };
        let r = self.prime.inertial_degree() as i32;
        let t = self.length() as i32;
        (self.prime.p() as f64).powi((t - l as i32) * r)
            * (self.field.discriminant() as f64).powf(t as f64 / 2.0)
    }

    /// Lifted coset leaders `M(C_f)`, coordinates in `[0, p)`.
    pub fn coset_leaders(&self) -> Vec<Vec<RingElement>> {
        self.codewords
            .iter()
            .map(|c| c.iter().map(|&x| self.prime.lift(x)).collect())
            .collect()
    }

    fn coords_of(point: &[RingElement]) -> DVector<f64> {
        DVector::from_iterator(
            2 * point.len(),
            point.iter().flat_map(|e| [e.u as f64, e.v as f64]),
        )
    }

    /// `γσ(point)` as an `n × T` matrix.
    pub fn embed_point(&self, point: &[RingElement]) -> DMatrix<f64> {
        let t = self.length();
        assert_eq!(point.len(), t);
        DMatrix::from_fn(self.blocks(), t, |j, i| {
            self.gamma * self.field.conjugate(point[i], j)
        })
    }

    /// Row-major (block-major) flattening of an `n × T` matrix.
    pub fn flatten(x: &DMatrix<f64>) -> Vec<f64> {
        x.transpose().iter().copied().collect()
    }

    fn unflatten(&self, v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.blocks(), self.length(), v.as_slice())
    }

    /// Maps a real `n × T` matrix back to O_K coordinates, if it is (up to
    /// [`INTEGRALITY_TOLERANCE`]) the scaled embedding of an integral point.
    pub fn pull_back(&self, x: &DMatrix<f64>) -> Option<Vec<RingElement>> {
        if x.shape() != (self.blocks(), self.length()) {
            return None;
        }
        let [th1, th2] = self.field.theta_conjugates();
        (0..self.length())
            .map(|i| {
                let y0 = x[(0, i)] / self.gamma;
                let y1 = x[(1, i)] / self.gamma;
                let v = (y0 - y1) / (th1 - th2);
                let u = y0 - v * th1;
                let (ur, vr) = (u.round(), v.round());
                let ok = (u - ur).abs() <= INTEGRALITY_TOLERANCE
                    && (v - vr).abs() <= INTEGRALITY_TOLERANCE
                    && ur.abs() < 9.0e15
                    && vr.abs() < 9.0e15;
                ok.then(|| RingElement::new(ur as i64, vr as i64))
            })
            .collect()
    }

    pub fn residues(&self, point: &[RingElement]) -> Vec<Gf> {
        point.iter().map(|&e| self.prime.reduce(e)).collect()
    }

    /// Reduces an integral point into the centred shaping parallelepiped;
    /// the result differs from the input by a coarse-lattice vector.
    pub fn reduce_point(&self, point: &[RingElement]) -> Vec<RingElement> {
        let z = Self::coords_of(point);
        let alpha = &self.shaping_inv * (&self.embed * &z);
        let k: Vec<i64> = alpha.iter().map(|a| a.round() as i64).collect();
        (0..point.len())
            .map(|i| {
                let mut e = point[i];
                for (c, &kc) in k.iter().enumerate() {
                    e.u -= self.shaping_int[(2 * i, c)] * kc;
                    e.v -= self.shaping_int[(2 * i + 1, c)] * kc;
                }
                e
            })
            .collect()
    }

    /// `x mod γΛ_c` into the centred shaping parallelepiped, for real `x`.
    pub fn reduce_real(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let v = DVector::from_vec(Self::flatten(x)) / self.gamma;
        let alpha = &self.shaping_inv * &v;
        let k = alpha.map(f64::round);
        let reduced = (v - &self.shaping_emb * k) * self.gamma;
        self.unflatten(&reduced)
    }

    /// Encodes a message `w ∈ F_q^{l_f − l_c}`; with an RNG, adds a uniform
    /// dither over the shaping region.
    pub fn encode<R: Rng + ?Sized>(&self, w: &[Gf], dither: Option<&mut R>) -> Transmission {
        let c = self.codes.encode(w);
        let lifted: Vec<RingElement> = c.iter().map(|&x| self.prime.lift(x)).collect();
        let point = self.reduce_point(&lifted);
        let codeword = self.embed_point(&point);
        match dither {
            None => Transmission {
                point,
                transmitted: codeword.clone(),
                codeword,
                dither: None,
            },
            Some(rng) => {
                let alpha = DVector::from_iterator(
                    self.shaping_emb.ncols(),
                    (0..self.shaping_emb.ncols()).map(|_| rng.gen::<f64>() - 0.5),
                );
                let d = self.unflatten(&(&self.shaping_emb * alpha * self.gamma));
                let transmitted = self.reduce_real(&(&codeword - &d));
                Transmission {
                    point,
                    codeword,
                    transmitted,
                    dither: Some(d),
                }
            }
        }
    }

    /// `Σ_l A_l X_l` with `A_l = diag(σ_1(a_l), …, σ_n(a_l))`.
    pub fn ring_combine(&self, coeffs: &[RingElement], codewords: &[DMatrix<f64>]) -> DMatrix<f64> {
        assert_eq!(coeffs.len(), codewords.len());
        let mut out = DMatrix::zeros(self.blocks(), self.length());
        for (&a, x) in coeffs.iter().zip(codewords) {
            assert_eq!(x.shape(), out.shape());
            for j in 0..self.blocks() {
                let s = self.field.conjugate(a, j);
                for i in 0..self.length() {
                    out[(j, i)] += s * x[(j, i)];
                }
            }
        }
        out
    }

    pub fn is_member(&self, which: Which, x: &DMatrix<f64>) -> bool {
        let Some(point) = self.pull_back(x) else {
            return false;
        };
        let res = self.residues(&point);
        match which {
            Which::Fine => self.codes.contains_fine(&res),
            Which::Coarse => self.codes.contains_coarse(&res),
        }
    }

    /// Message-space label `g(·)` of a fine-lattice point.
    pub fn map_message(&self, x: &DMatrix<f64>) -> Option<Vec<Gf>> {
        let point = self.pull_back(x)?;
        self.codes.message_of(&self.residues(&point))
    }

    /// `Σ_l g(a_l) w_l`, the message an ideal relay forwards.
    pub fn equation_message(&self, coeffs: &[RingElement], messages: &[Vec<Gf>]) -> Vec<Gf> {
        let f = self.residue_field();
        let mut u = vec![f.zero(); self.codes.message_dim()];
        for (&a, w) in coeffs.iter().zip(messages) {
            let g = self.prime.reduce(a);
            for (ui, &wi) in u.iter_mut().zip(w) {
                *ui = f.add(*ui, f.mul(g, wi));
            }
        }
        u
    }

    /// Nearest fine-lattice point to `s`, reported by its residue codeword and
    /// the message label of its coset modulo the coarse lattice.
    pub fn quantize(&self, s: &DMatrix<f64>) -> DecodedEquation {
        let f = self.residue_field();
        let t = self.length();
        // dist[i][k]: squared distance from column i to the coset lift(k) + 𝔭.
        let dist: Vec<Vec<f64>> = (0..t)
            .map(|i| {
                let y = [s[(0, i)] / self.gamma, s[(1, i)] / self.gamma];
                self.residue_offsets
                    .iter()
                    .map(|o| self.ideal.min_dist_sq(&[y[0] - o[0], y[1] - o[1]]))
                    .collect()
            })
            .collect();
        let mut best = (f64::INFINITY, 0usize);
        for (idx, c) in self.codewords.iter().enumerate() {
            let d: f64 = c
                .iter()
                .enumerate()
                .map(|(i, &x)| dist[i][f.index(x) as usize])
                .sum();
            if d < best.0 {
                best = (d, idx);
            }
        }
        let codeword = self.codewords[best.1].clone();
        let message = self
            .codes
            .message_of(&codeword)
            .expect("codeword lies in C_f");
        DecodedEquation { codeword, message }
    }

    /// Relay decoding: `S = BY + Σ_l A_l D_l`, quantised to the fine lattice
    /// and reduced modulo the coarse lattice.
    pub fn decode_equation(
        &self,
        y: &DMatrix<f64>,
        candidate: &EquationCandidate,
        dithers: &[DMatrix<f64>],
    ) -> DecodedEquation {
        let mut s = y.clone();
        for (j, &b) in candidate.b.iter().enumerate() {
            s.row_mut(j).scale_mut(b);
        }
        if !dithers.is_empty() {
            s += self.ring_combine(&candidate.a, dithers);
        }
        self.quantize(&s)
    }

    /// All nonzero fine-lattice points with `‖γσ(x)‖ ≤ radius`.
    pub fn enumerate_fine_points(&self, radius: f64) -> Vec<FinePoint> {
        let r_sq = (radius / self.gamma).powi(2);
        let k = self.fine_gso.dim();
        let mut out = Vec::new();
        enumerate(&self.fine_gso, &vec![0.0; k], r_sq, true, |x, _| {
            let t = self.length();
            let coords: Vec<RingElement> = (0..t)
                .map(|i| {
                    let (mut u, mut v) = (0i64, 0i64);
                    for (c, &xc) in x.iter().enumerate() {
                        u += self.fine_red_int[(2 * i, c)] * xc;
                        v += self.fine_red_int[(2 * i + 1, c)] * xc;
                    }
                    RingElement::new(u, v)
                })
                .collect();
            let embedded = Self::flatten(&self.embed_point(&coords));
            let in_coarse = self.codes.contains_coarse(&self.residues(&coords));
            out.push(FinePoint {
                coords,
                embedded,
                in_coarse,
            });
            r_sq
        });
        out
    }

    /// Length of the shortest nonzero vector of `γΛ^Z_f`.
    pub fn shortest_fine_norm(&self) -> f64 {
        let k = self.fine_gso.dim();
        let mut best = f64::INFINITY;
        enumerate(&self.fine_gso, &vec![0.0; k], f64::INFINITY, true, |_, d| {
            best = best.min(d);
            best
        });
        self.gamma * best.sqrt()
    }

    fn union_term(&self, embedded: &[f64], total_noise: f64) -> f64 {
        let n = self.blocks() as f64;
        let d = product_distance(embedded, self.blocks(), self.length());
        0.5 * (-n * d.powf(1.0 / n) / (8.0 * total_noise)).exp()
    }

    /// Truncated union bound on the decoding error probability: the sum of
    /// `½ exp(−n d_{n,T}(γx)^{1/n} / (8 Σ_j ν²_j))` over fine-not-coarse
    /// points with `‖γx‖ ≤ radius`.
    pub fn union_bound(&self, noise: &EffectiveNoiseSpec, radius: f64) -> Result<UnionBound, CodecError> {
        if !(radius > 0.0) {
            return Err(CodecError::InvalidParameter(format!("radius {radius}")));
        }
        assert_eq!(noise.nu_sq.len(), self.blocks());
        let total = noise.total();
        let mut value = 0.0;
        let mut terms = 0;
        for pt in self.enumerate_fine_points(radius) {
            if pt.in_coarse {
                continue;
            }
            terms += 1;
            value += self.union_term(&pt.embedded, total);
        }
        if terms == 0 {
            return Err(CodecError::RadiusTooSmall);
        }
        Ok(UnionBound {
            value,
            terms,
            radius,
        })
    }

    /// Union bound with the radius grown until at least `min_terms` terms enter.
    pub fn union_bound_min_terms(
        &self,
        noise: &EffectiveNoiseSpec,
        min_terms: usize,
    ) -> Result<UnionBound, CodecError> {
        let mut radius = self.shortest_fine_norm() * 1.5;
        loop {
            match self.union_bound(noise, radius) {
                Ok(ub) if ub.terms >= min_terms => return Ok(ub),
                Ok(_) | Err(CodecError::RadiusTooSmall) => radius *= 1.25,
                Err(e) => return Err(e),
            }
        }
    }

    /// Monte Carlo frame error rate of equation decoding for a fixed channel
    /// and coefficient vector. Each trial draws fresh messages, dithers and
    /// noise from its own substream, so the result depends only on the seed.
    pub fn simulate(
        &self,
        ch: &BlockFadingChannel,
        candidate: &EquationCandidate,
        cfg: &SimConfig,
    ) -> Result<SimOutcome, CodecError> {
        if cfg.trials == 0 {
            return Err(CodecError::InvalidParameter("trials must be at least 1".into()));
        }
        if ch.blocks() != self.blocks() || candidate.b.len() != self.blocks() {
            return Err(CodecError::DimensionMismatch("channel blocks vs field degree".into()));
        }
        if candidate.a.len() != ch.users() {
            return Err(CodecError::DimensionMismatch("coefficients vs users".into()));
        }
        let errors: u64 = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| u64::from(!self.run_trial(ch, candidate, cfg, trial)))
            .sum();
        let trials = cfg.trials;
        let rate = errors as f64 / trials as f64;
        Ok(SimOutcome {
            errors,
            trials,
            error_rate: rate,
            stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
        })
    }

    /// One transmission; returns true if the relay recovers `Σ g(a_l) w_l`.
    fn run_trial(
        &self,
        ch: &BlockFadingChannel,
        candidate: &EquationCandidate,
        cfg: &SimConfig,
        trial: u64,
    ) -> bool {
        let mut rng = rng::substream(cfg.seed, trial);
        let f = self.residue_field();
        let (n, t) = (self.blocks(), self.length());
        let mut messages = Vec::with_capacity(ch.users());
        let mut y = DMatrix::zeros(n, t);
        let mut dithers = Vec::new();
        for l in 0..ch.users() {
            let w: Vec<Gf> = (0..self.codes.message_dim())
                .map(|_| f.from_index(rng.gen_range(0..f.order())))
                .collect();
            let tx = if cfg.dither {
                self.encode(&w, Some(&mut rng))
            } else {
                self.encode::<ChaCha8Rng>(&w, None)
            };
            for j in 0..n {
                let h = ch.gains(j)[l];
                for i in 0..t {
                    y[(j, i)] += h * tx.transmitted[(j, i)];
                }
            }
            dithers.extend(tx.dither);
            messages.push(w);
        }
        let noise = rng::standard_normal_vec(&mut rng, n * t);
        for (yv, z) in y.iter_mut().zip(noise) {
            *yv += cfg.noise_std * z;
        }
        let decoded = self.decode_equation(&y, candidate, &dithers);
        decoded.message == self.equation_message(&candidate.a, &messages)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_11(power: f64) -> ConstructionALattice {
        let k = NumberField::quadratic(5).unwrap();
        let p = k.prime_above(11).unwrap();
        let codes = NestedCodePair::reed_solomon(p.residue_field(), 2, 1, 0).unwrap();
        ConstructionALattice::build(&k, &p, codes, power).unwrap()
    }

    #[test]
    fn reed_solomon_first_column_is_all_ones() {
        let f = ResidueField::prime_field(11);
        let codes = NestedCodePair::reed_solomon(f, 2, 1, 0).unwrap();
        assert_eq!(codes.fine_columns(), &[vec![Gf::new(1, 0), Gf::new(1, 0)]]);
        assert!(NestedCodePair::reed_solomon(f, 11, 1, 0).is_err());
    }

    #[test]
    fn code_pair_validation() {
        let f = ResidueField::prime_field(7);
        let g = |k| Gf::new(k, 0);
        assert_eq!(
            NestedCodePair::new(f, vec![vec![g(1), g(2)], vec![g(2), g(4)]], 0),
            Err(CodecError::RankDeficientCode)
        );
        assert!(matches!(
            NestedCodePair::new(f, vec![vec![g(1), g(2)]], 2),
            Err(CodecError::DimensionMismatch(_))
        ));
        let codes = NestedCodePair::reed_solomon(f, 3, 2, 1).unwrap();
        for c in codes.coarse_columns() {
            assert!(codes.contains_fine(c));
        }
        assert_eq!(codes.codewords().len(), 49);
    }

    #[test]
    fn volumes_and_rate_of_build_example() {
        let lat = golden_11(100.0);
        assert!((lat.volume(Which::Fine) - 55.0).abs() < 1e-6 * 55.0);
        assert!((lat.volume_formula(Which::Fine) - 55.0).abs() < 1e-12);
        assert!((lat.volume(Which::Coarse) - 605.0).abs() < 1e-6 * 605.0);
        assert!((lat.message_rate_bits() - 0.5 * 11f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_when_codes_coincide() {
        let k = NumberField::quadratic(5).unwrap();
        let p = k.prime_above(11).unwrap();
        let codes = NestedCodePair::reed_solomon(p.residue_field(), 2, 1, 1).unwrap();
        let lat = ConstructionALattice::build(&k, &p, codes, 10.0).unwrap();
        assert_eq!(lat.message_rate_bits(), 0.0);
    }

    #[test]
    fn gamma_meets_power() {
        let lat = golden_11(1000.0);
        assert!((lat.second_moment() - 1000.0).abs() < 1e-9 * 1000.0);
        let exact = lat.second_moment_exact();
        assert!((exact - 1000.0).abs() < 0.02 * 1000.0, "exact second moment {exact}");
    }

    #[test]
    fn encode_zero_message_is_origin() {
        let lat = golden_11(100.0);
        let f = *lat.residue_field();
        let tx = lat.encode::<ChaCha8Rng>(&[f.zero()], None);
        assert!(tx.codeword.iter().all(|&x| x == 0.0));
        assert!(tx.point.iter().all(RingElement::is_zero));
    }

    #[test]
    fn encode_membership_and_roundtrip() {
        let lat = golden_11(100.0);
        let f = *lat.residue_field();
        for w in f.elements() {
            let tx = lat.encode::<ChaCha8Rng>(&[w], None);
            assert!(lat.is_member(Which::Fine, &tx.codeword));
            assert_eq!(lat.is_member(Which::Coarse, &tx.codeword), w.is_zero());
            assert_eq!(lat.map_message(&tx.codeword), Some(vec![w]));
            let mut bumped = tx.codeword.clone();
            bumped[(0, 0)] += 0.3;
            assert!(!lat.is_member(Which::Fine, &bumped));
        }
        let zero = DMatrix::zeros(2, 2);
        assert!(lat.is_member(Which::Fine, &zero) && lat.is_member(Which::Coarse, &zero));
    }

    #[test]
    fn dithered_transmission_stays_in_the_coset() {
        let lat = golden_11(100.0);
        let f = *lat.residue_field();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..11 {
            let w = [f.from_index(k)];
            let tx = lat.encode(&w, Some(&mut rng));
            let d = tx.dither.as_ref().unwrap();
            // X̄ + D ≡ X (mod γΛ_c)
            let diff = &tx.transmitted + d - &tx.codeword;
            assert!(lat.is_member(Which::Coarse, &diff));
        }
    }

    #[test]
    fn product_distance_examples() {
        assert_eq!(product_distance(&[1.0; 6], 2, 3), 9.0);
        assert_eq!(product_distance(&[0.0; 4], 2, 2), 0.0);
        let k = NumberField::quadratic(5).unwrap();
        let [t1, t2] = k.theta_conjugates();
        for t in 1..5usize {
            let mut x = vec![t1; t];
            x.extend(vec![t2; t]);
            let d = product_distance(&x, 2, t);
            assert!((d - (t * t) as f64).abs() < 1e-12 * (t * t) as f64);
        }
    }

    #[test]
    fn noiseless_matched_decoding_recovers_equation() {
        let lat = golden_11(1000.0);
        let k = *lat.field();
        let f = *lat.residue_field();
        let a = [RingElement::new(1, 1), RingElement::new(-2, 1)];
        // h_j = σ_j(a) with b_j = 1 makes BY = Σ A_l X_l exactly.
        let h: Vec<Vec<f64>> = (0..2).map(|j| a.iter().map(|&x| k.conjugate(x, j)).collect()).collect();
        let ch = BlockFadingChannel::new(h, 1000.0).unwrap();
        let mut cand = crate::cfchan::am_rate(&ch, &a, &crate::numfield::CoefficientRing::Quadratic(k)).unwrap();
        cand.b = vec![1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50u64 {
            let ws = [vec![f.from_index(trial % 11)], vec![f.from_index((3 * trial + 5) % 11)]];
            let txs: Vec<_> = ws.iter().map(|w| lat.encode(w, Some(&mut rng))).collect();
            let y = lat.ring_combine(&a, &txs.iter().map(|t| t.transmitted.clone()).collect::<Vec<_>>());
            let dithers: Vec<_> = txs.iter().map(|t| t.dither.clone().unwrap()).collect();
            let dec = lat.decode_equation(&y, &cand, &dithers);
            assert_eq!(dec.message, lat.equation_message(&a, &ws));
            let combined = lat.ring_combine(&a, &txs.iter().map(|t| t.codeword.clone()).collect::<Vec<_>>());
            assert_eq!(Some(dec.message.clone()), lat.map_message(&combined));
        }
    }

    #[test]
    fn zero_observation_decodes_to_zero_coset() {
        let lat = golden_11(100.0);
        let dec = lat.quantize(&DMatrix::zeros(2, 2));
        assert!(dec.message.iter().all(Gf::is_zero));
        assert!(dec.codeword.iter().all(Gf::is_zero));
    }

    #[test]
    fn union_bound_single_term_and_monotonicity() {
        let lat = golden_11(100.0);
        let shortest = lat.shortest_fine_norm();
        let noise = EffectiveNoiseSpec::new(vec![0.7, 1.3]).unwrap();
        // Shortest fine vectors are ±γσ((1,1)); the next ones are much longer.
        let pts = lat.enumerate_fine_points(shortest * 1.0001);
        assert_eq!(pts.len(), 2);
        let ub = lat.union_bound(&noise, shortest * 1.0001).unwrap();
        assert_eq!(ub.terms, 2);
        let g = lat.gamma();
        // d = (2γ²)(2γ²), n = 2: ½ exp(−2 · 2γ² / (8 · 2.0)) per vector.
        let term = 0.5 * (-2.0 * 2.0 * g * g / (8.0 * 2.0)).exp();
        assert!((ub.value - 2.0 * term).abs() <= 1e-12 * term.max(1e-300));

        let worse = EffectiveNoiseSpec::new(vec![0.7, 2.3]).unwrap();
        let r = shortest * 3.0;
        assert!(lat.union_bound(&worse, r).unwrap().value >= lat.union_bound(&noise, r).unwrap().value);
        let tiny = EffectiveNoiseSpec::new(vec![1e-9, 1e-9]).unwrap();
        assert!(lat.union_bound(&tiny, r).unwrap().value < 1e-300);
        assert_eq!(lat.union_bound(&noise, shortest * 0.5), Err(CodecError::RadiusTooSmall));
    }

    #[test]
    fn too_many_cosets_rejected() {
        let k = NumberField::quadratic(5).unwrap();
        let p = k.prime_above(11).unwrap();
        let codes = NestedCodePair::reed_solomon(p.residue_field(), 5, 4, 0).unwrap();
        assert!(matches!(
            ConstructionALattice::build(&k, &p, codes, 10.0),
            Err(CodecError::TooManyCosets { .. })
        ));
    }

    #[test]
    fn mismatched_residue_field_rejected() {
        let k = NumberField::quadratic(5).unwrap();
        let p = k.prime_above(11).unwrap();
        let codes = NestedCodePair::reed_solomon(ResidueField::prime_field(7), 2, 1, 0).unwrap();
        assert!(matches!(
            ConstructionALattice::build(&k, &p, codes, 10.0),
            Err(CodecError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inert_prime_volume() {
        // d = 5, p = 3 is inert: O_K/𝔭 = F_9.
        let k = NumberField::quadratic(5).unwrap();
        let p = k.prime_above(3).unwrap();
        assert_eq!(p.inertial_degree(), 2);
        let codes = NestedCodePair::reed_solomon(p.residue_field(), 3, 1, 0).unwrap();
        let lat = ConstructionALattice::build(&k, &p, codes, 10.0).unwrap();
        let expect = 3f64.powi(4) * 5f64.powf(1.5);
        assert!((lat.volume(Which::Fine) - expect).abs() < 1e-6 * expect);
        assert!((lat.volume_formula(Which::Fine) - expect).abs() < 1e-9 * expect);
    }
}
