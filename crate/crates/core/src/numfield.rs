//! Real quadratic number fields `Q(√d)` and their rings of integers.
//!
//! Elements of `O_K` are kept as exact integer coordinates over the integral
//! basis `{1, θ}`, where `θ = (1+√d)/2` if `d ≡ 1 (mod 4)` and `θ = √d`
//! otherwise. The only floating-point object that leaves this module is the
//! embedding matrix `Φ(j, i) = σ_j(φ_i)`, which is all the lattice and search
//! code needs.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::gf::{Gf, ResidueField};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumFieldError {
    #[error("d = {0} is not squarefree")]
    NotSquarefree(i64),
    #[error("d = {0} is out of range (need d >= 2)")]
    OutOfRange(i64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {p} ramifies in the field of discriminant {disc}")]
    Ramified { p: u64, disc: i64 },
    #[error("integer overflow in ring arithmetic")]
    Overflow,
    #[error("a degree-{degree} ring cannot be embedded into {blocks} fading blocks")]
    BlockMismatch { degree: usize, blocks: usize },
}

/// Element `u + v·θ` of the ring of integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct RingElement {
    pub u: i64,
    pub v: i64,
}

impl RingElement {
    pub const ZERO: RingElement = RingElement { u: 0, v: 0 };
    pub const ONE: RingElement = RingElement { u: 1, v: 0 };

    pub const fn new(u: i64, v: i64) -> Self {
        RingElement { u, v }
    }

    /// A rational integer, i.e. an element of `Z ⊂ O_K`.
    pub const fn integer(u: i64) -> Self {
        RingElement { u, v: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.u == 0 && self.v == 0
    }

    pub fn checked_add(self, rhs: Self) -> Option<Self> {
        Some(RingElement {
            u: self.u.checked_add(rhs.u)?,
            v: self.v.checked_add(rhs.v)?,
        })
    }

    pub fn checked_sub(self, rhs: Self) -> Option<Self> {
        Some(RingElement {
            u: self.u.checked_sub(rhs.u)?,
            v: self.v.checked_sub(rhs.v)?,
        })
    }

    pub fn checked_scale(self, k: i64) -> Option<Self> {
        Some(RingElement {
            u: self.u.checked_mul(k)?,
            v: self.v.checked_mul(k)?,
        })
    }
}

impl Add for RingElement {
    type Output = RingElement;
    fn add(self, rhs: Self) -> Self {
        self.checked_add(rhs).expect("ring element addition overflowed")
    }
}

impl Sub for RingElement {
    type Output = RingElement;
    fn sub(self, rhs: Self) -> Self {
        self.checked_sub(rhs).expect("ring element subtraction overflowed")
    }
}

impl Neg for RingElement {
    type Output = RingElement;
    fn neg(self) -> Self {
        RingElement::new(-self.u, -self.v)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.u, self.v) {
            (u, 0) => write!(f, "{u}"),
            (0, 1) => write!(f, "θ"),
            (0, -1) => write!(f, "-θ"),
            (0, v) => write!(f, "{v}θ"),
            (u, 1) => write!(f, "{u}+θ"),
            (u, -1) => write!(f, "{u}-θ"),
            (u, v) if v < 0 => write!(f, "{u}{v}θ"),
            (u, v) => write!(f, "{u}+{v}θ"),
        }
    }
}

/// Conjugates, algebraic norm and trace of a ring element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embedding {
    pub conjugates: [f64; 2],
    pub norm: i128,
    pub trace: i128,
}

/// The real quadratic field `Q(√d)` together with its integral basis `{1, θ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumberField {
    d: i64,
    /// `θ² = s·θ + t`.
    s: i64,
    t: i64,
    theta: [f64; 2],
    discriminant: i64,
}

fn is_squarefree(d: i64) -> bool {
    let mut k = 2i64;
    while k * k <= d {
        if d % (k * k) == 0 {
            return false;
        }
        k += 1;
    }
    true
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2u64;
    while k * k <= p {
        if p % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

impl NumberField {
    /// Builds `Q(√d)` for a squarefree `d ≥ 2`.
    pub fn quadratic(d: i64) -> Result<Self, NumFieldError> {
        if d < 2 {
            return Err(NumFieldError::OutOfRange(d));
        }
        if !is_squarefree(d) {
            return Err(NumFieldError::NotSquarefree(d));
        }
        let root = (d as f64).sqrt();
        let (s, t, theta, discriminant) = if d % 4 == 1 {
            (1, (d - 1) / 4, [(1.0 + root) / 2.0, (1.0 - root) / 2.0], d)
        } else {
            (0, d, [root, -root], 4 * d)
        };
        Ok(NumberField {
            d,
            s,
            t,
            theta,
            discriminant,
        })
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn degree(&self) -> usize {
        2
    }

    pub fn discriminant(&self) -> i64 {
        self.discriminant
    }

    /// `(s, t)` with `θ² = s·θ + t`.
    pub fn mult_rule(&self) -> (i64, i64) {
        (self.s, self.t)
    }

    /// `(σ₁(θ), σ₂(θ))`, ordered so that `σ₁(θ) > σ₂(θ)`.
    pub fn theta_conjugates(&self) -> [f64; 2] {
        self.theta
    }

    /// `Φ(j, i) = σ_j(φ_i)` for the basis `φ₁ = 1`, `φ₂ = θ`.
    pub fn embedding_matrix(&self) -> [[f64; 2]; 2] {
        [[1.0, self.theta[0]], [1.0, self.theta[1]]]
    }

    /// Human-readable name of the ring of integers.
    pub fn ring_name(&self) -> String {
        if self.s == 1 {
            format!("Z[(1+√{})/2]", self.d)
        } else {
            format!("Z[√{}]", self.d)
        }
    }

    /// Human-readable integral basis.
    pub fn basis_display(&self) -> String {
        if self.s == 1 {
            format!("{{1, (1+√{})/2}}", self.d)
        } else {
            format!("{{1, √{}}}", self.d)
        }
    }

    pub fn conjugate(&self, a: RingElement, j: usize) -> f64 {
        a.u as f64 + a.v as f64 * self.theta[j]
    }

    /// Exact algebraic norm `u² + s·uv − t·v²`.
    pub fn norm(&self, a: RingElement) -> i128 {
        let (u, v) = (a.u as i128, a.v as i128);
        u * u + self.s as i128 * u * v - self.t as i128 * v * v
    }

    pub fn trace(&self, a: RingElement) -> i128 {
        2 * a.u as i128 + self.s as i128 * a.v as i128
    }

    pub fn embed(&self, a: RingElement) -> Embedding {
        let conjugates = [self.conjugate(a, 0), self.conjugate(a, 1)];
        let norm = self.norm(a);
        debug_assert!(
            (conjugates[0] * conjugates[1] - norm as f64).abs()
                <= 1e-6 * (1.0 + conjugates[0].abs() * conjugates[1].abs()),
            "float norm disagrees with exact norm"
        );
        Embedding {
            conjugates,
            norm,
            trace: self.trace(a),
        }
    }

    /// Exact product using `θ² = sθ + t`; overflow is reported, never wrapped.
    pub fn mul(&self, a: RingElement, b: RingElement) -> Result<RingElement, NumFieldError> {
        let (a0, a1, b0, b1) = (a.u as i128, a.v as i128, b.u as i128, b.v as i128);
        let vv = a1 * b1;
        let u = a0 * b0 + vv * self.t as i128;
        let v = a0 * b1 + a1 * b0 + vv * self.s as i128;
        let u = i64::try_from(u).map_err(|_| NumFieldError::Overflow)?;
        let v = i64::try_from(v).map_err(|_| NumFieldError::Overflow)?;
        Ok(RingElement { u, v })
    }

    /// Picks a prime ideal above the rational prime `p`.
    ///
    /// Split primes yield `𝔭 = (p, θ − c)` with `c` the smallest root of
    /// `x² − sx − t` in `[0, p)`; inert primes yield `𝔭 = pO_K`.
    pub fn prime_above(&self, p: u64) -> Result<PrimeIdeal, NumFieldError> {
        if !is_prime(p) {
            return Err(NumFieldError::NotPrime(p));
        }
        if self.discriminant as u64 % p == 0 {
            return Err(NumFieldError::Ramified {
                p,
                disc: self.discriminant,
            });
        }
        let pi = p as i128;
        let s = (self.s as i128).rem_euclid(pi);
        let t = (self.t as i128).rem_euclid(pi);
        let root = (0..pi)
            .find(|&c| (c * c - s * c - t).rem_euclid(pi) == 0)
            .map(|c| c as u64);
        Ok(PrimeIdeal {
            field: *self,
            p,
            root,
        })
    }
}

/// A prime ideal `𝔭` above an unramified rational prime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimeIdeal {
    field: NumberField,
    p: u64,
    /// `Some(c)` for `𝔭 = (p, θ − c)` (split), `None` for `𝔭 = pO_K` (inert).
    root: Option<u64>,
}

impl PrimeIdeal {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn field(&self) -> &NumberField {
        &self.field
    }

    pub fn root(&self) -> Option<u64> {
        self.root
    }

    pub fn inertial_degree(&self) -> u32 {
        if self.root.is_some() {
            1
        } else {
            2
        }
    }

    /// `O_K/𝔭 ≅ F_{p^r}`.
    pub fn residue_field(&self) -> ResidueField {
        let (s, t) = self.field.mult_rule();
        ResidueField::new(self.p, self.inertial_degree(), s, t)
    }

    /// Reduction `O_K → O_K/𝔭 ≅ F_{p^r}`.
    pub fn reduce(&self, a: RingElement) -> Gf {
        let p = self.p as i128;
        match self.root {
            Some(c) => {
                let r = (a.u as i128 + c as i128 * a.v as i128).rem_euclid(p);
                Gf::new(r as u64, 0)
            }
            None => Gf::new(
                (a.u as i128).rem_euclid(p) as u64,
                (a.v as i128).rem_euclid(p) as u64,
            ),
        }
    }

    /// Coset leader of a residue: coordinates in `[0, p)`.
    pub fn lift(&self, x: Gf) -> RingElement {
        RingElement::new(x.c0 as i64, x.c1 as i64)
    }

    /// Explicit ideal membership test, independent of [`PrimeIdeal::reduce`].
    pub fn contains(&self, a: RingElement) -> bool {
        let p = self.p as i128;
        match self.root {
            Some(c) => (a.u as i128 + c as i128 * a.v as i128) % p == 0,
            None => (a.u as i128) % p == 0 && (a.v as i128) % p == 0,
        }
    }

    /// A Z-basis of `𝔭` viewed inside `O_K ≅ Z²`.
    pub fn z_basis(&self) -> [RingElement; 2] {
        let p = self.p as i64;
        match self.root {
            Some(c) => [RingElement::new(p, 0), RingElement::new(-(c as i64), 1)],
            None => [RingElement::new(p, 0), RingElement::new(0, p)],
        }
    }
}

/// Coefficient ring used for equation search: either the rational integers
/// (the same coefficient seen in every block) or `O_K` of a real quadratic
/// field (block `j` sees the `j`-th conjugate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientRing {
    Integers,
    Quadratic(NumberField),
}

impl CoefficientRing {
    pub fn quadratic(d: i64) -> Result<Self, NumFieldError> {
        NumberField::quadratic(d).map(CoefficientRing::Quadratic)
    }

    /// Rank of the ring as a Z-module.
    pub fn rank(&self) -> usize {
        match self {
            CoefficientRing::Integers => 1,
            CoefficientRing::Quadratic(_) => 2,
        }
    }

    pub fn discriminant(&self) -> i64 {
        match self {
            CoefficientRing::Integers => 1,
            CoefficientRing::Quadratic(f) => f.discriminant(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            CoefficientRing::Integers => "Z".to_string(),
            CoefficientRing::Quadratic(f) => f.ring_name(),
        }
    }

    pub fn check_blocks(&self, blocks: usize) -> Result<(), NumFieldError> {
        match self {
            CoefficientRing::Quadratic(f) if blocks != f.degree() => {
                Err(NumFieldError::BlockMismatch {
                    degree: f.degree(),
                    blocks,
                })
            }
            _ => Ok(()),
        }
    }

    /// Value of `a` seen by fading block `j`.
    pub fn conjugate(&self, a: RingElement, j: usize) -> f64 {
        match self {
            CoefficientRing::Integers => {
                debug_assert_eq!(a.v, 0, "integer coefficient with a θ component");
                a.u as f64
            }
            CoefficientRing::Quadratic(f) => f.conjugate(a, j),
        }
    }

    /// The `blocks × rank` generator matrix of the ring under the block embedding.
    pub fn embedding_matrix(&self, blocks: usize) -> Result<DMatrix<f64>, NumFieldError> {
        self.check_blocks(blocks)?;
        Ok(match self {
            CoefficientRing::Integers => DMatrix::from_element(blocks, 1, 1.0),
            CoefficientRing::Quadratic(f) => {
                let phi = f.embedding_matrix();
                DMatrix::from_fn(2, 2, |j, i| phi[j][i])
            }
        })
    }

    /// Reassembles a ring element from its Z-coordinates.
    pub fn element(&self, coords: &[i64]) -> RingElement {
        match self {
            CoefficientRing::Integers => RingElement::integer(coords[0]),
            CoefficientRing::Quadratic(_) => RingElement::new(coords[0], coords[1]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(d: i64) -> NumberField {
        NumberField::quadratic(d).unwrap()
    }

    #[test]
    fn golden_field_basis() {
        let k = f(5);
        assert_eq!(k.discriminant(), 5);
        assert_eq!(k.mult_rule(), (1, 1));
        let th = k.theta_conjugates();
        assert!((th[0] - 1.618_033_988_749_895).abs() < 1e-15);
        assert!((th[1] + 0.618_033_988_749_895).abs() < 1e-15);
    }

    #[test]
    fn sqrt3_discriminant() {
        let k = f(3);
        assert_eq!(k.discriminant(), 12);
        assert_eq!(k.mult_rule(), (0, 3));
        let phi = k.embedding_matrix();
        let det = phi[0][0] * phi[1][1] - phi[0][1] * phi[1][0];
        assert!((det * det - 12.0).abs() < 1e-12 * 12.0);
    }

    #[test]
    fn rejects_bad_d() {
        assert_eq!(NumberField::quadratic(4), Err(NumFieldError::NotSquarefree(4)));
        assert_eq!(NumberField::quadratic(12), Err(NumFieldError::NotSquarefree(12)));
        assert_eq!(NumberField::quadratic(1), Err(NumFieldError::OutOfRange(1)));
        assert_eq!(NumberField::quadratic(-3), Err(NumFieldError::OutOfRange(-3)));
    }

    #[test]
    fn embed_examples() {
        let k = f(5);
        let e = k.embed(RingElement::new(0, 1));
        assert!((e.conjugates[0] - 1.618_033_988_749_895).abs() < 1e-12);
        assert!((e.conjugates[1] + 0.618_033_988_749_895).abs() < 1e-12);
        assert_eq!((e.norm, e.trace), (-1, 1));
        let one = k.embed(RingElement::ONE);
        assert_eq!(one.conjugates, [1.0, 1.0]);
        assert_eq!((one.norm, one.trace), (1, 2));
        assert_eq!(k.embed(RingElement::new(2, -1)).norm, 1);
    }

    #[test]
    fn mul_examples() {
        let theta = RingElement::new(0, 1);
        assert_eq!(f(5).mul(theta, theta).unwrap(), RingElement::new(1, 1));
        assert_eq!(f(3).mul(theta, theta).unwrap(), RingElement::new(3, 0));
        let x = RingElement::new(-7, 4);
        assert_eq!(f(7).mul(RingElement::ONE, x).unwrap(), x);
    }

    #[test]
    fn mul_overflow_is_reported() {
        let big = RingElement::new(i64::MAX / 2, 3);
        assert_eq!(f(5).mul(big, big), Err(NumFieldError::Overflow));
    }

    #[test]
    fn prime_above_examples() {
        let k = f(5);
        let p11 = k.prime_above(11).unwrap();
        assert_eq!((p11.inertial_degree(), p11.root()), (1, Some(4)));
        let p2 = k.prime_above(2).unwrap();
        assert_eq!((p2.inertial_degree(), p2.root()), (2, None));
        assert!(matches!(k.prime_above(5), Err(NumFieldError::Ramified { p: 5, .. })));
        assert_eq!(k.prime_above(9), Err(NumFieldError::NotPrime(9)));
        // Z[√3]: 2 | 12.
        assert!(matches!(f(3).prime_above(2), Err(NumFieldError::Ramified { .. })));
    }

    #[test]
    fn reduce_examples() {
        let p = f(5).prime_above(11).unwrap();
        assert_eq!(p.reduce(RingElement::new(0, 1)), Gf::new(4, 0));
        assert_eq!(p.reduce(RingElement::new(11, 0)), Gf::new(0, 0));
        assert_eq!(p.reduce(RingElement::new(1, 7)), Gf::new(7, 0));
        assert_eq!(p.reduce(RingElement::new(-1, 0)), Gf::new(10, 0));
    }

    #[test]
    fn ideal_basis_lies_in_ideal() {
        for d in [2, 3, 5, 6, 7] {
            let k = f(d);
            for p in [3u64, 7, 11, 13] {
                let Ok(pi) = k.prime_above(p) else { continue };
                for b in pi.z_basis() {
                    assert!(pi.contains(b));
                    assert!(pi.reduce(b).is_zero());
                }
            }
        }
    }

    #[test]
    fn integers_ring_embedding() {
        let z = CoefficientRing::Integers;
        let m = z.embedding_matrix(3).unwrap();
        assert_eq!(m.shape(), (3, 1));
        assert!(m.iter().all(|&x| x == 1.0));
        let q = CoefficientRing::quadratic(5).unwrap();
        assert!(q.embedding_matrix(3).is_err());
        assert_eq!(q.name(), "Z[(1+√5)/2]");
        assert_eq!(CoefficientRing::quadratic(7).unwrap().name(), "Z[√7]");
    }

    #[test]
    fn display() {
        assert_eq!(RingElement::new(2, -1).to_string(), "2-θ");
        assert_eq!(RingElement::new(0, 3).to_string(), "3θ");
        assert_eq!(RingElement::new(-4, 0).to_string(), "-4");
    }
}
