//! Arithmetic in the residue fields `F_p` and `F_{p²} = F_p[x]/(x² − sx − t)`,
//! plus the little bit of linear algebra the codes need.

/// An element `c0 + c1·x` of `F_{p^r}` (`c1 = 0` when `r = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf {
    pub c0: u64,
    pub c1: u64,
}

impl Gf {
    pub const fn new(c0: u64, c1: u64) -> Self {
        Gf { c0, c1 }
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0 && self.c1 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidueField {
    p: u64,
    r: u32,
    s: u64,
    t: u64,
}

impl ResidueField {
    /// `F_{p^r}`; for `r = 2` the reduction polynomial is `x² − sx − t`, which
    /// the caller guarantees to be irreducible mod `p`.
    pub fn new(p: u64, r: u32, s: i64, t: i64) -> Self {
        assert!(r == 1 || r == 2, "only prime and quadratic residue fields");
        let pi = p as i64;
        ResidueField {
            p,
            r,
            s: s.rem_euclid(pi) as u64,
            t: t.rem_euclid(pi) as u64,
        }
    }

    pub fn prime_field(p: u64) -> Self {
        ResidueField::new(p, 1, 0, 0)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.r
    }

    pub fn order(&self) -> u64 {
        self.p.pow(self.r)
    }

    pub fn zero(&self) -> Gf {
        Gf::new(0, 0)
    }

    pub fn one(&self) -> Gf {
        Gf::new(1, 0)
    }

    /// Bijection `[0, q) → F_q`, `k ↦ (k mod p) + (k / p)·x`.
    pub fn from_index(&self, k: u64) -> Gf {
        debug_assert!(k < self.order());
        Gf::new(k % self.p, k / self.p)
    }

    pub fn index(&self, a: Gf) -> u64 {
        a.c0 + a.c1 * self.p
    }

    pub fn elements(&self) -> impl Iterator<Item = Gf> + '_ {
        (0..self.order()).map(move |k| self.from_index(k))
    }

    /// An F_p-basis of F_q.
    pub fn prime_basis(&self) -> Vec<Gf> {
        if self.r == 1 {
            vec![Gf::new(1, 0)]
        } else {
            vec![Gf::new(1, 0), Gf::new(0, 1)]
        }
    }

    pub fn add(&self, a: Gf, b: Gf) -> Gf {
        Gf::new((a.c0 + b.c0) % self.p, (a.c1 + b.c1) % self.p)
    }

    pub fn neg(&self, a: Gf) -> Gf {
        Gf::new((self.p - a.c0) % self.p, (self.p - a.c1) % self.p)
    }

    pub fn sub(&self, a: Gf, b: Gf) -> Gf {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Gf, b: Gf) -> Gf {
        let p = self.p as u128;
        let (a0, a1, b0, b1) = (a.c0 as u128, a.c1 as u128, b.c0 as u128, b.c1 as u128);
        let hi = a1 * b1 % p;
        let c0 = (a0 * b0 + hi * self.t as u128) % p;
        let c1 = (a0 * b1 + a1 * b0 + hi * self.s as u128) % p;
        Gf::new(c0 as u64, c1 as u64)
    }

    pub fn pow(&self, mut a: Gf, mut e: u64) -> Gf {
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: Gf) -> Option<Gf> {
        if a.is_zero() {
            None
        } else {
            Some(self.pow(a, self.order() - 2))
        }
    }

    pub fn dot(&self, a: &[Gf], b: &[Gf]) -> Gf {
        a.iter()
            .zip(b)
            .fold(self.zero(), |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }

    /// `G·w` for a column-major list of generator columns.
    pub fn combine_columns(&self, columns: &[Vec<Gf>], w: &[Gf]) -> Vec<Gf> {
        let len = columns.first().map_or(0, Vec::len);
        let mut out = vec![self.zero(); len];
        for (col, &wk) in columns.iter().zip(w) {
            for (o, &g) in out.iter_mut().zip(col) {
                *o = self.add(*o, self.mul(wk, g));
            }
        }
        out
    }

    /// Rank of the span of the given vectors.
    pub fn rank(&self, columns: &[Vec<Gf>]) -> usize {
        let rows = columns.first().map_or(0, Vec::len);
        // Work on the transpose: each column becomes a row.
        let mut m: Vec<Vec<Gf>> = columns.to_vec();
        let mut rank = 0;
        for c in 0..rows {
            let Some(piv) = (rank..m.len()).find(|&i| !m[i][c].is_zero()) else {
                continue;
            };
            m.swap(rank, piv);
            let inv = self.inv(m[rank][c]).unwrap();
            let pivot_row: Vec<Gf> = m[rank].iter().map(|&x| self.mul(x, inv)).collect();
            for (i, row) in m.iter_mut().enumerate() {
                if i != rank && !row[c].is_zero() {
                    let f = row[c];
                    for (x, &y) in row.iter_mut().zip(&pivot_row) {
                        *x = self.sub(*x, self.mul(f, y));
                    }
                }
            }
            m[rank] = pivot_row;
            rank += 1;
        }
        rank
    }

    /// Solves `G·w = target` for `G` given by its columns; `None` if `target`
    /// is outside the column span. With full column rank the solution is unique.
    pub fn solve(&self, columns: &[Vec<Gf>], target: &[Gf]) -> Option<Vec<Gf>> {
        let k = columns.len();
        let rows = target.len();
        // Augmented matrix, row-major: rows × (k + 1).
        let mut a: Vec<Vec<Gf>> = (0..rows)
            .map(|i| {
                let mut row: Vec<Gf> = columns.iter().map(|c| c[i]).collect();
                row.push(target[i]);
                row
            })
            .collect();
        let mut pivots = Vec::with_capacity(k);
        let mut r = 0;
        for c in 0..k {
            let Some(piv) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
                continue;
            };
            a.swap(r, piv);
            let inv = self.inv(a[r][c]).unwrap();
            for x in a[r].iter_mut() {
                *x = self.mul(*x, inv);
            }
            let pivot_row = a[r].clone();
            for (i, row) in a.iter_mut().enumerate() {
                if i != r && !row[c].is_zero() {
                    let f = row[c];
                    for (x, &y) in row.iter_mut().zip(&pivot_row) {
                        *x = self.sub(*x, self.mul(f, y));
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        if a[r..].iter().any(|row| !row[k].is_zero()) {
            return None;
        }
        let mut w = vec![self.zero(); k];
        for (i, &c) in pivots.iter().enumerate() {
            w[c] = a[i][k];
        }
        Some(w)
    }
}
