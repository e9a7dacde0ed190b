//! Floating-point LLL on the columns of a real basis matrix.

use nalgebra::DMatrix;

/// Gram–Schmidt data of a column basis `b_0, …, b_{k-1}`:
/// `b_i = b*_i + Σ_{j<i} mu[i][j] b*_j` and `r[i] = ‖b*_i‖²`.
#[derive(Debug, Clone)]
pub struct Gso {
    pub bstar: DMatrix<f64>,
    pub r: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
}

impl Gso {
    pub fn new(basis: &DMatrix<f64>) -> Self {
        let k = basis.ncols();
        let mut bstar = basis.clone();
        let mut r = vec![0.0; k];
        let mut mu = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..i {
                let m = if r[j] > 0.0 {
                    basis.column(i).dot(&bstar.column(j)) / r[j]
                } else {
                    0.0
                };
                mu[i][j] = m;
                let bj = bstar.column(j).clone_owned();
                let mut bi = bstar.column_mut(i);
                bi.axpy(-m, &bj, 1.0);
            }
            mu[i][i] = 1.0;
            r[i] = bstar.column(i).norm_squared();
        }
        Gso { bstar, r, mu }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// Coordinates `τ_i = ⟨t, b*_i⟩ / ‖b*_i‖²` of a target vector.
    pub fn project(&self, target: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let dot: f64 = self.bstar.column(i).iter().zip(target).map(|(a, b)| a * b).sum();
                dot / self.r[i]
            })
            .collect()
    }

    /// True if some Gram–Schmidt vector is negligible next to the longest one.
    pub fn is_degenerate(&self, rel_tol: f64) -> bool {
        let max = self.r.iter().cloned().fold(0.0, f64::max);
        max <= 0.0 || self.r.iter().any(|&x| !(x > rel_tol * max))
    }
}

fn sub_column_multiple<T>(m: &mut DMatrix<T>, target: usize, source: usize, q: T)
where
    T: nalgebra::Scalar + Copy + std::ops::Mul<Output = T> + std::ops::SubAssign,
{
    for row in 0..m.nrows() {
        let s = m[(row, source)];
        m[(row, target)] -= q * s;
    }
}

/// LLL-reduces the columns of `basis` with parameter `delta`.
///
/// Returns the reduced basis and the unimodular integer matrix `U` with
/// `reduced = basis · U`. The columns must be linearly independent.
pub fn lll(basis: &DMatrix<f64>, delta: f64) -> (DMatrix<f64>, DMatrix<i64>) {
    let k = basis.ncols();
    let mut b = basis.clone();
    let mut u = DMatrix::<i64>::identity(k, k);
    if k < 2 {
        return (b, u);
    }
    let mut gso = Gso::new(&b);
    let mut i = 1;
    let mut iterations = 0usize;
    while i < k {
        iterations += 1;
        assert!(iterations < 1_000_000, "LLL failed to converge");
        for j in (0..i).rev() {
            let q = gso.mu[i][j].round();
            if q != 0.0 {
                sub_column_multiple(&mut b, i, j, q);
                sub_column_multiple(&mut u, i, j, q as i64);
                for l in 0..j {
                    gso.mu[i][l] -= q * gso.mu[j][l];
                }
                gso.mu[i][j] -= q;
            }
        }
        let m = gso.mu[i][i - 1];
        if gso.r[i] >= (delta - m * m) * gso.r[i - 1] {
            i += 1;
        } else {
            b.swap_columns(i, i - 1);
            u.swap_columns(i, i - 1);
            gso = Gso::new(&b);
            i = (i - 1).max(1);
        }
    }
    (b, u)
}
