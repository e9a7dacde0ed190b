//! Hermite normal form of an integer generating set.

use nalgebra::DMatrix;

/// Reduces integer generators of a full-rank sublattice of `Z^m` to a basis in
/// Hermite normal form. The basis vectors are returned as columns of an
/// upper-triangular `m × m` matrix with positive diagonal and off-diagonal
/// entries reduced into `[0, diagonal)`.
///
/// Returns `None` if the generators do not span a rank-`m` lattice.
pub fn hermite_basis(generators: &[Vec<i64>], m: usize) -> Option<DMatrix<i64>> {
    let mut rows: Vec<Vec<i128>> = generators
        .iter()
        .map(|g| {
            assert_eq!(g.len(), m);
            g.iter().map(|&x| x as i128).collect()
        })
        .collect();
    // Row echelon form with gcd pivots, column by column from the right so
    // the result is upper triangular when read as columns.
    let mut pivot_rows: Vec<Vec<i128>> = Vec::with_capacity(m);
    for c in (0..m).rev() {
        loop {
            let Some(min_idx) = rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r[c] != 0)
                .min_by_key(|(_, r)| r[c].abs())
                .map(|(i, _)| i)
            else {
                break;
            };
            let pivot = rows[min_idx].clone();
            let mut done = true;
            for (i, r) in rows.iter_mut().enumerate() {
                if i != min_idx && r[c] != 0 {
                    let q = r[c].div_euclid(pivot[c]);
                    for (x, &y) in r.iter_mut().zip(&pivot) {
                        *x -= q * y;
                    }
                    if r[c] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                let mut p = rows.swap_remove(min_idx);
                if p[c] < 0 {
                    p.iter_mut().for_each(|x| *x = -*x);
                }
                pivot_rows.push(p);
                break;
            }
        }
        if pivot_rows.len() != m - c {
            return None;
        }
        // Every remaining row has zero in column c and beyond.
        rows.retain(|r| r.iter().any(|&x| x != 0));
    }
    // pivot_rows[k] has its pivot at column m-1-k; order by pivot column.
    pivot_rows.reverse();
    for k in 0..m {
        for c in (0..k).rev() {
            let d = pivot_rows[c][c];
            let q = pivot_rows[k][c].div_euclid(d);
            if q != 0 {
                let pc = pivot_rows[c].clone();
                for (x, y) in pivot_rows[k].iter_mut().zip(pc) {
                    *x -= q * y;
                }
            }
        }
    }
    let mut out = DMatrix::<i64>::zeros(m, m);
    for (k, r) in pivot_rows.iter().enumerate() {
        for i in 0..m {
            out[(i, k)] = i64::try_from(r[i]).ok()?;
        }
    }
    Some(out)
}
