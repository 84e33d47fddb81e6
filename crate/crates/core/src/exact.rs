//! Exact integer and rational linear algebra for small incidence systems.

use num_rational::Ratio;

pub type Rational = Ratio<i128>;

/// Fraction-free (Bareiss) elimination. Returns the rank and, for square
/// full-rank input, the determinant up to the sign of row swaps.
fn bareiss(matrix: &[Vec<i64>]) -> (usize, i128) {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    let mut a: Vec<Vec<i128>> =
        matrix.iter().map(|r| r.iter().map(|&v| i128::from(v)).collect()).collect();
    let mut rank = 0;
    let mut prev = 1i128;
    let mut sign = 1i128;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        if pivot != rank {
            a.swap(pivot, rank);
            sign = -sign;
        }
        for r in rank + 1..rows {
            for c in col + 1..cols {
                // exact division (Sylvester's identity)
                a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev;
            }
            a[r][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
    }
    let det = if rank == rows && rows == cols && rows > 0 { sign * prev } else { 0 };
    (rank, det)
}

pub fn rank(matrix: &[Vec<i64>]) -> usize {
    bareiss(matrix).0
}

/// Determinant of a square integer matrix.
pub fn determinant(matrix: &[Vec<i64>]) -> i128 {
    assert!(matrix.iter().all(|r| r.len() == matrix.len()), "determinant of non-square matrix");
    if matrix.is_empty() {
        return 1;
    }
    bareiss(matrix).1
}

/// Solve a square nonsingular system `A x = b` over the rationals.
/// Returns `None` if `A` is singular.
#[cfg(test)]
pub fn solve_rational(a: &[Vec<i64>], b: &[i64]) -> Option<Vec<Rational>> {
    let rhs: Vec<Vec<i64>> = b.iter().map(|&v| vec![v]).collect();
    solve_rational_multi(a, &rhs).map(|x| x.into_iter().map(|row| row[0]).collect())
}

/// Solve `A X = B` for a square nonsingular `A` and several right-hand
/// sides (the columns of `B`) by Gauss-Jordan elimination over the rationals.
pub fn solve_rational_multi(a: &[Vec<i64>], b: &[Vec<i64>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let width = n + b.first().map_or(0, Vec::len);
    let zero = Rational::from_integer(0);
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| row.iter().chain(rhs).map(|&v| Rational::from_integer(v.into())).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| m[r][col] != zero)?;
        m.swap(pivot, col);
        let p = m[col][col];
        for c in col..width {
            m[col][c] /= p;
        }
        for r in 0..n {
            if r != col && m[r][col] != zero {
                let factor = m[r][col];
                for c in col..width {
                    let delta = factor * m[col][c];
                    m[r][c] -= delta;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Integer matrix-vector product.
pub fn mul_vec(a: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    a.iter().map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}
