//! Small dense linear algebra for the exact tabular oracles.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Solves `m x = b` for a square row-major matrix by Gaussian elimination
/// with partial pivoting.
pub fn solve(n: usize, m: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if m.len() != n * n || b.len() != n {
        return Err(crate::error::invalid!(
            "solve: expected {n}x{n} matrix and length-{n} rhs"
        ));
    }
    let mut a = m.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Ok(x)
}

/// `out = m v` for a row-major `rows x cols` matrix.
pub fn mat_vec(rows: usize, cols: usize, m: &[f64], v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// `out = a b` for row-major `n x k` and `k x m` matrices.
pub fn mat_mul(n: usize, k: usize, m: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    let mut out = alloc::vec![0.0; n * m];
    for i in 0..n {
        for j in 0..k {
            let aij = a[i * k + j];
            if aij == 0.0 {
                continue;
            }
            let row = &b[j * m..(j + 1) * m];
            for (o, bv) in out[i * m..(i + 1) * m].iter_mut().zip(row) {
                *o += aij * bv;
            }
        }
    }
    out
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}
