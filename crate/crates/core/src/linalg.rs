//! Small dense linear algebra on row-major `Vec<Vec<f64>>` matrices.

use crate::error::{Error, Result};

pub type Matrix = Vec<Vec<f64>>;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Matrix> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        if a[i].len() != n {
            return Err(Error::Model("covariance matrix is not square".into()));
        }
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Model("covariance matrix is not positive definite".into()));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

pub fn is_symmetric(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    (0..n).all(|i| {
        a[i].len() == n
            && (0..i).all(|j| (a[i][j] - a[j][i]).abs() <= 1e-10 * (1.0 + a[i][j].abs().max(a[j][i].abs())))
    })
}

/// Solves `L L' x = b` given the Cholesky factor `L`.
pub fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    y
}

pub fn chol_inverse(l: &[Vec<f64>]) -> Matrix {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    inv
}

/// log det(L L').
pub fn chol_logdet(l: &[Vec<f64>]) -> f64 {
    2.0 * l.iter().enumerate().map(|(i, row)| row[i].ln()).sum::<f64>()
}

pub fn submatrix(a: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Matrix {
    rows.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect()
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Matrix {
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| (0..m).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Matrix {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `L L'` for a lower-triangular `L`.
pub fn outer_lower(l: &[Vec<f64>]) -> Matrix {
    let n = l.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|k| l[i][k] * l[j][k]).sum();
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> Matrix {
        vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, -0.2], vec![0.5, -0.2, 2.0]]
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = example();
        let l = cholesky(&a).unwrap();
        let back = outer_lower(&l);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn inverse_and_logdet() {
        let a = example();
        let l = cholesky(&a).unwrap();
        let inv = chol_inverse(&l);
        let prod = mat_mul(&a, &inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j] - e).abs() < 1e-13);
            }
        }
        let det = 4.0 * (3.0 * 2.0 - 0.04) - 1.0 * (2.0 + 0.1) + 0.5 * (-0.2 - 1.5);
        assert!((chol_logdet(&l) - f64::ln(det)).abs() < 1e-13);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }
}
