//! Cholesky factorization and symmetric positive-definite solves.
//!
//! The operator-editing solve applies `C^{-1}` (with `C = X X^T + ridge I`)
//! to several right-hand sides; everything here works on multiple columns at
//! once so those solves stay one factorization each.

use super::mat::Mat;
use crate::error::LinalgError;

/// Lower-triangular `l` with `a + ridge * I = l * l^T`.
///
/// `ridge` is added to the diagonal before factoring (pass `0.0` for a plain
/// factorization); it is reported back in the error if a pivot still fails.
pub fn cholesky(a: &Mat<f64>, ridge: f64) -> Result<Mat<f64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)] + ridge;
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, ridge });
        }
        let djj = diag.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// Solves `(a + ridge * I) x = b` for a symmetric positive (semi-)definite
/// `a`, where `b` may hold many right-hand-side columns.
pub fn solve_spd(a: &Mat<f64>, b: &Mat<f64>, ridge: f64) -> Result<Mat<f64>, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "solve_spd: matrix is {}x{} but rhs has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let l = cholesky(a, ridge)?;
    let n = a.rows();
    let k = b.cols();
    let mut x = b.clone();
    // Forward substitution  l y = b.
    for i in 0..n {
        for j in 0..i {
            let lij = l[(i, j)];
            if lij != 0.0 {
                for c in 0..k {
                    let yj = x[(j, c)];
                    x[(i, c)] -= lij * yj;
                }
            }
        }
        let inv = 1.0 / l[(i, i)];
        for c in 0..k {
            x[(i, c)] *= inv;
        }
    }
    // Back substitution  l^T x = y.
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            let lji = l[(j, i)];
            if lji != 0.0 {
                for c in 0..k {
                    let xj = x[(j, c)];
                    x[(i, c)] -= lji * xj;
                }
            }
        }
        let inv = 1.0 / l[(i, i)];
        for c in 0..k {
            x[(i, c)] *= inv;
        }
    }
    Ok(x)
}

/// Inverse of a symmetric positive-definite matrix (plus optional ridge).
pub fn inv_spd(a: &Mat<f64>, ridge: f64) -> Result<Mat<f64>, LinalgError> {
    solve_spd(a, &Mat::eye(a.rows()), ridge)
}
