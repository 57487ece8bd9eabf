//! Matrix exponential by scaling-and-squaring with a fixed-order Taylor core.
//!
//! The forward pass keeps every intermediate needed for an exact reverse-mode
//! gradient ([`ExpmTrace::backward`]), which is how the Koopman operator
//! `K = exp(G / k)^k` is trained end to end.

use super::mat::{Mat, Scalar};
use crate::error::LinalgError;

/// Taylor order of the core polynomial.
const ORDER: usize = 10;
/// Scale the argument until its 1-norm is at or below this threshold. With an
/// order-10 Taylor core this keeps the truncation error near 1e-11.
const THETA: f64 = 0.5;

/// Saved intermediates of one `exp` evaluation.
///
/// Memory: `ORDER + squarings + 2` matrices of the argument's size.
pub struct ExpmTrace<T: Scalar> {
    squarings: usize,
    /// `x = a / 2^squarings`.
    scaled: Mat<T>,
    /// Horner partials `p_N, p_{N-1}, ..., p_1` in evaluation order.
    horner: Vec<Mat<T>>,
    /// Pre-squaring values `y_0 .. y_{s-1}` where `y_{i+1} = y_i^2`.
    squares: Vec<Mat<T>>,
    result: Mat<T>,
}

impl<T: Scalar> ExpmTrace<T> {
    /// Evaluates `exp(a)` and records the trace.
    pub fn forward(a: &Mat<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if !a.all_finite() {
            return Err(LinalgError::NonFinite {
                op: "matrix exponential input",
            });
        }
        let n = a.rows();
        let norm = a.norm_one();
        let squarings = if norm <= THETA {
            0
        } else {
            (norm / THETA).log2().ceil() as usize
        };
        let scale = T::from_f64(0.5f64.powi(squarings as i32));
        let scaled = a.scale(scale);

        // Horner: p_N = c_N I; p_k = x p_{k+1} + c_k I.
        let mut coeff = vec![0.0f64; ORDER + 1];
        coeff[0] = 1.0;
        for k in 1..=ORDER {
            coeff[k] = coeff[k - 1] / k as f64;
        }
        let mut horner = Vec::with_capacity(ORDER);
        let mut p = Mat::zeros(n, n);
        for i in 0..n {
            p[(i, i)] = T::from_f64(coeff[ORDER]);
        }
        for k in (0..ORDER).rev() {
            horner.push(p.clone());
            let mut next = Mat::zeros(n, n);
            scaled.gemm_into(false, &p, false, T::ONE, T::ZERO, &mut next);
            let ck = T::from_f64(coeff[k]);
            for i in 0..n {
                next[(i, i)] += ck;
            }
            p = next;
        }

        let mut squares = Vec::with_capacity(squarings);
        let mut y = p;
        for _ in 0..squarings {
            squares.push(y.clone());
            let mut sq = Mat::zeros(n, n);
            y.gemm_into(false, &y, false, T::ONE, T::ZERO, &mut sq);
            y = sq;
        }
        if !y.all_finite() {
            return Err(LinalgError::NonFinite {
                op: "matrix exponential result",
            });
        }
        Ok(Self {
            squarings,
            scaled,
            horner,
            squares,
            result: y,
        })
    }

    pub fn result(&self) -> &Mat<T> {
        &self.result
    }

    /// Reverse-mode gradient: given `d(loss)/d(exp(a))`, returns
    /// `d(loss)/d(a)`.
    pub fn backward(&self, grad_out: &Mat<T>) -> Mat<T> {
        let n = self.scaled.rows();
        assert_eq!(grad_out.shape(), (n, n), "expm backward shape mismatch");
        let mut g = grad_out.clone();
        // Through the squarings, last first: y' = y^2 gives
        // dy = g y^T + y^T g.
        let mut tmp = Mat::zeros(n, n);
        for y in self.squares.iter().rev() {
            g.gemm_into(false, y, true, T::ONE, T::ZERO, &mut tmp);
            y.gemm_into(true, &g, false, T::ONE, T::ONE, &mut tmp);
            std::mem::swap(&mut g, &mut tmp);
        }
        // Through the Horner recurrence p_k = x p_{k+1} + c_k I:
        // dx += g p_{k+1}^T, then g <- x^T g. The stack was pushed p_N .. p_1,
        // so iterate it reversed to visit p_1 (k = 0) first.
        let mut dx = Mat::zeros(n, n);
        for p_next in self.horner.iter().rev() {
            g.gemm_into(false, p_next, true, T::ONE, T::ONE, &mut dx);
            self.scaled
                .gemm_into(true, &g, false, T::ONE, T::ZERO, &mut tmp);
            std::mem::swap(&mut g, &mut tmp);
        }
        // Undo the input scaling x = a / 2^s.
        dx.scale(T::from_f64(0.5f64.powi(self.squarings as i32)))
    }
}

/// `exp(a)` without keeping the gradient trace.
pub fn matrix_exp<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>, LinalgError> {
    Ok(ExpmTrace::forward(a)?.result)
}
