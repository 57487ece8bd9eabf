//! Singular value decomposition via one-sided Jacobi rotations.
//!
//! Tall matrices are first reduced with a Householder QR so the Jacobi sweeps
//! run on a square factor; this keeps the cost of decomposing an `n x d`
//! representation matrix (n in the tens of thousands) at one QR pass plus an
//! `O(d^3)`-per-sweep iteration.

use super::mat::Mat;
use crate::error::LinalgError;

/// Thin SVD `a = u * diag(s) * vt` with `s` sorted non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x p` with orthonormal columns, `p = min(m, n)`.
    pub u: Mat<f64>,
    /// Singular values, length `p`, non-increasing, all `>= 0`.
    pub s: Vec<f64>,
    /// `p x n` with orthonormal rows.
    pub vt: Mat<f64>,
}

const MAX_SWEEPS: usize = 60;
const JACOBI_TOL: f64 = 1e-15;
/// QR-reduce when the matrix has at least this many rows per column.
const QR_RATIO: usize = 2;

/// Computes the thin SVD of an arbitrary real matrix.
///
/// Wide inputs are handled by decomposing the transpose and swapping the
/// factors. Returns [`LinalgError::SvdNonConvergence`] if the Jacobi sweeps
/// fail to settle (which for well-scaled finite input practically never
/// happens) and [`LinalgError::NonFinite`] if the input contains NaN or Inf.
pub fn svd(a: &Mat<f64>) -> Result<Svd, LinalgError> {
    if !a.all_finite() {
        return Err(LinalgError::NonFinite { op: "svd input" });
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Err(LinalgError::DimensionMismatch(
            "svd of an empty matrix".into(),
        ));
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        });
    }
    if a.rows() >= QR_RATIO * a.cols() {
        // a = q r, r = u_r s vt  =>  a = (q u_r) s vt.
        let (q, r) = qr_thin(a);
        let inner = jacobi_svd(&r)?;
        return Ok(Svd {
            u: q.matmul(&inner.u),
            s: inner.s,
            vt: inner.vt,
        });
    }
    jacobi_svd(a)
}

/// One-sided Jacobi on `m x n`, `m >= n`: orthogonalizes the columns of a
/// working copy by right rotations accumulated into `v`.
fn jacobi_svd(a: &Mat<f64>) -> Result<Svd, LinalgError> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);
    // Column-major working copy: Jacobi touches column pairs, so contiguous
    // columns keep the inner loops on sequential memory.
    let mut b: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..m).map(|r| a[(r, c)]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut col = vec![0.0; n];
            col[c] = 1.0;
            col
        })
        .collect();

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        // Columns at rounding-noise scale (left over once the matrix's
        // rank is exhausted) never stabilize their mutual angles; they are
        // discarded by the rank threshold at extraction, so exempt them
        // from the convergence criterion.
        let max_norm_sq = b
            .iter()
            .map(|col| col.iter().map(|x| x * x).sum::<f64>())
            .fold(0.0f64, f64::max);
        let norm_floor = max_norm_sq.sqrt() * (m.max(n) as f64) * f64::EPSILON;
        let floor_sq = norm_floor * norm_floor;
        let mut max_off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = col_moments(&b[p], &b[q]);
                if alpha <= floor_sq || beta <= floor_sq {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                max_off = max_off.max(rel);
                if rel <= JACOBI_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut b, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if max_off <= JACOBI_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::SvdNonConvergence {
            rows: m,
            cols: n,
            sweeps: MAX_SWEEPS,
        });
    }

    // Singular values are the column norms; sort them non-increasing.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = b
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = Mat::zeros(m, n);
    let mut vt = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let smax = norms[order[0]];
    let rank_tol = smax * (m.max(n) as f64) * f64::EPSILON;
    let mut deficient = Vec::new();
    for (k, &src) in order.iter().enumerate() {
        s.push(norms[src]);
        if norms[src] > rank_tol && norms[src] > 0.0 {
            let inv = 1.0 / norms[src];
            for r in 0..m {
                u[(r, k)] = b[src][r] * inv;
            }
        } else {
            deficient.push(k);
        }
        for c in 0..n {
            vt[(k, c)] = v[src][c];
        }
    }
    if !deficient.is_empty() {
        complete_basis(&mut u, &deficient);
    }
    Ok(Svd { u, s, vt })
}

fn col_moments(p: &[f64], q: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (&x, &y) in p.iter().zip(q) {
        alpha += x * x;
        beta += y * y;
        gamma += x * y;
    }
    (alpha, beta, gamma)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = c * *x - s * *y;
        let xq = s * *x + c * *y;
        *x = xp;
        *y = xq;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all other
/// columns (rank-deficient inputs leave null singular directions).
fn complete_basis(u: &mut Mat<f64>, missing: &[usize]) {
    let m = u.rows();
    let n = u.cols();
    let filled: Vec<usize> = (0..n).filter(|k| !missing.contains(k)).collect();
    let mut done: Vec<usize> = filled;
    for &k in missing {
        // Start from the coordinate vector least represented by the current
        // basis, then orthogonalize twice (classic re-orthogonalization).
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            for &j in &done {
                let dot: f64 = (0..m).map(|r| cand[r] * u[(r, j)]).sum();
                for r in 0..m {
                    cand[r] -= dot * u[(r, j)];
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |(bn, _)| norm > *bn) {
                best = Some((norm, cand));
            }
            if norm > 0.9 {
                break;
            }
        }
        let (norm, mut cand) = best.expect("nonzero dimension");
        debug_assert!(norm > 0.0, "cannot complete basis");
        for &j in &done {
            let dot: f64 = (0..m).map(|r| cand[r] * u[(r, j)]).sum();
            for r in 0..m {
                cand[r] -= dot * u[(r, j)];
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        for r in 0..m {
            u[(r, k)] = cand[r] / norm;
        }
        done.push(k);
    }
}

/// Thin Householder QR: `a = q r` with `q` of shape `m x n` (orthonormal
/// columns) and `r` upper-triangular `n x n`. Requires `m >= n`.
pub fn qr_thin(a: &Mat<f64>) -> (Mat<f64>, Mat<f64>) {
    let m = a.rows();
    let n = a.cols();
    assert!(m >= n, "qr_thin requires rows >= cols");
    let mut work = a.clone();
    // Householder vectors, stored dense per column below the diagonal.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|r| work[(r, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push(Vec::new());
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * norm;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= vnorm;
        }
        // Apply  I - 2 v v^T  to the trailing block of `work`.
        for c in k..n {
            let mut dot = 0.0;
            for (i, &vi) in v.iter().enumerate() {
                dot += vi * work[(k + i, c)];
            }
            let dot2 = 2.0 * dot;
            for (i, &vi) in v.iter().enumerate() {
                work[(k + i, c)] -= dot2 * vi;
            }
        }
        vs.push(v);
    }

    let mut r = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = work[(i, j)];
        }
    }

    // Accumulate the thin Q by applying the reflectors, last first, to the
    // leading n columns of the identity.
    let mut q = Mat::zeros(m, n);
    for i in 0..n {
        q[(i, i)] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &vs[k];
        if v.is_empty() {
            continue;
        }
        for c in 0..n {
            let mut dot = 0.0;
            for (i, &vi) in v.iter().enumerate() {
                dot += vi * q[(k + i, c)];
            }
            let dot2 = 2.0 * dot;
            for (i, &vi) in v.iter().enumerate() {
                q[(k + i, c)] -= dot2 * vi;
            }
        }
    }
    (q, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat::frob_dist;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn check_factorization(a: &Mat<f64>, tol: f64) {
        let d = svd(a).unwrap();
        let p = a.rows().min(a.cols());
        assert_eq!(d.u.shape(), (a.rows(), p));
        assert_eq!(d.s.len(), p);
        assert_eq!(d.vt.shape(), (p, a.cols()));
        // Reconstruction.
        let us = {
            let mut us = d.u.clone();
            for r in 0..us.rows() {
                for c in 0..us.cols() {
                    us[(r, c)] *= d.s[c];
                }
            }
            us
        };
        let recon = us.matmul(&d.vt);
        assert!(
            frob_dist(&recon, a) <= tol * (1.0 + a.frob_norm()),
            "reconstruction error {} for {:?}",
            frob_dist(&recon, a),
            a.shape()
        );
        // Orthonormality.
        let utu = d.u.matmul_at(&d.u);
        assert!(frob_dist(&utu, &Mat::eye(p)) < 1e-10);
        let vvt = d.vt.matmul_bt(&d.vt);
        assert!(frob_dist(&vvt, &Mat::eye(p)) < 1e-10);
        // Ordering and sign.
        for w in d.s.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(d.s.iter().all(|&x| x >= 0.0));
    }

    // identity: all singular values are exactly 1.
    #[test]
    fn identity_has_unit_spectrum() {
        let d = svd(&Mat::eye(5)).unwrap();
        for &s in &d.s {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    // diag(3, -2, 0): singular values are |entries| sorted.
    #[test]
    fn diagonal_with_signs_and_zero() {
        let a = Mat::diag(&[3.0, -2.0, 0.0]);
        let d = svd(&a).unwrap();
        assert!((d.s[0] - 3.0).abs() < 1e-14);
        assert!((d.s[1] - 2.0).abs() < 1e-14);
        assert!(d.s[2].abs() < 1e-14);
        check_factorization(&a, 1e-12);
    }

    // 2x2 [[3,0],[4,0]] has singular values (5, 0): the only
    // nonzero column has norm 5.
    #[test]
    fn rank_one_two_by_two() {
        let a = Mat::from_rows(&[&[3.0, 0.0], &[4.0, 0.0]]);
        let d = svd(&a).unwrap();
        assert!((d.s[0] - 5.0).abs() < 1e-12);
        assert!(d.s[1].abs() < 1e-12);
        check_factorization(&a, 1e-12);
    }

    #[test]
    fn random_tall_matrix_reconstructs() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = Mat::from_fn(10, 4, |_, _| rng.gen_range(-1.0..1.0));
        check_factorization(&a, 1e-10);
    }

    #[test]
    fn random_wide_matrix_reconstructs() {
        let mut rng = StdRng::seed_from_u64(8);
        let a = Mat::from_fn(4, 9, |_, _| rng.gen_range(-1.0..1.0));
        check_factorization(&a, 1e-10);
    }

    #[test]
    fn qr_path_matches_direct_jacobi() {
        let mut rng = StdRng::seed_from_u64(9);
        // 40x5 triggers the QR reduction; compare against the plain path.
        let a = Mat::from_fn(40, 5, |_, _| rng.gen_range(-2.0..2.0));
        check_factorization(&a, 1e-10);
        let direct = jacobi_svd(&a).unwrap();
        let reduced = svd(&a).unwrap();
        for (x, y) in direct.s.iter().zip(&reduced.s) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_still_orthonormal() {
        // Duplicate columns force a zero singular value; U must still be
        // completed to orthonormal columns.
        let mut rng = StdRng::seed_from_u64(10);
        let base = Mat::from_fn(8, 2, |_, _| rng.gen_range(-1.0..1.0));
        let a = Mat::from_fn(8, 4, |r, c| base[(r, c % 2)]);
        check_factorization(&a, 1e-10);
        let d = svd(&a).unwrap();
        assert!(d.s[2] < 1e-12);
        assert!(d.s[3] < 1e-12);
    }

    #[test]
    fn qr_thin_factors() {
        let mut rng = StdRng::seed_from_u64(11);
        let a = Mat::from_fn(12, 5, |_, _| rng.gen_range(-1.0..1.0));
        let (q, r) = qr_thin(&a);
        assert!(frob_dist(&q.matmul(&r), &a) < 1e-12);
        assert!(frob_dist(&q.matmul_at(&q), &Mat::eye(5)) < 1e-12);
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn nonfinite_rejected() {
        let a = Mat::from_rows(&[&[1.0, f64::NAN], &[0.0, 1.0]]);
        assert!(matches!(svd(&a), Err(LinalgError::NonFinite { .. })));
    }
}
