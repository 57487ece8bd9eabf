//! Orthogonal Procrustes alignment.

use super::mat::Mat;
use super::svd::svd;
use crate::error::LinalgError;

/// Orthogonal matrix `r` minimizing `|| y r - x ||_F` over all orthogonal
/// `r` (reflections allowed), i.e. the rotation taking the point cloud `y`
/// onto `x`. Both inputs are `n x d` with matching shapes; the result is
/// `d x d`.
///
/// Solution: with `m = y^T x = u s v^T`, the minimizer is `r = u v^T`.
pub fn procrustes_rotation(y: &Mat<f64>, x: &Mat<f64>) -> Result<Mat<f64>, LinalgError> {
    if y.shape() != x.shape() {
        return Err(LinalgError::DimensionMismatch(format!(
            "procrustes: clouds are {}x{} and {}x{}",
            y.rows(),
            y.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let m = y.matmul_at(x);
    let d = svd(&m)?;
    Ok(d.u.matmul(&d.vt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat::frob_dist;
    use crate::linalg::svd::qr_thin;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_orthogonal(rng: &mut StdRng, d: usize) -> Mat<f64> {
        let raw = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        qr_thin(&raw).0
    }

    // aligning a cloud with itself yields the identity.
    #[test]
    fn self_alignment_is_identity() {
        let mut rng = StdRng::seed_from_u64(41);
        let x = Mat::from_fn(20, 4, |_, _| rng.gen_range(-1.0..1.0));
        let r = procrustes_rotation(&x, &x).unwrap();
        assert!(frob_dist(&r, &Mat::eye(4)) < 1e-10);
    }

    // A planted rotation must be recovered: y = x q, so the minimizer of
    // ||y r - x|| is r = q^T.
    #[test]
    fn recovers_planted_rotation() {
        let mut rng = StdRng::seed_from_u64(42);
        for d in [2usize, 3, 6] {
            let x = Mat::from_fn(30, d, |_, _| rng.gen_range(-1.0..1.0));
            let q = random_orthogonal(&mut rng, d);
            let y = x.matmul(&q);
            let r = procrustes_rotation(&y, &x).unwrap();
            assert!(frob_dist(&r, &q.transpose()) < 1e-8, "d={d}");
            assert!(frob_dist(&y.matmul(&r), &x) < 1e-8, "d={d}");
        }
    }

    // The result is orthogonal even for unrelated clouds.
    #[test]
    fn result_always_orthogonal() {
        let mut rng = StdRng::seed_from_u64(43);
        for _ in 0..5 {
            let x = Mat::from_fn(15, 5, |_, _| rng.gen_range(-1.0..1.0));
            let y = Mat::from_fn(15, 5, |_, _| rng.gen_range(-1.0..1.0));
            let r = procrustes_rotation(&y, &x).unwrap();
            assert!(frob_dist(&r.matmul_at(&r), &Mat::eye(5)) < 1e-10);
        }
    }

    // Reflections are part of the orthogonal group and must be matched too.
    #[test]
    fn handles_reflection() {
        let mut rng = StdRng::seed_from_u64(44);
        let x = Mat::from_fn(25, 3, |_, _| rng.gen_range(-1.0..1.0));
        let flip = Mat::diag(&[1.0, -1.0, 1.0]);
        let y = x.matmul(&flip);
        let r = procrustes_rotation(&y, &x).unwrap();
        assert!(frob_dist(&y.matmul(&r), &x) < 1e-8);
    }
}
