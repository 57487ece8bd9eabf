//! Representation preprocessing: mean-centering, PCA projection, a single
//! global rescaling to unit RMS row norm, and Procrustes alignment of a
//! layer pair.
//!
//! Fitted once on training representations and reused on held-out data; with
//! `q = d` every step is invertible, which is what lets surrogate outputs be
//! routed back through the host MLP's classification head.

use crate::error::Error;
use crate::linalg::{procrustes_rotation, svd, Mat};
use crate::resnet::RepresentationSet;

/// One side's fitted transform. Application order: subtract `mean`, multiply
/// by `projection`, divide by `scale`, multiply by `rotation`.
#[derive(Debug, Clone)]
pub struct PreprocessTransform {
    /// `1 x d` column means of the fit data.
    pub mean: Mat<f64>,
    /// `d x q`, orthonormal columns (top-q right singular vectors).
    pub projection: Mat<f64>,
    /// Root-mean-square row norm of the centered-projected fit matrix
    /// (its Frobenius norm over sqrt(n)): one global factor, so relative
    /// distances are untouched and typical rows come out near unit norm.
    pub scale: f64,
    /// `q x q` orthogonal; identity on the alignment-target side.
    pub rotation: Mat<f64>,
    /// Index of the layer this transform was fitted on.
    pub fitted_on: usize,
}

impl PreprocessTransform {
    pub fn input_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.cols()
    }

    /// `((x - mean) P / scale) R`.
    pub fn apply(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(
            x.cols(),
            self.input_dim(),
            "apply: {} columns but transform was fitted on dim {}",
            x.cols(),
            self.input_dim()
        );
        let mut centered = x.clone();
        for r in 0..centered.rows() {
            for c in 0..centered.cols() {
                centered[(r, c)] -= self.mean[(0, c)];
            }
        }
        let projected = centered.matmul(&self.projection);
        projected.scale(1.0 / self.scale).matmul(&self.rotation)
    }

    /// Convenience for captured (f32) representation sets.
    pub fn apply_set(&self, set: &RepresentationSet) -> Mat<f64> {
        self.apply(&set.features.to_f64())
    }

    /// Exact inverse of [`Self::apply`]; only defined when no information
    /// was discarded (`q = d`).
    pub fn invert(&self, xhat: &Mat<f64>) -> Result<Mat<f64>, Error> {
        if self.output_dim() < self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "transform is not invertible: projection kept q={} of d={} dimensions",
                self.output_dim(),
                self.input_dim()
            )));
        }
        assert_eq!(xhat.cols(), self.output_dim(), "invert: width mismatch");
        let unrotated = xhat.matmul_bt(&self.rotation);
        let mut x = unrotated.scale(self.scale).matmul_bt(&self.projection);
        for r in 0..x.rows() {
            for c in 0..x.cols() {
                x[(r, c)] += self.mean[(0, c)];
            }
        }
        Ok(x)
    }
}

/// Result of fitting a representation pair.
#[derive(Debug, Clone)]
pub struct FittedPair {
    pub t_i: PreprocessTransform,
    pub t_j: PreprocessTransform,
    /// Preprocessed i-side fit data (already rotated toward the j side).
    pub xhat_i: Mat<f64>,
    /// Preprocessed j-side fit data.
    pub xhat_j: Mat<f64>,
}

/// Fits the four-step preprocessing on a row-aligned representation pair:
/// center and PCA-project each side to `q` dimensions, rescale each by one
/// global factor so the mean squared row norm is 1, then rotate the i side
/// onto the j side by orthogonal Procrustes (the j side keeps the identity
/// rotation).
pub fn fit_pair(
    x_i: &RepresentationSet,
    x_j: &RepresentationSet,
    q: usize,
) -> Result<FittedPair, Error> {
    if x_i.features.rows() != x_j.features.rows() {
        return Err(Error::InvalidArgument(format!(
            "representation pair is not row-aligned: {} vs {} rows",
            x_i.features.rows(),
            x_j.features.rows()
        )));
    }
    let (mut t_i, xhat_i_raw) = fit_side(&x_i.features.to_f64(), x_i.layer, q)?;
    let (t_j, xhat_j) = fit_side(&x_j.features.to_f64(), x_j.layer, q)?;
    let rotation = procrustes_rotation(&xhat_i_raw, &xhat_j)?;
    let xhat_i = xhat_i_raw.matmul(&rotation);
    t_i.rotation = rotation;
    Ok(FittedPair {
        t_i,
        t_j,
        xhat_i,
        xhat_j,
    })
}

/// Centers `x` and projects it onto its top-`c` principal components
/// (no normalization — raw PCA coordinates, as plotted in scatter views).
pub fn pca_project(x: &Mat<f64>, c: usize) -> Result<Mat<f64>, Error> {
    let n = x.rows();
    let d = x.cols();
    let c_max = (n - 1).min(d);
    if c == 0 || c > c_max {
        return Err(Error::InvalidArgument(format!(
            "components={c} out of range: must be in 1..={c_max} for {n}x{d} data"
        )));
    }
    let mean = x.col_means();
    let mut centered = x.clone();
    for r in 0..n {
        for col in 0..d {
            centered[(r, col)] -= mean[(0, col)];
        }
    }
    let dec = svd(&centered)?;
    let projection = Mat::from_fn(d, c, |r, k| dec.vt[(k, r)]);
    Ok(centered.matmul(&projection))
}

fn fit_side(
    x: &Mat<f64>,
    layer: usize,
    q: usize,
) -> Result<(PreprocessTransform, Mat<f64>), Error> {
    let n = x.rows();
    let d = x.cols();
    // Centering removes one degree of freedom, so at most min(n-1, d)
    // principal directions carry data.
    let q_max = (n - 1).min(d);
    if q == 0 || q > q_max {
        return Err(Error::InvalidArgument(format!(
            "q={q} out of range: must be in 1..={q_max} for {n}x{d} representations"
        )));
    }
    let mean = x.col_means();
    let mut centered = x.clone();
    for r in 0..n {
        for c in 0..d {
            centered[(r, c)] -= mean[(0, c)];
        }
    }
    let dec = svd(&centered)?;
    // Top-q right singular vectors as columns.
    let projection = Mat::from_fn(d, q, |r, c| dec.vt[(c, r)]);
    let projected = centered.matmul(&projection);
    let scale = projected.frob_norm() / (n as f64).sqrt();
    if scale <= 0.0 {
        return Err(Error::InvalidArgument(
            "representations have zero variance; cannot normalize".into(),
        ));
    }
    let xhat = projected.scale(1.0 / scale);
    Ok((
        PreprocessTransform {
            mean,
            projection,
            scale,
            rotation: Mat::eye(q),
            fitted_on: layer,
        },
        xhat,
    ))
}
