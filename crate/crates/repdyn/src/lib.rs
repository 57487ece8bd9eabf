//! Koopman-autoencoder surrogates for neural representation dynamics.
//!
//! The crate covers the full pipeline of the accompanying experiments:
//!
//! 1. [`datasets`] — the Yin-Yang toy task and the MNIST loader.
//! 2. [`resnet`] — residual MLP hosts trained from scratch, plus capture of
//!    their layerwise representations.
//! 3. [`preprocess`] — centering, PCA projection, Frobenius normalization and
//!    Procrustes alignment of consecutive-layer representation pairs.
//! 4. [`kae`] — the Koopman autoencoder surrogate: encoder, matrix-exponential
//!    operator `K = exp(G/k)^k`, decoder, and its four-term training loss.
//! 5. [`topology`] — Vietoris-Rips persistent homology (Betti curves) used to
//!    quantify how representations simplify across depth.
//! 6. [`editing`] — closed-form least-squares edits of the Koopman operator
//!    for class unlearning.
//! 7. [`linalg`] / [`nn`] — the supporting dense linear algebra and the
//!    tape-based autodiff both trainers run on.
//! 8. [`io`] — tensor archives, run configs and reproducibility manifests.
//!
//! The `examples/` directory demonstrates each capability end to end; the
//! `repdyn` binary exposes the same steps as CLI subcommands.

pub mod datasets;
pub mod editing;
pub mod error;
pub mod io;
pub mod kae;
pub mod linalg;
pub mod nn;
pub mod preprocess;
pub mod resnet;
pub mod topology;

pub use error::{Error, Result};
