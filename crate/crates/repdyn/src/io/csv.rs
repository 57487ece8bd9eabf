//! Plain-CSV emitters for metrics and analysis outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a rerun
//! with identical inputs produces byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::IoError;
use crate::kae::KaeLosses;
use crate::linalg::Mat;
use crate::resnet::EpochMetrics;
use crate::topology::{BettiCurve, PersistencePair};

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), IoError> {
    w.flush().map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

macro_rules! emit {
    ($w:expr, $path:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*).map_err(|source| IoError::Io {
            path: $path.display().to_string(),
            source,
        })?
    };
}

/// `epoch,train_loss,train_accuracy,test_accuracy`; the last column is empty
/// for epochs without a test evaluation.
pub fn write_metrics_csv(path: &Path, history: &[EpochMetrics]) -> Result<(), IoError> {
    let mut w = create(path)?;
    emit!(w, path, "epoch,train_loss,train_accuracy,test_accuracy");
    for m in history {
        match m.test_accuracy {
            Some(t) => emit!(
                w,
                path,
                "{},{},{},{}",
                m.epoch,
                m.train_loss,
                m.train_accuracy,
                t
            ),
            None => emit!(
                w,
                path,
                "{},{},{},",
                m.epoch,
                m.train_loss,
                m.train_accuracy
            ),
        }
    }
    finish(w, path)
}

/// `epoch,total,recon,linear,state,dist`, one row per epoch.
pub fn write_kae_loss_csv(path: &Path, history: &[KaeLosses]) -> Result<(), IoError> {
    let mut w = create(path)?;
    emit!(w, path, "epoch,total,recon,linear,state,dist");
    for (epoch, l) in history.iter().enumerate() {
        emit!(
            w,
            path,
            "{},{},{},{},{},{}",
            epoch,
            l.total,
            l.recon,
            l.linear,
            l.state,
            l.dist
        );
    }
    finish(w, path)
}

/// `dim,birth,death`; infinite deaths are written as `inf`.
pub fn write_diagram_csv(path: &Path, pairs: &[PersistencePair]) -> Result<(), IoError> {
    let mut w = create(path)?;
    emit!(w, path, "dim,birth,death");
    for p in pairs {
        if p.death.is_finite() {
            emit!(w, path, "{},{},{}", p.dim, p.birth, p.death);
        } else {
            emit!(w, path, "{},{},inf", p.dim, p.birth);
        }
    }
    finish(w, path)
}

/// `dim,epsilon,count`, curves concatenated in the order given.
pub fn write_betti_csv(path: &Path, curves: &[BettiCurve]) -> Result<(), IoError> {
    let mut w = create(path)?;
    emit!(w, path, "dim,epsilon,count");
    for c in curves {
        for (eps, count) in c.epsilons.iter().zip(&c.counts) {
            emit!(w, path, "{},{},{}", c.dim, eps, count);
        }
    }
    finish(w, path)
}

/// `pc1,..,pcC,label`, one row per projected point.
pub fn write_projection_csv(
    path: &Path,
    projected: &Mat<f64>,
    labels: &[usize],
) -> Result<(), IoError> {
    assert_eq!(
        projected.rows(),
        labels.len(),
        "projection rows must match labels"
    );
    let mut w = create(path)?;
    let header: Vec<String> = (1..=projected.cols()).map(|c| format!("pc{c}")).collect();
    emit!(w, path, "{},label", header.join(","));
    for r in 0..projected.rows() {
        let row: Vec<String> = (0..projected.cols())
            .map(|c| format!("{}", projected[(r, c)]))
            .collect();
        emit!(w, path, "{},{}", row.join(","), labels[r]);
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn metrics_csv_layout() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let history = vec![
            EpochMetrics {
                epoch: 0,
                train_loss: 0.5,
                train_accuracy: 90.0,
                test_accuracy: None,
            },
            EpochMetrics {
                epoch: 1,
                train_loss: 0.25,
                train_accuracy: 95.5,
                test_accuracy: Some(94.25),
            },
        ];
        write_metrics_csv(&path, &history).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "epoch,train_loss,train_accuracy,test_accuracy\n0,0.5,90,\n1,0.25,95.5,94.25\n"
        );
    }

    #[test]
    fn diagram_csv_marks_essentials() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let pairs = vec![
            PersistencePair {
                dim: 0,
                birth: 0.0,
                death: f64::INFINITY,
            },
            PersistencePair {
                dim: 1,
                birth: 1.0,
                death: 1.5,
            },
        ];
        write_diagram_csv(&path, &pairs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "dim,birth,death\n0,0,inf\n1,1,1.5\n");
    }

    #[test]
    fn betti_and_projection_layout() {
        let dir = tempdir().unwrap();
        let bpath = dir.path().join("b.csv");
        let curves = vec![BettiCurve {
            dim: 0,
            epsilons: vec![0.1, 0.2],
            counts: vec![3, 1],
        }];
        write_betti_csv(&bpath, &curves).unwrap();
        assert_eq!(
            std::fs::read_to_string(&bpath).unwrap(),
            "dim,epsilon,count\n0,0.1,3\n0,0.2,1\n"
        );

        let ppath = dir.path().join("p.csv");
        let proj = Mat::from_rows(&[&[1.0, -2.0, 0.5][..], &[0.0, 3.5, -1.0]]);
        write_projection_csv(&ppath, &proj, &[0, 2]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&ppath).unwrap(),
            "pc1,pc2,pc3,label\n1,-2,0.5,0\n0,3.5,-1,2\n"
        );
    }

    #[test]
    fn kae_loss_csv_layout() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let history = vec![KaeLosses {
            total: 1.0,
            recon: 0.4,
            linear: 0.3,
            state: 0.2,
            dist: 0.1,
        }];
        write_kae_loss_csv(&path, &history).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "epoch,total,recon,linear,state,dist\n0,1,0.4,0.3,0.2,0.1\n"
        );
    }
}
