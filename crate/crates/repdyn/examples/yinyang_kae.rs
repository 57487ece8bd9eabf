//! Full Yin-Yang surrogate pipeline: train the residual MLP host, capture
//! the first and last layer representations, fit the preprocessing pair
//! (center / PCA / normalize / Procrustes), train the Koopman autoencoder
//! with the standard recipe (1000 epochs, batch 1024, p = 20, all loss
//! weights 1), and compare surrogate accuracy against the host.
//!
//! Run with: `cargo run --release --example yinyang_kae`

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::kae::{surrogate_accuracy, train_kae, KaeModel, KaeTrainConfig};
use repdyn::preprocess::fit_pair;
use repdyn::resnet::{capture_layers, evaluate, train_mlp, MlpTrainConfig, ResidualMlpModel};

fn main() {
    let train = gen_yinyang(&YinYangSpec::new(5000, 1));
    let test = gen_yinyang(&YinYangSpec::new(5000, 2));

    let mut host = ResidualMlpModel::new(2, 10, 4, 3, 42);
    let start = std::time::Instant::now();
    train_mlp(&mut host, &train, None, &MlpTrainConfig::yinyang(42)).expect("host training");
    let host_report = evaluate(&host, &test);
    println!(
        "host: {:.2}% test accuracy ({:.1?})",
        host_report.overall,
        start.elapsed()
    );

    // The pair (L0, L4): input-layer output and last block output. q = 10
    // keeps every dimension, so the preprocessing is invertible and the
    // surrogate's outputs can be routed through the host's head.
    let reps = capture_layers(&host, &train, &[0, 4]);
    let pair = fit_pair(&reps[0], &reps[1], 10).expect("preprocessing");
    println!(
        "pair fitted: {} rows, q = {}, scales ({:.4}, {:.4})",
        pair.xhat_i.rows(),
        pair.xhat_i.cols(),
        pair.t_i.scale,
        pair.t_j.scale
    );

    let mut kae = KaeModel::<f32>::new(10, 30, 20, 42);
    let cfg = KaeTrainConfig::yinyang(42);
    let start = std::time::Instant::now();
    let history = train_kae(
        &mut kae,
        &pair.xhat_i.to_f32(),
        &pair.xhat_j.to_f32(),
        &cfg,
    )
    .expect("KAE training");
    for (epoch, l) in history.iter().enumerate().step_by(200) {
        println!(
            "epoch {epoch:>4}: total {:.3e} (recon {:.3e}, linear {:.3e}, state {:.3e}, dist {:.3e})",
            l.total, l.recon, l.linear, l.state, l.dist
        );
    }
    let last = history.last().unwrap();
    println!(
        "trained in {:.1?}; final total loss {:.3e}",
        start.elapsed(),
        last.total
    );

    let surrogate = surrogate_accuracy(&kae, &pair.t_i, &pair.t_j, &host, &test)
        .expect("surrogate evaluation");
    println!(
        "surrogate: {:.2}% vs host {:.2}% (gap {:+.2} pp)",
        surrogate.overall,
        host_report.overall,
        surrogate.overall - host_report.overall
    );
    for (class, (s, h)) in surrogate
        .per_class
        .iter()
        .zip(&host_report.per_class)
        .enumerate()
    {
        println!("  class {class}: surrogate {s:.2}%, host {h:.2}%");
    }
}
