//! Effect of the norm-preservation loss term on observable-space topology.
//! Two KAEs are trained per seed, identical except for lambda_dist (1 vs 0);
//! for each, the beta0 curve of the encoded penultimate cloud is compared
//! against the curve of the penultimate representation itself. With the
//! term on, the encoder is pushed toward an isometry and the curves match
//! far more closely.
//!
//! Run with: `cargo run --release --example isometry_ablation`

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::kae::{train_kae, KaeModel, KaeTrainConfig};
use repdyn::preprocess::fit_pair;
use repdyn::resnet::{capture_layers, train_mlp, MlpTrainConfig, ResidualMlpModel};
use repdyn::topology::{betti_curve, subsample, vr_persistence, PointCloud};

fn beta0_curve(points: repdyn::linalg::Mat<f64>, grid: &[f64]) -> Vec<usize> {
    let cloud = PointCloud::new(points, None).expect("cloud");
    let cloud = subsample(&cloud, 600, 9).expect("subsample");
    let pairs = vr_persistence(&cloud, 4.0, 0).expect("persistence");
    betti_curve(&pairs, 0, grid).expect("curve").counts
}

fn l1(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).sum()
}

fn main() {
    let train = gen_yinyang(&YinYangSpec::new(5000, 1));
    let mut host = ResidualMlpModel::new(2, 10, 4, 3, 42);
    train_mlp(&mut host, &train, None, &MlpTrainConfig::yinyang(42)).expect("host training");
    let reps = capture_layers(&host, &train, &[0, 4]);
    let pair = fit_pair(&reps[0], &reps[1], 10).expect("preprocessing");
    let xi = pair.xhat_i.to_f32();
    let xj = pair.xhat_j.to_f32();

    let grid: Vec<f64> = (1..=32).map(|t| 4.0 * t as f64 / 32.0).collect();
    let reference = beta0_curve(pair.xhat_j.clone(), &grid);

    println!("L1 distance between encoded-cloud and state-cloud beta0 curves:");
    println!("  seed   lambda_dist=1   lambda_dist=0");
    for seed in 0..3u64 {
        let mut distances = Vec::new();
        for dist_weight in [1.0, 0.0] {
            let mut cfg = KaeTrainConfig::yinyang(seed);
            cfg.weights.dist = dist_weight;
            let mut kae = KaeModel::<f32>::new(10, 30, 20, seed);
            train_kae(&mut kae, &xi, &xj, &cfg).expect("KAE training");
            let encoded = kae.encode(&xj).to_f64();
            distances.push(l1(&beta0_curve(encoded, &grid), &reference));
        }
        println!("  {seed:>4}   {:>13}   {:>13}", distances[0], distances[1]);
    }
}
