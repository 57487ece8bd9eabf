//! Layer-to-layer interpolation: the trained generator is split into
//! `k_steps` sub-steps `exp(G/k)`, giving a continuous path of synthetic
//! "virtual layers" between the first and the penultimate representation.
//! Walking the path, the decoded clouds contract onto the class clusters;
//! the component count at a fixed scale drops accordingly.
//!
//! Run with: `cargo run --release --example interpolate_trajectory`

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::kae::{train_kae, KaeModel, KaeTrainConfig};
use repdyn::preprocess::fit_pair;
use repdyn::resnet::{capture_layers, train_mlp, MlpTrainConfig, ResidualMlpModel};
use repdyn::topology::{betti0_at, PointCloud};

fn main() {
    let train = gen_yinyang(&YinYangSpec::new(5000, 1));
    let mut host = ResidualMlpModel::new(2, 10, 4, 3, 42);
    train_mlp(&mut host, &train, None, &MlpTrainConfig::yinyang(42)).expect("host training");

    let reps = capture_layers(&host, &train, &[0, 4]);
    let pair = fit_pair(&reps[0], &reps[1], 10).expect("preprocessing");
    let mut kae = KaeModel::<f32>::new(10, 30, 20, 42);
    train_kae(
        &mut kae,
        &pair.xhat_i.to_f32(),
        &pair.xhat_j.to_f32(),
        &KaeTrainConfig::yinyang(42),
    )
    .expect("KAE training");

    // A fixed 1000-row probe, decoded after m of k sub-steps.
    let probe_rows: Vec<usize> = (0..1000).map(|i| i * 5).collect();
    let probe = pair.xhat_i.select_rows(&probe_rows).to_f32();
    let scales = [0.25, 0.5, 1.0];

    println!("decoded-cloud component counts along the operator path:");
    println!("    m   beta0@0.25  beta0@0.5  beta0@1.0   mean|x_m - x_K|");
    let final_cloud = kae
        .interpolate(&probe, kae.k_steps)
        .expect("final step")
        .to_f64();
    for m in (0..=kae.k_steps).step_by(5) {
        let decoded = kae.interpolate(&probe, m).expect("interpolation").to_f64();
        let cloud = PointCloud::new(decoded.clone(), None).expect("cloud");
        let betti: Vec<usize> = scales.iter().map(|&e| betti0_at(&cloud, e)).collect();
        let drift: f64 = (0..decoded.rows())
            .map(|r| {
                decoded
                    .row(r)
                    .iter()
                    .zip(final_cloud.row(r))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / decoded.rows() as f64;
        println!(
            "  {m:>3}   {:>9}  {:>9}  {:>9}   {drift:>14.4}",
            betti[0], betti[1], betti[2]
        );
    }
}
