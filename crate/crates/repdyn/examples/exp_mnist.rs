//! Scratch experiment: MNIST host + reduced-scale KAE timing/accuracy.

use std::time::Instant;

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repdyn::datasets::load_mnist;
use repdyn::io::{load_mlp, save_mlp};
use repdyn::kae::{surrogate_accuracy, train_kae, KaeModel, KaeTrainConfig, LrDecay};
use repdyn::preprocess::fit_pair;
use repdyn::resnet::{
    capture_layers, evaluate, train_mlp, MlpTrainConfig, RepresentationSet, ResidualMlpModel,
};

fn main() {
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    println!("train {} test {}", train.features.rows(), test.features.rows());

    let cache = std::path::Path::new("/tmp/exp_mnist_host.kta");
    let host = if cache.exists() {
        load_mlp(cache).unwrap().0
    } else {
        let t0 = Instant::now();
        let mut m = ResidualMlpModel::new(784, 784, 4, 10, 42);
        train_mlp(&mut m, &train, Some(&test), &MlpTrainConfig::mnist(42)).unwrap();
        println!("host train {:.0}s", t0.elapsed().as_secs_f64());
        save_mlp(&m, "mnist", cache).unwrap();
        m
    };
    println!("host acc {:.2}", evaluate(&host, &test).overall);

    let t0 = Instant::now();
    let reps = capture_layers(&host, &train, &[0, 4]);
    println!("capture {:.0}s", t0.elapsed().as_secs_f64());

    // Reduced-scale arm: fit on a seeded row subsample.
    let n_fit = 12800usize;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut idx = sample(&mut rng, reps[0].features.rows(), n_fit).into_vec();
    idx.sort_unstable();
    let sub = |r: &RepresentationSet| RepresentationSet {
        layer: r.layer,
        labels: idx.iter().map(|&i| r.labels[i]).collect(),
        features: r.features.select_rows(&idx),
    };
    let (r0, r4) = (sub(&reps[0]), sub(&reps[1]));

    let t0 = Instant::now();
    let pair = fit_pair(&r0, &r4, 784).unwrap();
    println!("fit_pair {:.0}s", t0.elapsed().as_secs_f64());
    let xi = pair.xhat_i.to_f32();
    let xj = pair.xhat_j.to_f32();

    for seed in 0..2u64 {
        let mut cfg = KaeTrainConfig::mnist(seed);
        cfg.lr_decay = LrDecay::Cosine;
        let mut model = KaeModel::<f32>::new(784, 1000, 800, seed);
        let t0 = Instant::now();
        let h = match train_kae(&mut model, &xi, &xj, &cfg) {
            Ok(h) => h,
            Err(e) => {
                println!("seed {seed}: {e}");
                continue;
            }
        };
        let train_s = t0.elapsed().as_secs_f64();
        let acc = surrogate_accuracy(&model, &pair.t_i, &pair.t_j, &host, &test)
            .unwrap()
            .overall;
        println!(
            "kae seed {seed}: {train_s:.0}s final {:.2e} acc {acc:.2}",
            h.last().unwrap().total,
        );
    }
}
