//! Scratch experiment: KAE convergence vs learning-rate recipe.

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::kae::{surrogate_accuracy, train_kae, KaeModel, KaeTrainConfig, LrDecay};
use repdyn::preprocess::fit_pair;
use repdyn::resnet::{capture_layers, evaluate, train_mlp, MlpTrainConfig, ResidualMlpModel};

fn main() {
    let train = gen_yinyang(&YinYangSpec::new(5000, 1));
    let test = gen_yinyang(&YinYangSpec::new(5000, 2));
    let mut host = ResidualMlpModel::new(2, 10, 4, 3, 42);
    train_mlp(&mut host, &train, None, &MlpTrainConfig::yinyang(42)).unwrap();
    let host_acc = evaluate(&host, &test).overall;
    println!("host {host_acc:.2}");
    let reps = capture_layers(&host, &train, &[0, 4]);
    let pair = fit_pair(&reps[0], &reps[1], 10).unwrap();
    let xi = pair.xhat_i.to_f32();
    let xj = pair.xhat_j.to_f32();

    let runs: &[(f64, usize, u64)] = &[
        (3e-2, 1000, 0),
        (3e-2, 1000, 1),
        (3e-2, 1000, 2),
        (3e-2, 1000, 3),
        (3e-2, 1000, 4),
        (3e-2, 2000, 0),
        (3e-2, 2000, 1),
        (3e-2, 2000, 2),
        (3e-2, 2000, 3),
        (3e-2, 2000, 4),
        (2e-2, 1000, 0),
        (2e-2, 1000, 1),
        (2e-2, 1000, 2),
    ];
    for &(lr, epochs, seed) in runs {
        let mut cfg = KaeTrainConfig::yinyang(seed);
        cfg.learning_rate = lr;
        cfg.epochs = epochs;
        cfg.lr_decay = LrDecay::Cosine;
        let mut model = KaeModel::<f32>::new(10, 30, 20, seed);
        let h = match train_kae(&mut model, &xi, &xj, &cfg) {
            Ok(h) => h,
            Err(e) => {
                println!("cosine lr {lr:.0e} ep {epochs} seed {seed}: {e}");
                continue;
            }
        };
        let acc = surrogate_accuracy(&model, &pair.t_i, &pair.t_j, &host, &test)
            .unwrap()
            .overall;
        println!(
            "cosine lr {lr:.0e} ep {epochs} seed {seed}: final {:.2e} acc {acc:.2}",
            h.last().unwrap().total,
        );
    }
}
