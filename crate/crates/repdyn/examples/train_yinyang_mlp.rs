//! Trains the Yin-Yang residual MLP host from scratch with the standard
//! recipe (500 epochs, batch 512, SGD momentum 0.9, cyclic peak lr 0.1) and
//! reports per-class test accuracy.
//!
//! Run with: `cargo run --release --example train_yinyang_mlp`

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::resnet::{evaluate, train_mlp, MlpTrainConfig, ResidualMlpModel};

fn main() {
    let train = gen_yinyang(&YinYangSpec::new(5000, 1));
    let test = gen_yinyang(&YinYangSpec::new(5000, 2));
    println!(
        "yin-yang: {} train / {} test points, 3 classes",
        train.len(),
        test.len()
    );

    let mut model = ResidualMlpModel::new(2, 10, 4, 3, 42);
    let mut cfg = MlpTrainConfig::yinyang(42);
    cfg.eval_every = 100;

    let start = std::time::Instant::now();
    let history = train_mlp(&mut model, &train, Some(&test), &cfg).expect("training failed");
    for m in &history {
        println!(
            "epoch {:>3}: train loss {:.4}, train acc {:.2}%, test acc {:.2}%",
            m.epoch + 1,
            m.train_loss,
            m.train_accuracy,
            m.test_accuracy.unwrap_or(f64::NAN)
        );
    }
    println!("trained in {:.1?}", start.elapsed());

    let report = evaluate(&model, &test);
    println!("final test accuracy: {:.2}%", report.overall);
    for (class, (acc, count)) in report
        .per_class
        .iter()
        .zip(&report.class_counts)
        .enumerate()
    {
        println!("  class {class}: {acc:.2}% over {count} samples");
    }
}
