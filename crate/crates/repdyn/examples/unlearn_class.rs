//! Class unlearning on a Yin-Yang surrogate: train the host and its Koopman
//! autoencoder, then apply the closed-form operator edit that redirects one
//! class's observables onto another class's cluster, and compare per-class
//! surrogate accuracy before and after. Only the operator changes; the
//! encoder, decoder, and host stay frozen.
//!
//! Run with: `cargo run --release --example unlearn_class`

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::editing::{run_edit, EditPlan};
use repdyn::kae::{train_kae, KaeModel, KaeTrainConfig};
use repdyn::preprocess::fit_pair;
use repdyn::resnet::{capture_layers, evaluate, train_mlp, MlpTrainConfig, ResidualMlpModel};

fn main() {
    let train = gen_yinyang(&YinYangSpec::new(5000, 1));
    let test = gen_yinyang(&YinYangSpec::new(5000, 2));

    let mut host = ResidualMlpModel::new(2, 10, 4, 3, 42);
    train_mlp(&mut host, &train, None, &MlpTrainConfig::yinyang(42)).expect("host training");
    println!("host: {:.2}% test accuracy", evaluate(&host, &test).overall);

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

    // Forget the dots (class 2) by merging them into the yin (class 0).
    let plan = EditPlan::new(2, 0);
    let result = run_edit(&kae, &host, (&pair.t_i, &pair.t_j), &test, &plan)
        .expect("operator edit");

    println!(
        "edit: {} keys redirected, relative residual {:.2e}, preservation drift {:.3e}",
        plan.subsample_edits, result.relative_residual, result.preservation_drift
    );
    println!("surrogate accuracy per class (test set):");
    println!("  class   before     after");
    for (class, (b, a)) in result
        .before
        .per_class
        .iter()
        .zip(&result.after.per_class)
        .enumerate()
    {
        let marker = if class == plan.forget_class {
            "  <- forgotten"
        } else if class == plan.merge_into {
            "  <- merge target"
        } else {
            ""
        };
        println!("  {class:>5}  {b:>6.2}%   {a:>6.2}%{marker}");
    }
    println!(
        "  overall {:>5.2}%   {:>6.2}%",
        result.before.overall, result.after.overall
    );
}
