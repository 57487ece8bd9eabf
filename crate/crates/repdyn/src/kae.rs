//! Koopman autoencoder surrogates: architecture, the four-term objective,
//! the `exp(G/k)^k` operator, training, interpolation, and surrogate
//! evaluation through the host MLP's head.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::Dataset;
use crate::error::{Error, LinalgError, TrainError};
use crate::linalg::{matrix_exp, Mat, Scalar};
use crate::nn::{Activation, AdamW, DenseLayer, Tape};
use crate::preprocess::PreprocessTransform;
use crate::resnet::{capture_layers, EvalReport, ResidualMlpModel};

/// Encoder `d -> h -> p` (LeakyReLU between), generator `G` (`p x p`),
/// decoder `p -> h -> d` (mirrored shapes, independent parameters).
///
/// The Koopman operator is always derived as `K = exp(G/k)^k`; `k_steps`
/// only changes interpolation granularity (the product telescopes to
/// `exp(G)` for any `k`).
#[derive(Debug, Clone)]
pub struct KaeModel<T: Scalar = f32> {
    pub encoder: Vec<DenseLayer<T>>,
    pub generator_g: Mat<T>,
    pub decoder: Vec<DenseLayer<T>>,
    pub k_steps: usize,
}

/// Default interpolation granularity.
pub const DEFAULT_K_STEPS: usize = 50;
const LEAKY_SLOPE: f64 = 0.01;

impl<T: Scalar> KaeModel<T> {
    pub fn new(d: usize, hidden: usize, p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = vec![
            DenseLayer::kaiming(d, hidden, Activation::LeakyRelu(LEAKY_SLOPE), &mut rng),
            DenseLayer::kaiming(hidden, p, Activation::Identity, &mut rng),
        ];
        let decoder = vec![
            DenseLayer::kaiming(p, hidden, Activation::LeakyRelu(LEAKY_SLOPE), &mut rng),
            DenseLayer::kaiming(hidden, d, Activation::Identity, &mut rng),
        ];
        Self {
            encoder,
            generator_g: Mat::zeros(p, p),
            decoder,
            k_steps: DEFAULT_K_STEPS,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.encoder[0].in_dim()
    }

    pub fn observable_dim(&self) -> usize {
        self.generator_g.rows()
    }

    pub fn encode(&self, x: &Mat<T>) -> Mat<T> {
        crate::nn::apply_layers(&self.encoder, x)
    }

    pub fn decode(&self, z: &Mat<T>) -> Mat<T> {
        crate::nn::apply_layers(&self.decoder, z)
    }

    /// `phi^{-1}(K phi(x))` with `K` from [`koopman_operator`].
    pub fn predict(&self, x: &Mat<T>) -> Result<Mat<T>, LinalgError> {
        let k = koopman_operator(self)?;
        Ok(self.decode(&self.encode(x).matmul_bt(&k)))
    }

    /// Decodes the observable after `m` of the `k_steps` sub-steps:
    /// `phi^{-1}( exp(G/k)^m phi(x) )`. `m = 0` is the plain autoencoding,
    /// `m = k_steps` equals [`Self::predict`] exactly.
    pub fn interpolate(&self, x: &Mat<T>, m: usize) -> Result<Mat<T>, Error> {
        if m > self.k_steps {
            return Err(Error::InvalidArgument(format!(
                "interpolation step m={m} out of range 0..={}",
                self.k_steps
            )));
        }
        let step = step_operator(self)?;
        let mut z = self.encode(x);
        for _ in 0..m {
            z = z.matmul_bt(&step);
        }
        Ok(self.decode(&z))
    }
}

/// One sub-step operator `exp(G / k_steps)`.
pub fn step_operator<T: Scalar>(model: &KaeModel<T>) -> Result<Mat<T>, LinalgError> {
    let k = model.k_steps.max(1);
    matrix_exp(&model.generator_g.scale(T::from_f64(1.0 / k as f64)))
}

/// The full operator `K = exp(G/k)^k` (equal to `exp(G)` up to roundoff for
/// every `k`, by the semigroup property).
pub fn koopman_operator<T: Scalar>(model: &KaeModel<T>) -> Result<Mat<T>, LinalgError> {
    let step = step_operator(model)?;
    let mut k_mat = Mat::eye(model.observable_dim());
    for _ in 0..model.k_steps.max(1) {
        k_mat = k_mat.matmul(&step);
    }
    Ok(k_mat)
}

/// Weights of the combined objective, in the order recon, linear, state,
/// dist.
#[derive(Debug, Clone, Copy)]
pub struct KaeLossWeights {
    pub recon: f64,
    pub linear: f64,
    pub state: f64,
    pub dist: f64,
}

impl KaeLossWeights {
    pub fn uniform() -> Self {
        Self {
            recon: 1.0,
            linear: 1.0,
            state: 1.0,
            dist: 1.0,
        }
    }
}

/// The four loss terms plus their weighted total. All reductions are batch
/// means; the recon and dist terms sum the contributions of both pair
/// members.
#[derive(Debug, Clone, Copy, Default)]
pub struct KaeLosses {
    pub total: f64,
    pub recon: f64,
    pub linear: f64,
    pub state: f64,
    pub dist: f64,
}

/// Per-epoch learning-rate schedule for [`train_kae`].
///
/// On unit-Frobenius inputs the per-row signal power is `1/n`, and AdamW's
/// steady-state parameter noise scales with the rate, so a constant rate
/// puts a floor under the loss. `Cosine` anneals through that floor in the
/// tail of the run; it is the default recipe here for that reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrDecay {
    /// The configured rate for every epoch.
    Constant,
    /// Half-cosine decay from the configured rate to zero over the run.
    Cosine,
}

impl LrDecay {
    /// Rate to use for `epoch` of a `total`-epoch run.
    pub fn rate(self, base: f64, epoch: usize, total: usize) -> f64 {
        match self {
            LrDecay::Constant => base,
            LrDecay::Cosine => {
                let t = epoch as f64 / total.max(1) as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

impl std::fmt::Display for LrDecay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LrDecay::Constant => "constant",
            LrDecay::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for LrDecay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(LrDecay::Constant),
            "cosine" => Ok(LrDecay::Cosine),
            other => Err(format!("unknown learning-rate schedule `{other}`")),
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct KaeTrainConfig {
    pub batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: LrDecay,
    pub weight_decay: f64,
    pub weights: KaeLossWeights,
    pub seed: u64,
}

impl KaeTrainConfig {
    /// Yin-Yang recipe: batch 1024, 1000 epochs, lr 3e-2 with cosine decay,
    /// wd 5e-4, all lambdas 1.
    pub fn yinyang(seed: u64) -> Self {
        Self {
            batch: 1024,
            epochs: 1000,
            learning_rate: 3e-2,
            lr_decay: LrDecay::Cosine,
            weight_decay: 5e-4,
            weights: KaeLossWeights::uniform(),
            seed,
        }
    }

    /// MNIST recipe: batch 512, 100 epochs, lr 5e-3 with cosine decay,
    /// wd 5e-4, lambda_dist 1e-3.
    pub fn mnist(seed: u64) -> Self {
        Self {
            batch: 512,
            epochs: 100,
            learning_rate: 5e-3,
            lr_decay: LrDecay::Cosine,
            weight_decay: 5e-4,
            weights: KaeLossWeights {
                dist: 1e-3,
                ..KaeLossWeights::uniform()
            },
            seed,
        }
    }
}

/// Evaluates the four losses and their weighted total on a preprocessed
/// pair, without recording gradients. Training semantics: the operator is
/// `exp(G)`.
pub fn compute_losses<T: Scalar>(
    model: &KaeModel<T>,
    xhat_i: &Mat<T>,
    xhat_j: &Mat<T>,
    weights: &KaeLossWeights,
) -> Result<KaeLosses, Error> {
    if xhat_i.shape() != xhat_j.shape() {
        return Err(Error::InvalidArgument(format!(
            "pair shape mismatch: {:?} vs {:?}",
            xhat_i.shape(),
            xhat_j.shape()
        )));
    }
    let n = xhat_i.rows() as f64;
    let z_i = model.encode(xhat_i);
    let z_j = model.encode(xhat_j);
    let k_mat = matrix_exp(&model.generator_g)?;
    let z_adv = z_i.matmul_bt(&k_mat);

    let recon = (sq_frob(&model.decode(&z_i).sub(xhat_i)) + sq_frob(&model.decode(&z_j).sub(xhat_j))) / n;
    let linear = sq_frob(&z_j.sub(&z_adv)) / n;
    let state = sq_frob(&model.decode(&z_adv).sub(xhat_j)) / n;
    let dist = (norm_gap(xhat_i, &z_i) + norm_gap(xhat_j, &z_j)) / n;
    Ok(KaeLosses {
        total: weights.recon * recon
            + weights.linear * linear
            + weights.state * state
            + weights.dist * dist,
        recon,
        linear,
        state,
        dist,
    })
}

fn sq_frob<T: Scalar>(m: &Mat<T>) -> f64 {
    let f = m.frob_norm();
    f * f
}

/// Inner term of the norm-preservation loss: sum over rows of
/// (||x_r||^2 - ||z_r||^2)^2.
fn norm_gap<T: Scalar>(x: &Mat<T>, z: &Mat<T>) -> f64 {
    (0..x.rows())
        .map(|r| {
            let sx: f64 = x.row(r).iter().map(|v| v.to_f64() * v.to_f64()).sum();
            let sz: f64 = z.row(r).iter().map(|v| v.to_f64() * v.to_f64()).sum();
            (sx - sz) * (sx - sz)
        })
        .sum()
}

/// AdamW training of all encoder/decoder parameters and the generator `G`
/// on a row-aligned preprocessed pair. Returns per-epoch mean losses.
pub fn train_kae<T: Scalar>(
    model: &mut KaeModel<T>,
    xhat_i: &Mat<T>,
    xhat_j: &Mat<T>,
    cfg: &KaeTrainConfig,
) -> Result<Vec<KaeLosses>, Error> {
    if xhat_i.shape() != xhat_j.shape() {
        return Err(Error::InvalidArgument(format!(
            "pair shape mismatch: {:?} vs {:?}",
            xhat_i.shape(),
            xhat_j.shape()
        )));
    }
    if xhat_i.cols() != model.state_dim() {
        return Err(Error::Train(TrainError::Shape {
            context: "train_kae",
            detail: format!(
                "pair dim {} != model state dim {}",
                xhat_i.cols(),
                model.state_dim()
            ),
        }));
    }
    let n = xhat_i.rows();
    let mut optimizer = AdamW::new(cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    let w_recon = T::from_f64(cfg.weights.recon);
    let w_linear = T::from_f64(cfg.weights.linear);
    let w_state = T::from_f64(cfg.weights.state);
    let w_dist = T::from_f64(cfg.weights.dist);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_decay.rate(cfg.learning_rate, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        let mut sums = KaeLosses::default();
        for chunk in order.chunks(cfg.batch) {
            let bi = xhat_i.select_rows(chunk);
            let bj = xhat_j.select_rows(chunk);
            let bn = chunk.len() as f64;
            let inv_n = T::from_f64(1.0 / bn);

            let mut tape = Tape::new();
            let enc: Vec<_> = model.encoder.iter().map(|l| l.stage(&mut tape)).collect();
            let dec: Vec<_> = model.decoder.iter().map(|l| l.stage(&mut tape)).collect();
            let gid = tape.leaf(model.generator_g.clone());
            let xi = tape.leaf(bi.clone());
            let xj = tape.leaf(bj.clone());

            let forward = |tape: &mut Tape<T>, stack: &[crate::nn::StagedDense], x| {
                let mut cur = x;
                for layer in stack {
                    cur = layer.forward(tape, cur);
                }
                cur
            };

            let z_i = forward(&mut tape, &enc, xi);
            let z_j = forward(&mut tape, &enc, xj);
            let rec_i = forward(&mut tape, &dec, z_i);
            let rec_j = forward(&mut tape, &dec, z_j);
            let k_node = tape.expm(gid).map_err(Error::Linalg)?;
            let z_adv = tape.matmul_bt(z_i, k_node);
            let pred_j = forward(&mut tape, &dec, z_adv);

            // Reconstruction of both members, batch-mean.
            let recon = {
                let di = tape.sub(rec_i, xi);
                let dj = tape.sub(rec_j, xj);
                let si = tape.sum_squares(di);
                let sj = tape.sum_squares(dj);
                let s = tape.add(si, sj);
                tape.scale(s, inv_n)
            };
            // Observable advanced by K vs. the true next observable.
            let linear = {
                let d = tape.sub(z_j, z_adv);
                let s = tape.sum_squares(d);
                tape.scale(s, inv_n)
            };
            // End-to-end state prediction.
            let state = {
                let d = tape.sub(pred_j, xj);
                let s = tape.sum_squares(d);
                tape.scale(s, inv_n)
            };
            // Per-row squared-norm preservation, both members.
            let dist = {
                let target_i = {
                    let mut t = tape.row_sum_squares(xi);
                    let zi_n = tape.row_sum_squares(z_i);
                    t = tape.sub(zi_n, t);
                    tape.sum_squares(t)
                };
                let target_j = {
                    let mut t = tape.row_sum_squares(xj);
                    let zj_n = tape.row_sum_squares(z_j);
                    t = tape.sub(zj_n, t);
                    tape.sum_squares(t)
                };
                let s = tape.add(target_i, target_j);
                tape.scale(s, inv_n)
            };

            let total = {
                let a = tape.scale(recon, w_recon);
                let b = tape.scale(linear, w_linear);
                let c = tape.scale(state, w_state);
                let d = tape.scale(dist, w_dist);
                let ab = tape.add(a, b);
                let abc = tape.add(ab, c);
                tape.add(abc, d)
            };

            let total_value = tape.scalar(total);
            if !total_value.is_finite() {
                return Err(Error::Train(TrainError::Diverged { epoch }));
            }
            sums.total += total_value * bn;
            sums.recon += tape.scalar(recon) * bn;
            sums.linear += tape.scalar(linear) * bn;
            sums.state += tape.scalar(state) * bn;
            sums.dist += tape.scalar(dist) * bn;

            let mut grads = tape.backward(total);
            let mut grad_list = Vec::with_capacity(9);
            for (staged, layer) in enc.iter().zip(&model.encoder) {
                let (gw, gb) = staged.grads(&mut grads, layer);
                grad_list.push(gw);
                grad_list.push(gb);
            }
            let p = model.observable_dim();
            grad_list.push(grads.take(gid, p, p));
            for (staged, layer) in dec.iter().zip(&model.decoder) {
                let (gw, gb) = staged.grads(&mut grads, layer);
                grad_list.push(gw);
                grad_list.push(gb);
            }

            let mut params: Vec<&mut Mat<T>> = Vec::with_capacity(9);
            for layer in &mut model.encoder {
                params.push(&mut layer.weight);
                params.push(&mut layer.bias);
            }
            params.push(&mut model.generator_g);
            for layer in &mut model.decoder {
                params.push(&mut layer.weight);
                params.push(&mut layer.bias);
            }
            optimizer.step(&mut params, &grad_list, lr);
        }
        let inv = 1.0 / n as f64;
        history.push(KaeLosses {
            total: sums.total * inv,
            recon: sums.recon * inv,
            linear: sums.linear * inv,
            state: sums.state * inv,
            dist: sums.dist * inv,
        });
    }
    Ok(history)
}

/// Full surrogate pipeline: capture L0 from the host, preprocess with `t_i`,
/// advance with the KAE, undo `t_j`, classify with the host's head.
pub fn surrogate_accuracy(
    model: &KaeModel<f32>,
    t_i: &PreprocessTransform,
    t_j: &PreprocessTransform,
    mlp: &ResidualMlpModel<f32>,
    data: &Dataset,
) -> Result<EvalReport, Error> {
    let rep0 = capture_layers(mlp, data, &[0]).remove(0);
    let xhat_i = t_i.apply_set(&rep0);
    let pred = model
        .predict(&xhat_i.to_f32())
        .map_err(Error::Linalg)?
        .to_f64();
    accuracy_through_head(mlp, t_j, &pred, &data.labels)
}

/// Classifies preprocessed j-side representations by undoing `t_j` and
/// applying the host MLP's head. Shared by surrogate and editing
/// evaluations.
pub fn accuracy_through_head(
    mlp: &ResidualMlpModel<f32>,
    t_j: &PreprocessTransform,
    xhat_j: &Mat<f64>,
    labels: &[usize],
) -> Result<EvalReport, Error> {
    let x_j = t_j.invert(xhat_j)?;
    let logits = mlp.head.apply(&x_j.to_f32());
    let classes = mlp.num_classes();
    let mut correct = vec![0usize; classes];
    let mut counts = vec![0usize; classes];
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        counts[label] += 1;
        if best == label {
            correct[label] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let total_correct: usize = correct.iter().sum();
    Ok(EvalReport {
        overall: 100.0 * total_correct as f64 / total.max(1) as f64,
        per_class: correct
            .iter()
            .zip(&counts)
            .map(|(&c, &n)| 100.0 * c as f64 / n.max(1) as f64)
            .collect(),
        class_counts: counts,
    })
}
