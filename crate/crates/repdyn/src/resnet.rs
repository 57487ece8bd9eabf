//! Residual MLP hosts: definition, training, evaluation and layerwise
//! representation capture.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::Dataset;
use crate::error::TrainError;
use crate::linalg::{Mat, Scalar};
use crate::nn::{Activation, CyclicLrSchedule, DenseLayer, SgdMomentum, StagedDense, Tape};

/// One residual block: `y = x + ReLU(W x + b)`.
#[derive(Debug, Clone)]
pub struct ResBlock<T: Scalar> {
    pub inner: DenseLayer<T>,
}

impl<T: Scalar> ResBlock<T> {
    pub fn forward(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(
            x.cols(),
            self.inner.in_dim(),
            "residual block width mismatch"
        );
        x.add(&self.inner.apply(x))
    }
}

/// `Linear(d_in -> width, ReLU) -> B x ResBlock(width) -> Linear(width -> classes)`.
#[derive(Debug, Clone)]
pub struct ResidualMlpModel<T: Scalar = f32> {
    pub input_layer: DenseLayer<T>,
    pub blocks: Vec<ResBlock<T>>,
    pub head: DenseLayer<T>,
}

impl<T: Scalar> ResidualMlpModel<T> {
    pub fn new(d_in: usize, width: usize, num_blocks: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_layer = DenseLayer::kaiming(d_in, width, Activation::Relu, &mut rng);
        let blocks = (0..num_blocks)
            .map(|_| ResBlock {
                inner: DenseLayer::kaiming(width, width, Activation::Relu, &mut rng),
            })
            .collect();
        let head = DenseLayer::kaiming(width, classes, Activation::Identity, &mut rng);
        Self {
            input_layer,
            blocks,
            head,
        }
    }

    pub fn width(&self) -> usize {
        self.input_layer.out_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.head.out_dim()
    }

    /// Class scores for a batch (no tape).
    pub fn logits(&self, x: &Mat<T>) -> Mat<T> {
        let mut cur = self.input_layer.apply(x);
        for block in &self.blocks {
            cur = block.forward(&cur);
        }
        self.head.apply(&cur)
    }

    /// L0 (input-layer output) through L_B (each block's output); the head
    /// is not applied.
    pub fn representations(&self, x: &Mat<T>) -> Vec<Mat<T>> {
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        out.push(self.input_layer.apply(x));
        for block in &self.blocks {
            let next = block.forward(out.last().unwrap());
            out.push(next);
        }
        out
    }

    fn stage(&self, tape: &mut Tape<T>) -> StagedModel {
        StagedModel {
            input: self.input_layer.stage(tape),
            blocks: self.blocks.iter().map(|b| b.inner.stage(tape)).collect(),
            head: self.head.stage(tape),
        }
    }

    fn param_layers_mut(&mut self) -> Vec<&mut DenseLayer<T>> {
        let mut layers = vec![&mut self.input_layer];
        layers.extend(self.blocks.iter_mut().map(|b| &mut b.inner));
        layers.push(&mut self.head);
        layers
    }
}

struct StagedModel {
    input: StagedDense,
    blocks: Vec<StagedDense>,
    head: StagedDense,
}

impl StagedModel {
    fn logits<T: Scalar>(&self, tape: &mut Tape<T>, x: crate::nn::NodeId) -> crate::nn::NodeId {
        let mut cur = self.input.forward(tape, x);
        for block in &self.blocks {
            let branch = block.forward(tape, cur);
            cur = tape.add(cur, branch);
        }
        self.head.forward(tape, cur)
    }

    fn staged_layers(&self) -> Vec<&StagedDense> {
        let mut out = vec![&self.input];
        out.extend(self.blocks.iter());
        out.push(&self.head);
        out
    }
}

/// Training recipe for [`train_mlp`].
#[derive(Debug, Clone)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub peak_lr: f64,
    pub seed: u64,
    /// Evaluate train/test accuracy every this many epochs (0 = only at the
    /// end). Final-epoch metrics are always recorded.
    pub eval_every: usize,
}

impl MlpTrainConfig {
    /// Yin-Yang recipe: 500 epochs, batch 512, SGD momentum 0.9, weight
    /// decay 5e-4, cyclic learning rate peaking at 0.1.
    pub fn yinyang(seed: u64) -> Self {
        Self {
            epochs: 500,
            batch_size: 512,
            momentum: 0.9,
            weight_decay: 5e-4,
            peak_lr: 0.1,
            seed,
            eval_every: 0,
        }
    }

    /// MNIST recipe: 30 epochs, batch 128, same optimizer family.
    pub fn mnist(seed: u64) -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            momentum: 0.9,
            weight_decay: 5e-4,
            peak_lr: 0.1,
            seed,
            eval_every: 0,
        }
    }
}

/// One accuracy measurement taken during training.
#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

/// Per-class and overall top-1 accuracy, in percent.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalReport {
    pub overall: f64,
    pub per_class: Vec<f64>,
    pub class_counts: Vec<usize>,
}

/// Layer representations of a dataset, labels attached.
#[derive(Debug, Clone)]
pub struct RepresentationSet {
    /// 0 for the input layer's output, `b` for block `b`.
    pub layer: usize,
    pub features: Mat<f32>,
    pub labels: Vec<usize>,
}

/// Cross-entropy training with SGD momentum under a single triangular
/// learning-rate cycle. Deterministic for a fixed seed.
pub fn train_mlp(
    model: &mut ResidualMlpModel<f32>,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &MlpTrainConfig,
) -> Result<Vec<EpochMetrics>, TrainError> {
    if train.dim() != model.input_layer.in_dim() {
        return Err(TrainError::Shape {
            context: "train_mlp",
            detail: format!(
                "dataset dim {} != model input dim {}",
                train.dim(),
                model.input_layer.in_dim()
            ),
        });
    }
    let n = train.len();
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let schedule = CyclicLrSchedule::new(cfg.peak_lr, cfg.epochs * batches_per_epoch);
    let mut optimizer = SgdMomentum::new(cfg.momentum, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = train.features.select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();

            let mut tape = Tape::new();
            let staged = model.stage(&mut tape);
            let xid = tape.leaf(x);
            let logits = staged.logits(&mut tape, xid);
            let loss = tape.cross_entropy(logits, &labels);
            let loss_value = tape.scalar(loss);
            if !loss_value.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            epoch_loss += loss_value * chunk.len() as f64;

            let mut grads = tape.backward(loss);
            let staged_layers = staged.staged_layers();
            let mut grad_list = Vec::with_capacity(staged_layers.len() * 2);
            {
                let layers: Vec<&DenseLayer<f32>> = {
                    let mut v = vec![&model.input_layer];
                    v.extend(model.blocks.iter().map(|b| &b.inner));
                    v.push(&model.head);
                    v
                };
                for (staged_layer, layer) in staged_layers.iter().zip(layers) {
                    let (gw, gb) = staged_layer.grads(&mut grads, layer);
                    grad_list.push(gw);
                    grad_list.push(gb);
                }
            }
            let mut params: Vec<&mut Mat<f32>> = Vec::with_capacity(grad_list.len());
            for layer in model.param_layers_mut() {
                let DenseLayer { weight, bias, .. } = layer;
                params.push(weight);
                params.push(bias);
            }
            optimizer.step(&mut params, &grad_list, schedule.lr(step));
            step += 1;
        }

        let last = epoch + 1 == cfg.epochs;
        if last || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            history.push(EpochMetrics {
                epoch,
                train_loss: epoch_loss / n as f64,
                train_accuracy: evaluate(model, train).overall,
                test_accuracy: test.map(|t| evaluate(model, t).overall),
            });
        }
    }
    Ok(history)
}

/// Top-1 accuracy, overall and per class, in percent.
pub fn evaluate(model: &ResidualMlpModel<f32>, data: &Dataset) -> EvalReport {
    let classes = model.num_classes();
    let mut correct = vec![0usize; classes];
    let mut counts = vec![0usize; classes];
    let chunk_rows = 2048;
    let mut row = 0;
    while row < data.len() {
        let end = (row + chunk_rows).min(data.len());
        let idx: Vec<usize> = (row..end).collect();
        let logits = model.logits(&data.features.select_rows(&idx));
        for (r, &i) in idx.iter().enumerate() {
            let label = data.labels[i];
            counts[label] += 1;
            if argmax(logits.row(r)) == label {
                correct[label] += 1;
            }
        }
        row = end;
    }
    let total: usize = counts.iter().sum();
    let total_correct: usize = correct.iter().sum();
    EvalReport {
        overall: 100.0 * total_correct as f64 / total.max(1) as f64,
        per_class: correct
            .iter()
            .zip(&counts)
            .map(|(&c, &n)| 100.0 * c as f64 / n.max(1) as f64)
            .collect(),
        class_counts: counts,
    }
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Captures L0 through L_B for the whole dataset, batched to bound peak
/// memory. The head is *not* applied.
pub fn capture_representations(
    model: &ResidualMlpModel<f32>,
    data: &Dataset,
) -> Vec<RepresentationSet> {
    let layers: Vec<usize> = (0..=model.blocks.len()).collect();
    capture_layers(model, data, &layers)
}

/// Captures only the requested layer indices (0 = input-layer output).
pub fn capture_layers(
    model: &ResidualMlpModel<f32>,
    data: &Dataset,
    layers: &[usize],
) -> Vec<RepresentationSet> {
    assert!(
        layers.iter().all(|&l| l <= model.blocks.len()),
        "layer index out of range"
    );
    let width = model.width();
    let mut sets: Vec<RepresentationSet> = layers
        .iter()
        .map(|&layer| RepresentationSet {
            layer,
            features: Mat::zeros(data.len(), width),
            labels: data.labels.clone(),
        })
        .collect();
    let chunk_rows = 4096;
    let mut row = 0;
    while row < data.len() {
        let end = (row + chunk_rows).min(data.len());
        let idx: Vec<usize> = (row..end).collect();
        let reps = model.representations(&data.features.select_rows(&idx));
        for (set_idx, &layer) in layers.iter().enumerate() {
            for (r, &i) in idx.iter().enumerate() {
                sets[set_idx]
                    .features
                    .row_mut(i)
                    .copy_from_slice(reps[layer].row(r));
            }
        }
        row = end;
    }
    sets
}
