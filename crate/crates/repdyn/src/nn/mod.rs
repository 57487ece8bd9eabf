//! Minimal neural-network engine: dense layers, reverse-mode gradients,
//! SGD-with-momentum / AdamW optimizers and a cyclic learning-rate schedule.

mod optim;
mod tape;

pub use optim::{AdamW, CyclicLrSchedule, SgdMomentum};
pub use tape::{Gradients, NodeId, Tape};

use crate::linalg::{Mat, Scalar};
use rand::Rng;

/// Activation applied after a dense layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// Negative-side slope (0.01 unless configured otherwise).
    LeakyRelu(f64),
}

/// Fully connected layer `y = act(x W^T + b)` with `weight` of shape
/// `out x in` and `bias` a `1 x out` row.
#[derive(Debug, Clone)]
pub struct DenseLayer<T: Scalar> {
    pub weight: Mat<T>,
    pub bias: Mat<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    /// Kaiming-style uniform initialization: weights from
    /// `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero bias.
    pub fn kaiming(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        let weight = Mat::from_fn(out_dim, in_dim, |_, _| {
            T::from_f64(rng.gen_range(-bound..bound))
        });
        Self {
            weight,
            bias: Mat::zeros(1, out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Inference-only forward (no tape).
    pub fn apply(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(
            x.cols(),
            self.in_dim(),
            "input width {} does not match layer in-dim {}",
            x.cols(),
            self.in_dim()
        );
        let mut y = x.matmul_bt(&self.weight);
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                y[(r, c)] += self.bias[(0, c)];
            }
        }
        match self.activation {
            Activation::Identity => y,
            Activation::Relu => y.map(|v| if v > T::ZERO { v } else { T::ZERO }),
            Activation::LeakyRelu(slope) => {
                let s = T::from_f64(slope);
                y.map(|v| if v > T::ZERO { v } else { v * s })
            }
        }
    }

    /// Registers this layer's parameters as tape leaves for one training
    /// step.
    pub fn stage(&self, tape: &mut Tape<T>) -> StagedDense {
        StagedDense {
            weight: tape.leaf(self.weight.clone()),
            bias: tape.leaf(self.bias.clone()),
            activation: self.activation,
        }
    }
}

/// A [`DenseLayer`] whose parameters live on a tape as differentiable leaves.
#[derive(Debug, Clone, Copy)]
pub struct StagedDense {
    pub weight: NodeId,
    pub bias: NodeId,
    activation: Activation,
}

impl StagedDense {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: NodeId) -> NodeId {
        let lin = tape.matmul_bt(x, self.weight);
        let pre = tape.add_row(lin, self.bias);
        match self.activation {
            Activation::Identity => pre,
            Activation::Relu => tape.relu(pre),
            Activation::LeakyRelu(slope) => tape.leaky_relu(pre, T::from_f64(slope)),
        }
    }

    /// Pulls the (weight, bias) gradients for a layer shaped like `layer`.
    pub fn grads<T: Scalar>(
        &self,
        grads: &mut Gradients<T>,
        layer: &DenseLayer<T>,
    ) -> (Mat<T>, Mat<T>) {
        (
            grads.take(self.weight, layer.out_dim(), layer.in_dim()),
            grads.take(self.bias, 1, layer.out_dim()),
        )
    }
}

/// Inference pass through a stack of layers.
pub fn apply_layers<T: Scalar>(layers: &[DenseLayer<T>], x: &Mat<T>) -> Mat<T> {
    let mut cur = x.clone();
    for layer in layers {
        cur = layer.apply(&cur);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    // identity layer with W = I, b = 0 passes input through.
    #[test]
    fn identity_layer_passthrough() {
        let layer = DenseLayer {
            weight: Mat::<f64>::eye(3),
            bias: Mat::zeros(1, 3),
            activation: Activation::Identity,
        };
        let x = Mat::from_rows(&[&[1.0, -2.0, 0.5]]);
        assert!(crate::linalg::frob_dist(&layer.apply(&x), &x) < 1e-15);
    }

    // ReLU on all-negative pre-activations outputs zero.
    #[test]
    fn relu_kills_negative_preactivations() {
        let layer = DenseLayer {
            weight: Mat::<f64>::eye(2).scale(-1.0),
            bias: Mat::zeros(1, 2),
            activation: Activation::Relu,
        };
        let x = Mat::from_rows(&[&[3.0, 7.0]]);
        let y = layer.apply(&x);
        assert_eq!(y.as_slice(), &[0.0, 0.0]);
    }

    // two-layer chain against a scalar-by-scalar recomputation.
    #[test]
    fn two_layer_chain_matches_manual_product() {
        let mut rng = StdRng::seed_from_u64(61);
        let l1 = DenseLayer::<f64>::kaiming(3, 4, Activation::LeakyRelu(0.01), &mut rng);
        let l2 = DenseLayer::<f64>::kaiming(4, 2, Activation::Identity, &mut rng);
        let x = Mat::from_rows(&[&[0.3, -1.1, 0.9], &[2.0, 0.1, -0.4]]);
        let got = apply_layers(&[l1.clone(), l2.clone()], &x);

        for r in 0..2 {
            // Hidden layer, scalar loops.
            let mut h = [0.0f64; 4];
            for o in 0..4 {
                let mut acc = l1.bias[(0, o)];
                for i in 0..3 {
                    acc += x[(r, i)] * l1.weight[(o, i)];
                }
                h[o] = if acc > 0.0 { acc } else { 0.01 * acc };
            }
            for o in 0..2 {
                let mut acc = l2.bias[(0, o)];
                for (i, hv) in h.iter().enumerate() {
                    acc += hv * l2.weight[(o, i)];
                }
                assert!((got[(r, o)] - acc).abs() < 1e-12);
            }
        }
    }

    // Staged forward agrees with the inference path.
    #[test]
    fn staged_forward_matches_apply() {
        let mut rng = StdRng::seed_from_u64(62);
        let layer = DenseLayer::<f64>::kaiming(5, 3, Activation::Relu, &mut rng);
        let x = Mat::from_fn(7, 5, |r, c| ((r * 5 + c) as f64).sin());
        let mut tape = Tape::new();
        let xid = tape.leaf(x.clone());
        let staged = layer.stage(&mut tape);
        let out = staged.forward(&mut tape, xid);
        assert!(crate::linalg::frob_dist(tape.value(out), &layer.apply(&x)) < 1e-14);
    }

    // Kaiming bound scales with fan-in.
    #[test]
    fn kaiming_respects_fan_in_bound() {
        let mut rng = StdRng::seed_from_u64(63);
        let layer = DenseLayer::<f64>::kaiming(100, 50, Activation::Relu, &mut rng);
        let bound = (6.0f64 / 100.0).sqrt();
        for &w in layer.weight.as_slice() {
            assert!(w.abs() <= bound);
        }
        assert!(layer.bias.as_slice().iter().all(|&b| b == 0.0));
    }
}
