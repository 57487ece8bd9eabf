//! Tape-based reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation together with the values it produced,
//! so `backward` replays the graph in reverse without re-running any forward
//! computation. Because node values are captured on the tape at record time,
//! a tape can never silently disagree with mutated parameters: gradients are
//! always taken at exactly the recorded values.

use crate::error::LinalgError;
use crate::linalg::{ExpmTrace, Mat, Scalar};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<T: Scalar> {
    /// Input or parameter; gradients accumulate here.
    Leaf,
    /// `a @ b`.
    MatMul { a: NodeId, b: NodeId },
    /// `a @ b.T`.
    MatMulBt { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    /// Broadcast a `1 x p` bias row over every row of `a`.
    AddRow { a: NodeId, bias: NodeId },
    Scale { a: NodeId, factor: T },
    Relu { a: NodeId },
    LeakyRelu { a: NodeId, slope: T },
    /// Matrix exponential with its saved forward trace.
    Expm { a: NodeId, trace: ExpmTrace<T> },
    /// Sum of all squared entries, a `1 x 1` node.
    SumSquares { a: NodeId },
    /// Per-row sum of squared entries, an `n x 1` node.
    RowSumSquares { a: NodeId },
    /// Mean softmax cross-entropy of `logits` against integer labels;
    /// softmax probabilities are kept for the closed-form backward.
    CrossEntropy { logits: NodeId, probs: Mat<T> },
}

struct Node<T: Scalar> {
    value: Mat<T>,
    op: Op<T>,
}

/// Recorded computation graph. Nodes only reference earlier nodes, so the
/// insertion order is already topological.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Mat<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Mat<T> {
        &self.nodes[id.0].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "scalar() on a non-scalar node");
        v[(0, 0)].to_f64()
    }

    /// Registers an input or parameter value.
    pub fn leaf(&mut self, value: Mat<T>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul { a, b })
    }

    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul_bt(self.value(b));
        self.push(v, Op::MatMulBt { a, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        self.push(v, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).sub(self.value(b));
        self.push(v, Op::Sub { a, b })
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(bias);
        assert_eq!(bv.rows(), 1, "bias must be a row vector");
        assert_eq!(bv.cols(), av.cols(), "bias width mismatch");
        let mut v = av.clone();
        for r in 0..v.rows() {
            for c in 0..v.cols() {
                v[(r, c)] += bv[(0, c)];
            }
        }
        self.push(v, Op::AddRow { a, bias })
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> NodeId {
        let v = self.value(a).scale(factor);
        self.push(v, Op::Scale { a, factor })
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| if x > T::ZERO { x } else { T::ZERO });
        self.push(v, Op::Relu { a })
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: T) -> NodeId {
        let v = self
            .value(a)
            .map(|x| if x > T::ZERO { x } else { x * slope });
        self.push(v, Op::LeakyRelu { a, slope })
    }

    pub fn expm(&mut self, a: NodeId) -> Result<NodeId, LinalgError> {
        let trace = ExpmTrace::forward(self.value(a))?;
        let v = trace.result().clone();
        Ok(self.push(v, Op::Expm { a, trace }))
    }

    pub fn sum_squares(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self
            .value(a)
            .as_slice()
            .iter()
            .map(|x| {
                let v = x.to_f64();
                v * v
            })
            .sum();
        let v = Mat::from_vec(1, 1, vec![T::from_f64(s)]);
        self.push(v, Op::SumSquares { a })
    }

    pub fn row_sum_squares(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let mut out = Mat::zeros(av.rows(), 1);
        for r in 0..av.rows() {
            let s: f64 = av
                .row(r)
                .iter()
                .map(|x| {
                    let v = x.to_f64();
                    v * v
                })
                .sum();
            out[(r, 0)] = T::from_f64(s);
        }
        self.push(out, Op::RowSumSquares { a })
    }

    /// Mean softmax cross-entropy against integer class labels (a `1 x 1`
    /// node). Log-sum-exp is stabilized by the row max.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> NodeId {
        let lv = self.value(logits);
        let n = lv.rows();
        assert_eq!(labels.len(), n, "one label per logit row");
        let classes = lv.cols();
        let mut probs = Mat::zeros(n, classes);
        let mut total = 0.0f64;
        for r in 0..n {
            assert!(labels[r] < classes, "label {} out of range", labels[r]);
            let row = lv.row(r);
            let maxv = row
                .iter()
                .map(|x| x.to_f64())
                .fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0f64;
            for c in 0..classes {
                denom += (row[c].to_f64() - maxv).exp();
            }
            let log_denom = denom.ln() + maxv;
            total -= row[labels[r]].to_f64() - log_denom;
            for c in 0..classes {
                probs[(r, c)] = T::from_f64((row[c].to_f64() - log_denom).exp());
            }
        }
        let v = Mat::from_vec(1, 1, vec![T::from_f64(total / n as f64)]);
        // Fold the label one-hots into the stored probabilities so backward
        // is a plain scaled read: d logits = g * (probs - onehot) / n.
        for (r, &y) in labels.iter().enumerate() {
            probs[(r, y)] -= T::ONE;
        }
        self.push(v, Op::CrossEntropy { logits, probs })
    }

    /// Gradients of the `1 x 1` node `root` with respect to every node.
    pub fn backward(&self, root: NodeId) -> Gradients<T> {
        assert_eq!(
            self.value(root).shape(),
            (1, 1),
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<Mat<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Mat::from_vec(1, 1, vec![T::ONE]));

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul { a, b } => {
                    // c = a b: da += g b^T, db += a^T g.
                    let (av, bv) = (self.value(*a), self.value(*b));
                    g.gemm_into(false, bv, true, T::ONE, T::ONE, ensure(&mut grads, *a, av));
                    av.gemm_into(true, &g, false, T::ONE, T::ONE, ensure(&mut grads, *b, bv));
                }
                Op::MatMulBt { a, b } => {
                    // c = a b^T: da += g b, db += g^T a.
                    let (av, bv) = (self.value(*a), self.value(*b));
                    g.gemm_into(false, bv, false, T::ONE, T::ONE, ensure(&mut grads, *a, av));
                    g.gemm_into(true, av, false, T::ONE, T::ONE, ensure(&mut grads, *b, bv));
                }
                Op::Add { a, b } => {
                    ensure(&mut grads, *a, self.value(*a)).add_assign(&g);
                    ensure(&mut grads, *b, self.value(*b)).add_assign(&g);
                }
                Op::Sub { a, b } => {
                    ensure(&mut grads, *a, self.value(*a)).add_assign(&g);
                    ensure(&mut grads, *b, self.value(*b)).axpy(-T::ONE, &g);
                }
                Op::AddRow { a, bias } => {
                    ensure(&mut grads, *a, self.value(*a)).add_assign(&g);
                    let gb = ensure(&mut grads, *bias, self.value(*bias));
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            gb[(0, c)] += g[(r, c)];
                        }
                    }
                }
                Op::Scale { a, factor } => {
                    ensure(&mut grads, *a, self.value(*a)).axpy(*factor, &g);
                }
                Op::Relu { a } => {
                    let av = self.value(*a);
                    let ga = ensure(&mut grads, *a, av);
                    for (i, (&x, &gv)) in av.as_slice().iter().zip(g.as_slice()).enumerate() {
                        if x > T::ZERO {
                            ga.as_mut_slice()[i] += gv;
                        }
                    }
                }
                Op::LeakyRelu { a, slope } => {
                    let av = self.value(*a);
                    let ga = ensure(&mut grads, *a, av);
                    for (i, (&x, &gv)) in av.as_slice().iter().zip(g.as_slice()).enumerate() {
                        ga.as_mut_slice()[i] += if x > T::ZERO { gv } else { gv * *slope };
                    }
                }
                Op::Expm { a, trace } => {
                    let da = trace.backward(&g);
                    ensure(&mut grads, *a, self.value(*a)).add_assign(&da);
                }
                Op::SumSquares { a } => {
                    let g0 = g[(0, 0)];
                    let two = T::from_f64(2.0);
                    ensure(&mut grads, *a, self.value(*a)).axpy(two * g0, self.value(*a));
                }
                Op::RowSumSquares { a } => {
                    let av = self.value(*a);
                    let ga = ensure(&mut grads, *a, av);
                    let two = T::from_f64(2.0);
                    for r in 0..av.rows() {
                        let gr = two * g[(r, 0)];
                        for c in 0..av.cols() {
                            ga[(r, c)] += gr * av[(r, c)];
                        }
                    }
                }
                Op::CrossEntropy { logits, probs } => {
                    // probs already holds softmax - onehot.
                    let inv_n = T::from_f64(1.0 / probs.rows() as f64);
                    let g0 = g[(0, 0)];
                    ensure(&mut grads, *logits, probs).axpy(g0 * inv_n, probs);
                }
            }
        }
        Gradients { grads }
    }
}

/// Lazily materializes the gradient buffer for `id`.
fn ensure<'g, T: Scalar>(
    grads: &'g mut [Option<Mat<T>>],
    id: NodeId,
    like: &Mat<T>,
) -> &'g mut Mat<T> {
    grads[id.0].get_or_insert_with(|| Mat::zeros(like.rows(), like.cols()))
}

/// Result of [`Tape::backward`]: per-node gradient buffers.
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Mat<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the root with respect to node `id`, if the node
    /// influenced the root at all.
    pub fn get(&self, id: NodeId) -> Option<&Mat<T>> {
        self.grads[id.0].as_ref()
    }

    /// Moves the gradient buffer out, or returns zeros for unused nodes.
    pub fn take(&mut self, id: NodeId, rows: usize, cols: usize) -> Mat<T> {
        self.grads[id.0]
            .take()
            .unwrap_or_else(|| Mat::zeros(rows, cols))
    }
}
