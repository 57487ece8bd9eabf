//! Optimizers and learning-rate scheduling.

use crate::linalg::{Mat, Scalar};

/// SGD with classical momentum and (coupled) weight decay:
///
/// ```text
/// v <- momentum * v + g + weight_decay * p
/// p <- p - lr * v
/// ```
pub struct SgdMomentum<T: Scalar> {
    momentum: f64,
    weight_decay: f64,
    velocity: Vec<Mat<T>>,
}

impl<T: Scalar> SgdMomentum<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// One update over a parameter list; the list's length and ordering must
    /// stay fixed across steps (buffers are keyed by position).
    pub fn step(&mut self, params: &mut [&mut Mat<T>], grads: &[Mat<T>], lr: f64) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.velocity.is_empty() {
            self.velocity = params
                .iter()
                .map(|p| Mat::zeros(p.rows(), p.cols()))
                .collect();
        }
        assert_eq!(self.velocity.len(), params.len(), "parameter list changed");
        let mu = T::from_f64(self.momentum);
        let wd = T::from_f64(self.weight_decay);
        let step = T::from_f64(lr);
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            assert_eq!(p.shape(), g.shape(), "gradient shape mismatch");
            for ((pv, &gv), vv) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(v.as_mut_slice())
            {
                *vv = mu * *vv + gv + wd * *pv;
                *pv -= step * *vv;
            }
        }
    }
}

/// AdamW: decoupled weight decay applied to the parameter before the Adam
/// moment update.
pub struct AdamW<T: Scalar> {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step_count: u64,
    m: Vec<Mat<T>>,
    v: Vec<Mat<T>>,
}

impl<T: Scalar> AdamW<T> {
    /// Standard moment coefficients (0.9, 0.999, 1e-8).
    pub fn new(weight_decay: f64) -> Self {
        Self::with_betas(0.9, 0.999, 1e-8, weight_decay)
    }

    pub fn with_betas(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            weight_decay,
            step_count: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Mat<T>], grads: &[Mat<T>], lr: f64) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.m.is_empty() {
            self.m = params
                .iter()
                .map(|p| Mat::zeros(p.rows(), p.cols()))
                .collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "parameter list changed");
        self.step_count += 1;
        let t = self.step_count as i32;
        // Bias corrections folded into a single scalar step size.
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = T::from_f64(1.0 - lr * self.weight_decay);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            assert_eq!(p.shape(), g.shape(), "gradient shape mismatch");
            for (((pv, &gv), mv), vv) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *pv *= decay;
                let g64 = gv.to_f64();
                let m64 = self.beta1 * mv.to_f64() + (1.0 - self.beta1) * g64;
                let v64 = self.beta2 * vv.to_f64() + (1.0 - self.beta2) * g64 * g64;
                *mv = T::from_f64(m64);
                *vv = T::from_f64(v64);
                let update = lr * (m64 / bc1) / ((v64 / bc2).sqrt() + self.eps);
                *pv -= T::from_f64(update);
            }
        }
    }
}

/// Single triangular learning-rate cycle: linear ramp from
/// `peak_lr * base_fraction` up to `peak_lr` at `total_steps / 2`, then back
/// down. Continuous and piecewise-linear.
#[derive(Debug, Clone)]
pub struct CyclicLrSchedule {
    pub peak_lr: f64,
    pub total_steps: usize,
    pub base_fraction: f64,
}

impl CyclicLrSchedule {
    /// The default base is peak / 25.
    pub fn new(peak_lr: f64, total_steps: usize) -> Self {
        Self {
            peak_lr,
            total_steps,
            base_fraction: 1.0 / 25.0,
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        let base = self.peak_lr * self.base_fraction;
        if self.total_steps == 0 {
            return base;
        }
        let t = (step.min(self.total_steps) as f64) / self.total_steps as f64;
        // Triangle: 0 at t=0 and t=1, 1 at t=1/2.
        let tri = 1.0 - (2.0 * t - 1.0).abs();
        base + (self.peak_lr - base) * tri
    }
}
