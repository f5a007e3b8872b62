use serde::{Deserialize, Serialize};

use crate::arch::Params;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Rmsprop,
    Sgd,
}

/// Scales `grads` so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut Params<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(T::of(max_norm / (norm + 1e-6)));
    }
    norm
}

/// `v ← α v + (1 - α) g²`, `θ ← θ - lr g / (√v + ε)`; plain SGD ignores `v`.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
    pub square_avg: Params<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, params: &Params<T>) -> Self {
        Optimizer { kind, lr, alpha: 0.99, eps: 1e-5, square_avg: params.zeros_like() }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        let lr = T::of(self.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.tensors.iter_mut().flatten().zip(grads.tensors.iter().flatten()) {
                    *p = *p - lr * *g;
                }
            }
            OptimizerKind::Rmsprop => {
                let (alpha, eps) = (T::of(self.alpha), T::of(self.eps));
                let one = T::one();
                for ((p, g), v) in params
                    .tensors
                    .iter_mut()
                    .flatten()
                    .zip(grads.tensors.iter().flatten())
                    .zip(self.square_avg.tensors.iter_mut().flatten())
                {
                    *v = alpha * *v + (one - alpha) * *g * *g;
                    *p = *p - lr * *g / (v.sqrt() + eps);
                }
            }
        }
    }
}
