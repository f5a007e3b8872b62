//! Actor-critic objective and its gradient w.r.t. logits and values.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Coefficients of the three loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub policy: f64,
    /// λ
    pub value: f64,
    /// β
    pub entropy: f64,
}

impl LossWeights {
    pub fn new(value: f64, entropy: f64) -> Self {
        LossWeights { policy: 1.0, value, entropy }
    }
}

/// Batch means of each term and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    /// Mean `-log π(a|s) A`.
    pub policy: f64,
    /// Mean `(R - V)²`.
    pub value: f64,
    /// Mean `H(π(·|s))`.
    pub entropy: f64,
}

impl LossTerms {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.policy.is_finite() && self.value.is_finite() && self.entropy.is_finite()
    }
}

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = z - lse;
    }
}

pub fn entropy(logits: &[f64]) -> f64 {
    let mut lp = vec![0.0; logits.len()];
    log_softmax(logits, &mut lp);
    -lp.iter().map(|&l| l.exp() * l).sum::<f64>()
}

/// Adds this chunk's contribution to the loss
/// `(1/M) Σ [ -log π(a|s) A + λ (R - V)² - β H(π(·|s)) ]`, where `M` is
/// `denominator`, and writes the gradients w.r.t. `logits` (`[B, A]`) and
/// `values` (`[B]`) into `dlogits` / `dvalues`.
///
/// `advantages` are treated as constants; when absent they are
/// `R - V` evaluated at the given values.
#[allow(clippy::too_many_arguments)]
pub fn a2c_loss<T: Scalar>(
    logits: &[T],
    values: &[T],
    actions: &[usize],
    returns: &[f64],
    advantages: Option<&[f64]>,
    weights: LossWeights,
    denominator: usize,
    dlogits: &mut [T],
    dvalues: &mut [T],
) -> LossTerms {
    let batch = actions.len();
    let na = logits.len() / batch.max(1);
    let m = denominator.max(1) as f64;
    let mut terms = LossTerms::default();
    let mut z = vec![0.0; na];
    let mut lp = vec![0.0; na];
    for b in 0..batch {
        for (d, s) in z.iter_mut().zip(&logits[b * na..(b + 1) * na]) {
            *d = s.as_f64();
        }
        log_softmax(&z, &mut lp);
        let v = values[b].as_f64();
        let ret = returns[b];
        let adv = advantages.map_or(ret - v, |a| a[b]);
        let a = actions[b];
        let h = -lp.iter().map(|&l| l.exp() * l).sum::<f64>();
        terms.policy += -lp[a] * adv / m;
        terms.value += (ret - v) * (ret - v) / m;
        terms.entropy += h / m;
        for j in 0..na {
            let p = lp[j].exp();
            let onehot = if j == a { 1.0 } else { 0.0 };
            let g = weights.policy * (p - onehot) * adv + weights.entropy * p * (lp[j] + h);
            dlogits[b * na + j] = T::of(g / m);
        }
        dvalues[b] = T::of(-2.0 * weights.value * (ret - v) / m);
    }
    terms.total = weights.policy * terms.policy + weights.value * terms.value - weights.entropy * terms.entropy;
    terms
}
