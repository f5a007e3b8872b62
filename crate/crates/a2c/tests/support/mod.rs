//! Finite-difference gradient check on the miniature network over a short
//! sequence with hidden-state resets, and a brute-force returns oracle.
#![allow(dead_code)]

use raymaze_a2c::arch::{Arch, Params};
use raymaze_a2c::loss::{a2c_loss, LossWeights};
use raymaze_a2c::net::{Net, StepCache};
use raymaze_core::rng::Rng;

const STEPS: usize = 4;
const BATCH: usize = 3;

struct Problem {
    arch: Arch,
    inputs: Vec<Vec<f64>>,
    resets: Vec<Vec<bool>>,
    h0: Vec<f64>,
    actions: Vec<Vec<usize>>,
    returns: Vec<Vec<f64>>,
    advantages: Vec<Vec<f64>>,
}

fn problem(seed: u64) -> (Problem, Params<f64>) {
    let arch = Arch::miniature();
    let mut rng = Rng::new(seed);
    let mut params: Params<f64> = Params::init(&arch, seed);
    // Non-zero biases and slightly larger weights exercise every path.
    for t in &mut params.tensors {
        for v in t.iter_mut() {
            *v = *v * 1.5 + 0.1 * rng.normal();
        }
    }
    let inputs = (0..STEPS).map(|_| (0..BATCH * arch.input_len()).map(|_| rng.unit_f64()).collect()).collect();
    let resets = vec![vec![false; BATCH], vec![false, true, false], vec![false; BATCH], vec![true, false, false]];
    let h0 = (0..BATCH * arch.hidden).map(|_| 0.5 * rng.normal()).collect();
    let actions = (0..STEPS).map(|_| (0..BATCH).map(|_| rng.index(arch.actions)).collect()).collect();
    let returns = (0..STEPS).map(|_| (0..BATCH).map(|_| rng.normal()).collect()).collect();
    let advantages = (0..STEPS).map(|_| (0..BATCH).map(|_| rng.normal()).collect()).collect();
    (Problem { arch, inputs, resets, h0, actions, returns, advantages }, params)
}

/// Loss and (optionally) analytic gradient for one weighting of the terms.
fn evaluate(p: &Problem, params: &Params<f64>, w: LossWeights, grads: Option<&mut Params<f64>>) -> f64 {
    let net = Net::new(p.arch.clone(), params.clone()).unwrap();
    let na = p.arch.actions;
    let mut caches: Vec<StepCache<f64>> = (0..STEPS).map(|_| StepCache::default()).collect();
    let mut h = p.h0.clone();
    let mut total = 0.0;
    let mut dlogits = vec![vec![0.0; BATCH * na]; STEPS];
    let mut dvalues = vec![vec![0.0; BATCH]; STEPS];
    for t in 0..STEPS {
        net.forward(&p.inputs[t], BATCH, &h, &p.resets[t], &mut caches[t]).unwrap();
        h = caches[t].hidden.clone();
        let c = &caches[t];
        total += a2c_loss(
            &c.logits,
            &c.values,
            &p.actions[t],
            &p.returns[t],
            Some(&p.advantages[t]),
            w,
            STEPS * BATCH,
            &mut dlogits[t],
            &mut dvalues[t],
        )
        .total;
    }
    if let Some(g) = grads {
        g.fill_zero();
        let mut dh = vec![0.0; BATCH * p.arch.hidden];
        for t in (0..STEPS).rev() {
            net.backward_step(&p.inputs[t], &mut caches[t], &dlogits[t], &dvalues[t], &mut dh, g);
        }
    }
    total
}

/// Global relative error between analytic and central-difference gradients,
/// and the analytic gradient norm.
pub fn gradient_error(w: LossWeights) -> (f64, f64) {
    let (p, params) = problem(11);
    let mut analytic = params.zeros_like();
    evaluate(&p, &params, w, Some(&mut analytic));
    let eps = 1e-6;
    let mut numeric = params.zeros_like();
    let mut probe = params.clone();
    for (ti, t) in params.tensors.iter().enumerate() {
        for (i, &x) in t.iter().enumerate() {
            probe.tensors[ti][i] = x + eps;
            let up = evaluate(&p, &probe, w, None);
            probe.tensors[ti][i] = x - eps;
            let down = evaluate(&p, &probe, w, None);
            probe.tensors[ti][i] = x;
            numeric.tensors[ti][i] = (up - down) / (2.0 * eps);
        }
    }
    let mut diff = 0.0;
    let mut scale_a = 0.0;
    let mut scale_n = 0.0;
    for (a, n) in analytic.tensors.iter().flatten().zip(numeric.tensors.iter().flatten()) {
        diff += (a - n) * (a - n);
        scale_a += a * a;
        scale_n += n * n;
    }
    (diff.sqrt() / f64::max(scale_a.sqrt(), scale_n.sqrt()), scale_a.sqrt())
}

/// Forward summation: R_t = Σ_{k≥t} γ^{k-t} r_k up to and including the
/// first terminal step, plus γ^{T-t} V if no terminal step follows t.
pub fn forward_sum(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let mut acc = 0.0;
            let mut discount = 1.0;
            for k in t..rewards.len() {
                acc += discount * rewards[k];
                if dones[k] {
                    return acc;
                }
                discount *= gamma;
            }
            acc + discount * bootstrap
        })
        .collect()
}
