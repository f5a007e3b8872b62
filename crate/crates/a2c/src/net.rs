//! Recurrent actor-critic network: forward step with cached activations and
//! truncated backpropagation through time over a rollout.

use crate::arch::{Arch, Layout, Params};
use crate::error::{Error, Result};
use crate::layers::{self, ConvGeom, GruCache};
use crate::scalar::Scalar;

/// Converts `batch` channel-first byte frames into the network's
/// channel-major input layout, scaled to `[0, 1]`.
pub fn frames_to_input<T: Scalar>(arch: &Arch, frames: &[u8], batch: usize, out: &mut Vec<T>) -> Result<()> {
    let frame = arch.input_len();
    if frames.len() != batch * frame {
        return Err(Error::InvalidArgument(format!(
            "expected {} bytes of observations, got {}",
            batch * frame,
            frames.len()
        )));
    }
    let plane = arch.height * arch.width;
    out.resize(batch * frame, T::zero());
    let scale = T::of(1.0 / 255.0);
    for b in 0..batch {
        for c in 0..arch.in_channels {
            let src = &frames[b * frame + c * plane..][..plane];
            let dst = &mut out[(c * batch + b) * plane..][..plane];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = T::of(s as f64) * scale;
            }
        }
    }
    Ok(())
}

/// Activations of one forward step, kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct StepCache<T> {
    pub batch: usize,
    /// Post-ReLU conv outputs, channel-major.
    convs: Vec<Vec<T>>,
    /// Last conv output flattened per sample, `[B, flat]`.
    flat: Vec<T>,
    /// Post-ReLU projection, `[B, fc]`.
    fc: Vec<T>,
    /// Which samples had their incoming hidden state zeroed.
    reset: Vec<bool>,
    /// Hidden state entering the GRU after masking, `[B, H]`.
    h_in: Vec<T>,
    gru: GruCache<T>,
    /// `[B, H]`
    pub hidden: Vec<T>,
    /// `[B, A]`
    pub logits: Vec<T>,
    /// `[B]`
    pub values: Vec<T>,
    col: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct Net<T> {
    arch: Arch,
    layout: Layout,
    geoms: Vec<ConvGeom>,
    pub params: Params<T>,
}

impl<T: Scalar> Net<T> {
    pub fn new(arch: Arch, params: Params<T>) -> Result<Self> {
        arch.validate()?;
        if !params.matches(&arch) {
            return Err(Error::InvalidArgument("parameter shapes do not match the architecture".into()));
        }
        let shapes = arch.feature_shapes();
        let geoms = arch
            .convs
            .iter()
            .enumerate()
            .map(|(i, c)| ConvGeom {
                in_c: shapes[i].0,
                in_h: shapes[i].1,
                in_w: shapes[i].2,
                out_c: c.out_channels,
                kernel: c.kernel,
                stride: c.stride,
                out_h: shapes[i + 1].1,
                out_w: shapes[i + 1].2,
            })
            .collect();
        Ok(Net { layout: arch.layout(), arch, geoms, params })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    fn p(&self, i: usize) -> &[T] {
        &self.params.tensors[i]
    }

    /// One step for `batch` samples. `input` is channel-major
    /// (`[C, B, H, W]`), `h_prev` is `[B, H]`; samples with `reset` set start
    /// from a zero hidden state. Results land in `cache.logits`,
    /// `cache.values` and `cache.hidden`.
    pub fn forward(&self, input: &[T], batch: usize, h_prev: &[T], reset: &[bool], cache: &mut StepCache<T>) -> Result<()> {
        let a = &self.arch;
        let l = self.layout;
        let hid = a.hidden;
        if input.len() != batch * a.input_len() || h_prev.len() != batch * hid || reset.len() != batch {
            return Err(Error::InvalidArgument(format!(
                "forward shapes: input {}, hidden {}, reset {} for batch {batch}",
                input.len(),
                h_prev.len(),
                reset.len()
            )));
        }
        cache.batch = batch;
        cache.convs.resize(self.geoms.len(), Vec::new());
        for (i, g) in self.geoms.iter().enumerate() {
            let mut out = std::mem::take(&mut cache.convs[i]);
            out.resize(g.out_len(batch), T::zero());
            let src: &[T] = if i == 0 { input } else { &cache.convs[i - 1] };
            layers::conv_relu_forward(g, batch, self.p(l.conv_w(i)), self.p(l.conv_b(i)), src, &mut cache.col, &mut out);
            cache.convs[i] = out;
        }
        // [C, B, P] -> [B, C*P]
        let last = self.geoms.last().expect("validated arch has convs");
        let plane = last.out_plane();
        let flat_dim = a.flat_dim();
        cache.flat.resize(batch * flat_dim, T::zero());
        let top = cache.convs.last().unwrap();
        for c in 0..last.out_c {
            for b in 0..batch {
                cache.flat[b * flat_dim + c * plane..][..plane].copy_from_slice(&top[(c * batch + b) * plane..][..plane]);
            }
        }
        cache.fc.resize(batch * a.fc, T::zero());
        layers::linear_forward(&cache.flat, self.p(l.fc_w()), self.p(l.fc_b()), batch, flat_dim, a.fc, &mut cache.fc);
        for v in &mut cache.fc {
            *v = v.max(T::zero());
        }
        cache.reset.clear();
        cache.reset.extend_from_slice(reset);
        cache.h_in.clear();
        cache.h_in.extend_from_slice(h_prev);
        for (b, &r) in reset.iter().enumerate() {
            if r {
                cache.h_in[b * hid..(b + 1) * hid].fill(T::zero());
            }
        }
        cache.hidden.resize(batch * hid, T::zero());
        layers::gru_forward(
            &cache.fc,
            &cache.h_in,
            self.p(l.gru_w_ih()),
            self.p(l.gru_w_hh()),
            self.p(l.gru_b_ih()),
            self.p(l.gru_b_hh()),
            batch,
            a.fc,
            hid,
            &mut cache.hidden,
            &mut cache.gru,
        );
        cache.logits.resize(batch * a.actions, T::zero());
        layers::linear_forward(&cache.hidden, self.p(l.pi_w()), self.p(l.pi_b()), batch, hid, a.actions, &mut cache.logits);
        cache.values.resize(batch, T::zero());
        layers::linear_forward(&cache.hidden, self.p(l.v_w()), self.p(l.v_b()), batch, hid, 1, &mut cache.values);
        Ok(())
    }

    /// Backward through one cached step. `dh` holds the gradient flowing into
    /// this step's output hidden state from later steps; on return it holds
    /// the gradient w.r.t. the previous step's hidden state (zero where the
    /// state was reset). Parameter gradients are accumulated into `grads`.
    pub fn backward_step(
        &self,
        input: &[T],
        cache: &mut StepCache<T>,
        dlogits: &[T],
        dvalues: &[T],
        dh: &mut [T],
        grads: &mut Params<T>,
    ) {
        let a = &self.arch;
        let l = self.layout;
        let batch = cache.batch;
        let hid = a.hidden;
        let g = &mut grads.tensors;

        let mut dh_head = vec![T::zero(); batch * hid];
        {
            let (w, b) = pair(g, l.pi_w(), l.pi_b());
            layers::linear_backward(&cache.hidden, self.p(l.pi_w()), dlogits, batch, hid, a.actions, w, b, Some(&mut dh_head));
        }
        for (d, v) in dh.iter_mut().zip(&dh_head) {
            *d = *d + *v;
        }
        {
            let (w, b) = pair(g, l.v_w(), l.v_b());
            layers::linear_backward(&cache.hidden, self.p(l.v_w()), dvalues, batch, hid, 1, w, b, Some(&mut dh_head));
        }
        for (d, v) in dh.iter_mut().zip(&dh_head) {
            *d = *d + *v;
        }

        let mut dfc = vec![T::zero(); batch * a.fc];
        let mut dh_prev = vec![T::zero(); batch * hid];
        {
            let [w_ih, w_hh, b_ih, b_hh] =
                g.get_disjoint_mut([l.gru_w_ih(), l.gru_w_hh(), l.gru_b_ih(), l.gru_b_hh()]).expect("distinct");
            layers::gru_backward(
                &cache.fc,
                &cache.h_in,
                self.p(l.gru_w_ih()),
                self.p(l.gru_w_hh()),
                &cache.gru,
                dh,
                batch,
                a.fc,
                hid,
                [w_ih, w_hh, b_ih, b_hh],
                &mut dfc,
                &mut dh_prev,
            );
        }
        for (b, &r) in cache.reset.iter().enumerate() {
            if r {
                dh_prev[b * hid..(b + 1) * hid].fill(T::zero());
            }
        }
        dh.copy_from_slice(&dh_prev);

        for (d, &v) in dfc.iter_mut().zip(&cache.fc) {
            if v <= T::zero() {
                *d = T::zero();
            }
        }
        let flat_dim = a.flat_dim();
        let mut dflat = vec![T::zero(); batch * flat_dim];
        {
            let (w, b) = pair(g, l.fc_w(), l.fc_b());
            layers::linear_backward(&cache.flat, self.p(l.fc_w()), &dfc, batch, flat_dim, a.fc, w, b, Some(&mut dflat));
        }

        let last = *self.geoms.last().unwrap();
        let plane = last.out_plane();
        let mut dpre = vec![T::zero(); last.out_len(batch)];
        for c in 0..last.out_c {
            for b in 0..batch {
                dpre[(c * batch + b) * plane..][..plane].copy_from_slice(&dflat[b * flat_dim + c * plane..][..plane]);
            }
        }
        for i in (0..self.geoms.len()).rev() {
            let geom = self.geoms[i];
            for (d, &v) in dpre.iter_mut().zip(&cache.convs[i]) {
                if v <= T::zero() {
                    *d = T::zero();
                }
            }
            let src: &[T] = if i == 0 { input } else { &cache.convs[i - 1] };
            let mut dinput = if i == 0 { Vec::new() } else { vec![T::zero(); geom.in_len(batch)] };
            let (w, b) = pair(g, l.conv_w(i), l.conv_b(i));
            layers::conv_backward(
                &geom,
                batch,
                self.p(l.conv_w(i)),
                src,
                &dpre,
                &mut cache.col,
                w,
                b,
                if i == 0 { None } else { Some(&mut dinput) },
            );
            dpre = dinput;
        }
    }
}

fn pair<T>(g: &mut [Vec<T>], i: usize, j: usize) -> (&mut [T], &mut [T]) {
    let [a, b] = g.get_disjoint_mut([i, j]).expect("distinct tensors");
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_input(arch: &Arch, batch: usize, seed: u64) -> Vec<f64> {
        (0..batch * arch.input_len())
            .map(|i| (((i as u64 + 1) * (seed + 7) * 2654435761) % 1000) as f64 / 1000.0)
            .collect()
    }

    #[test]
    fn zero_weights_give_uniform_policy_and_zero_value() {
        let arch = Arch::miniature();
        let net = Net::new(arch.clone(), Params::<f64>::zeros(&arch)).unwrap();
        let mut cache = StepCache::default();
        let batch = 3;
        net.forward(&tiny_input(&arch, batch, 1), batch, &vec![0.3; batch * arch.hidden], &[false; 3], &mut cache)
            .unwrap();
        assert!(cache.logits.iter().all(|&v| v == 0.0));
        assert!(cache.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reset_matches_zero_hidden_state() {
        let arch = Arch::miniature();
        let net = Net::new(arch.clone(), Params::<f64>::init(&arch, 5)).unwrap();
        let batch = 2;
        let x = tiny_input(&arch, batch, 3);
        let h = vec![0.7; batch * arch.hidden];
        let mut a = StepCache::default();
        let mut b = StepCache::default();
        net.forward(&x, batch, &h, &[true, false], &mut a).unwrap();
        net.forward(&x, batch, &vec![0.0; batch * arch.hidden], &[false, false], &mut b).unwrap();
        let (act, hid) = (arch.actions, arch.hidden);
        assert_eq!(a.logits[..act], b.logits[..act]);
        assert_eq!(a.hidden[..hid], b.hidden[..hid]);
        assert_ne!(a.hidden[hid..], b.hidden[hid..]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let arch = Arch::miniature();
        let net = Net::new(arch.clone(), Params::<f64>::zeros(&arch)).unwrap();
        let mut cache = StepCache::default();
        let err = net.forward(&[0.0; 5], 1, &vec![0.0; arch.hidden], &[false], &mut cache);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        assert!(Net::new(Arch::standard(), Params::<f32>::zeros(&arch)).is_err());
    }

    #[test]
    fn frames_are_transposed_and_scaled() {
        let arch = Arch::miniature();
        let frames: Vec<u8> = (0..2 * arch.input_len()).map(|i| i as u8).collect();
        let mut out: Vec<f64> = Vec::new();
        frames_to_input(&arch, &frames, 2, &mut out).unwrap();
        // Sample 1, channel 2, pixel 5.
        let plane = 16;
        let want = frames[arch.input_len() + 2 * plane + 5] as f64 / 255.0;
        assert!((out[(2 * 2 + 1) * plane + 5] - want).abs() < 1e-12);
    }
}
