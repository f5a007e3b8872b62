//! Network shape description and parameter storage.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use raymaze_core::rng::derive_seed;
use raymaze_core::{Action, OBS_CHANNELS, OBS_HEIGHT, OBS_WIDTH};

use crate::error::{Error, Result};
use crate::init::orthogonal_init;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Conv stack -> ReLU fully connected layer -> GRU -> policy and value heads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub convs: Vec<ConvSpec>,
    pub fc: usize,
    pub hidden: usize,
    pub actions: usize,
}

/// Position of each tensor in a [`Params`] set.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub conv_layers: usize,
}

impl Layout {
    pub fn conv_w(&self, i: usize) -> usize {
        2 * i
    }
    pub fn conv_b(&self, i: usize) -> usize {
        2 * i + 1
    }
    pub fn fc_w(&self) -> usize {
        2 * self.conv_layers
    }
    pub fn fc_b(&self) -> usize {
        self.fc_w() + 1
    }
    pub fn gru_w_ih(&self) -> usize {
        self.fc_w() + 2
    }
    pub fn gru_w_hh(&self) -> usize {
        self.fc_w() + 3
    }
    pub fn gru_b_ih(&self) -> usize {
        self.fc_w() + 4
    }
    pub fn gru_b_hh(&self) -> usize {
        self.fc_w() + 5
    }
    pub fn pi_w(&self) -> usize {
        self.fc_w() + 6
    }
    pub fn pi_b(&self) -> usize {
        self.fc_w() + 7
    }
    pub fn v_w(&self) -> usize {
        self.fc_w() + 8
    }
    pub fn v_b(&self) -> usize {
        self.fc_w() + 9
    }
    pub fn len(&self) -> usize {
        self.fc_w() + 10
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Orthogonal gain for weights; `None` for zero-initialized biases.
    pub gain: Option<f64>,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

impl Arch {
    /// 3x64x112 input; 32 8x8/4, 64 4x4/2, 64 3x3/1 convolutions; 128-unit
    /// projection; 128-unit GRU; six action logits and one value.
    pub fn standard() -> Self {
        Arch {
            in_channels: OBS_CHANNELS,
            height: OBS_HEIGHT,
            width: OBS_WIDTH,
            convs: vec![
                ConvSpec { out_channels: 32, kernel: 8, stride: 4 },
                ConvSpec { out_channels: 64, kernel: 4, stride: 2 },
                ConvSpec { out_channels: 64, kernel: 3, stride: 1 },
            ],
            fc: 128,
            hidden: 128,
            actions: Action::COUNT,
        }
    }

    /// Same layer structure on a 3x4x4 input, small enough for
    /// finite-difference gradient checks.
    pub fn miniature() -> Self {
        Arch {
            in_channels: 3,
            height: 4,
            width: 4,
            convs: vec![
                ConvSpec { out_channels: 4, kernel: 2, stride: 1 },
                ConvSpec { out_channels: 4, kernel: 2, stride: 1 },
                ConvSpec { out_channels: 3, kernel: 2, stride: 1 },
            ],
            fc: 6,
            hidden: 5,
            actions: Action::COUNT,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout { conv_layers: self.convs.len() }
    }

    /// `(channels, height, width)` of the input followed by each conv output.
    pub fn feature_shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut shapes = vec![(self.in_channels, self.height, self.width)];
        for c in &self.convs {
            let &(_, h, w) = shapes.last().unwrap();
            let oh = (h.saturating_sub(c.kernel)) / c.stride.max(1) + 1;
            let ow = (w.saturating_sub(c.kernel)) / c.stride.max(1) + 1;
            shapes.push((c.out_channels, oh, ow));
        }
        shapes
    }

    /// Flattened size of the last conv output (2560 for the standard net).
    pub fn flat_dim(&self) -> usize {
        let &(c, h, w) = self.feature_shapes().last().unwrap();
        c * h * w
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        let mut h = self.height;
        let mut w = self.width;
        for c in &self.convs {
            if c.kernel == 0 || c.stride == 0 || c.out_channels == 0 || c.kernel > h || c.kernel > w {
                return Err(Error::InvalidArgument(format!("conv {c:?} does not fit {h}x{w}")));
            }
            h = (h - c.kernel) / c.stride + 1;
            w = (w - c.kernel) / c.stride + 1;
        }
        if self.fc == 0 || self.hidden == 0 || self.actions == 0 || self.convs.is_empty() {
            return Err(Error::InvalidArgument("empty layer".into()));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut specs = Vec::new();
        let mut in_c = self.in_channels;
        for (i, c) in self.convs.iter().enumerate() {
            specs.push(ParamSpec {
                name: format!("conv{}.weight", i + 1),
                shape: vec![c.out_channels, in_c, c.kernel, c.kernel],
                gain: Some(sqrt2),
            });
            specs.push(ParamSpec { name: format!("conv{}.bias", i + 1), shape: vec![c.out_channels], gain: None });
            in_c = c.out_channels;
        }
        let h3 = 3 * self.hidden;
        let mut push = |name: &str, shape: Vec<usize>, gain: Option<f64>| {
            specs.push(ParamSpec { name: name.to_string(), shape, gain })
        };
        push("fc.weight", vec![self.fc, self.flat_dim()], Some(sqrt2));
        push("fc.bias", vec![self.fc], None);
        push("gru.weight_ih", vec![h3, self.fc], Some(1.0));
        push("gru.weight_hh", vec![h3, self.hidden], Some(1.0));
        push("gru.bias_ih", vec![h3], None);
        push("gru.bias_hh", vec![h3], None);
        push("policy.weight", vec![self.actions, self.hidden], Some(0.01));
        push("policy.bias", vec![self.actions], None);
        push("value.weight", vec![1, self.hidden], Some(1.0));
        push("value.bias", vec![1], None);
        specs
    }

    pub fn descriptor(&self) -> String {
        let convs: Vec<String> = self
            .convs
            .iter()
            .map(|c| format!("conv{}k{}s{}", c.out_channels, c.kernel, c.stride))
            .collect();
        format!(
            "in{}x{}x{}-{}-fc{}-gru{}-act{}",
            self.in_channels,
            self.height,
            self.width,
            convs.join("-"),
            self.fc,
            self.hidden,
            self.actions
        )
    }

    /// First 8 bytes of the SHA-256 of [`Arch::descriptor`].
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.descriptor().as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(b)
    }

    pub fn num_params(&self) -> usize {
        self.param_specs().iter().map(ParamSpec::numel).sum()
    }
}

/// Flat tensors in [`Arch::param_specs`] order. Also used for gradients and
/// optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(arch: &Arch) -> Self {
        Params {
            tensors: arch.param_specs().iter().map(|s| vec![T::zero(); s.numel()]).collect(),
        }
    }

    /// Orthogonal weights with per-layer gains and zero biases. Tensor `i`
    /// draws from `derive_seed(seed, &[i])`.
    pub fn init(arch: &Arch, seed: u64) -> Self {
        let tensors = arch
            .param_specs()
            .iter()
            .enumerate()
            .map(|(i, spec)| match spec.gain {
                Some(gain) => {
                    let rows = spec.shape[0];
                    let cols = spec.numel() / rows;
                    orthogonal_init(rows, cols, gain, derive_seed(seed, &[i as u64]))
                        .into_iter()
                        .map(T::of)
                        .collect()
                }
                None => vec![T::zero(); spec.numel()],
            })
            .collect();
        Params { tensors }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            tensors: self.tensors.iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.fill(T::zero());
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|v| {
                let v = v.as_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: T) {
        for v in self.tensors.iter_mut().flatten() {
            *v = *v * k;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            tensors: self
                .tensors
                .iter()
                .map(|t| t.iter().map(|v| U::of(v.as_f64())).collect())
                .collect(),
        }
    }

    pub fn matches(&self, arch: &Arch) -> bool {
        let specs = arch.param_specs();
        specs.len() == self.tensors.len() && specs.iter().zip(&self.tensors).all(|(s, t)| s.numel() == t.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shapes() {
        let arch = Arch::standard();
        assert_eq!(
            arch.feature_shapes(),
            vec![(3, 64, 112), (32, 15, 27), (64, 6, 12), (64, 4, 10)]
        );
        assert_eq!(arch.flat_dim(), 2560);
        arch.validate().unwrap();
        Arch::miniature().validate().unwrap();
        assert_eq!(Arch::miniature().flat_dim(), 3);
    }

    #[test]
    fn parameter_count_is_fixed_by_architecture() {
        let arch = Arch::standard();
        let conv = (32 * 3 * 64 + 32) + (64 * 32 * 16 + 64) + (64 * 64 * 9 + 64);
        let fc = 128 * 2560 + 128;
        let gru = 2 * 384 * 128 + 2 * 384;
        let heads = 6 * 128 + 6 + 128 + 1;
        assert_eq!(arch.num_params(), conv + fc + gru + heads);
        let p: Params<f32> = Params::init(&arch, 0);
        assert_eq!(p.num_params(), arch.num_params());
        assert!(p.matches(&arch));
        assert!(!p.matches(&Arch::miniature()));
    }

    #[test]
    fn hash_tracks_architecture() {
        assert_eq!(Arch::standard().hash(), Arch::standard().hash());
        assert_ne!(Arch::standard().hash(), Arch::miniature().hash());
    }

    #[test]
    fn layout_indices_match_names() {
        let arch = Arch::standard();
        let specs = arch.param_specs();
        let l = arch.layout();
        assert_eq!(specs[l.conv_w(2)].name, "conv3.weight");
        assert_eq!(specs[l.fc_w()].name, "fc.weight");
        assert_eq!(specs[l.gru_b_hh()].name, "gru.bias_hh");
        assert_eq!(specs[l.v_b()].name, "value.bias");
        assert_eq!(l.len(), specs.len());
    }
}
