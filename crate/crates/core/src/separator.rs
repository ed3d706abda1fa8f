//! Encoder, masking network and decoder.
//!
//! ```text
//! x[T] ─ Conv1D(K₁, hop K₁/2) ─ ReLU ─ e[N×S]
//! e ─ LN ─ 1×1 ─ R × (MossFormer block → recurrent module) ─ 1×1 (C·N) ─ ReLU ─ masks[C×N×S]
//! ConvTranspose1D(masks[i] ⊗ e) ─ ŝᵢ[T]          S = 2T/K₁ − 1
//! ```

use mf2_tensor::{no_grad, Real, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionConfig, MossFormerBlock};
use crate::layers::{LayerNorm, Linear};
use crate::params::{ParamBuilder, ParamStore};
use crate::profile;
use crate::recurrent::{RecurrentConfig, RecurrentModule, Toggles};
use crate::{Error, Result};

fn default_expansion() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_memory_kernel() -> usize {
    5
}

/// Architecture hyperparameters. Unknown keys are rejected when parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of sources `C`.
    pub sources: usize,
    /// Encoder kernel `K₁`; the hop is `K₁/2`.
    pub encoder_kernel: usize,
    /// Embedding dimension `N`.
    pub embed_dim: usize,
    /// Number of stacked blocks `R`.
    pub blocks: usize,
    /// Local attention chunk `K`.
    pub chunk_size: usize,
    /// Shared query/key width.
    pub qk_dim: usize,
    #[serde(default = "default_expansion")]
    pub expansion: usize,
    #[serde(default = "default_true")]
    pub rotary: bool,
    /// Bottleneck dimension `N′`.
    pub bottleneck_dim: usize,
    /// Memory depth `L`.
    pub memory_blocks: usize,
    #[serde(default = "default_memory_kernel")]
    pub memory_kernel: usize,
    /// Memory convolution groups; defaults to the memory width (depthwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_groups: Option<usize>,
    /// `false` drops every recurrent module.
    #[serde(default = "default_true")]
    pub hybrid: bool,
    #[serde(default)]
    pub ablation: Toggles,
}

impl ModelConfig {
    /// Small profile that trains in minutes on one core.
    pub fn desk() -> Self {
        Self {
            sources: 2,
            encoder_kernel: 8,
            embed_dim: 64,
            blocks: 2,
            chunk_size: 8,
            qk_dim: 32,
            expansion: 2,
            rotary: true,
            bottleneck_dim: 32,
            memory_blocks: 2,
            memory_kernel: 5,
            memory_groups: None,
            hybrid: true,
            ablation: Toggles::default(),
        }
    }

    /// Full-size profile (`R=24, N=512, K=16, N′=256, L=2`).
    pub fn large() -> Self {
        Self {
            encoder_kernel: 16,
            embed_dim: 512,
            blocks: 24,
            chunk_size: 16,
            qk_dim: 128,
            bottleneck_dim: 256,
            ..Self::desk()
        }
    }

    /// Reduced full-size profile (`R=25, N=384`).
    pub fn small() -> Self {
        Self { embed_dim: 384, blocks: 25, ..Self::large() }
    }

    pub fn hop(&self) -> usize {
        self.encoder_kernel / 2
    }

    pub fn attention(&self) -> AttentionConfig {
        AttentionConfig {
            dim: self.embed_dim,
            chunk: self.chunk_size,
            qk_dim: self.qk_dim,
            expansion: self.expansion,
            rotary: self.rotary,
        }
    }

    pub fn recurrent(&self) -> RecurrentConfig {
        let inner = if self.ablation.bottleneck { self.bottleneck_dim } else { self.embed_dim };
        RecurrentConfig {
            dim: self.embed_dim,
            bottleneck_dim: self.bottleneck_dim,
            memory_blocks: self.memory_blocks,
            memory_kernel: self.memory_kernel,
            groups: self.memory_groups.unwrap_or(inner),
            toggles: self.ablation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources < 2 {
            return Err(Error::config("sources", "must be ≥ 2"));
        }
        if self.encoder_kernel < 2 || !self.encoder_kernel.is_multiple_of(2) {
            return Err(Error::config("encoder_kernel", "must be even and ≥ 2"));
        }
        if self.blocks == 0 {
            return Err(Error::config("blocks", "must be ≥ 1"));
        }
        self.attention().validate()?;
        if self.hybrid {
            self.recurrent().validate()?;
        }
        Ok(())
    }

    /// Encoded length `S = 2T/K₁ − 1`, or an error when `T` is not aligned.
    pub fn encoded_len(&self, t: usize) -> Result<usize> {
        let (k, hop) = (self.encoder_kernel, self.hop());
        if t < k || !t.is_multiple_of(hop) {
            return Err(Error::InputLength { len: t, min: k, multiple: hop });
        }
        Ok(2 * t / k - 1)
    }

    /// Smallest valid input length `≥ t`.
    pub fn aligned_len(&self, t: usize) -> usize {
        t.div_ceil(self.hop()).max(2) * self.hop()
    }

    /// Closed-form total parameter count.
    pub fn param_count(&self) -> usize {
        self.param_breakdown().iter().map(|(_, n)| n).sum()
    }

    /// Per-module counts in construction order; prefixes match parameter names.
    pub fn param_breakdown(&self) -> Vec<(&'static str, usize)> {
        let (n, c, k) = (self.embed_dim, self.sources, self.encoder_kernel);
        let r = self.blocks;
        let mut rows = vec![
            ("encoder", n * k),
            ("mask.input", LayerNorm::<f32>::param_count(n) + Linear::<f32>::param_count(n, n)),
            ("attention", r * MossFormerBlock::<f32>::param_count(&self.attention())),
        ];
        if self.hybrid {
            rows.push(("recurrent", r * RecurrentModule::<f32>::param_count(&self.recurrent())));
        }
        rows.push(("mask.head", Linear::<f32>::param_count(n, c * n)));
        rows.push(("decoder", n * k));
        rows
    }
}

#[derive(Debug, Clone)]
pub struct Block<T: Real> {
    pub attention: MossFormerBlock<T>,
    pub recurrent: Option<RecurrentModule<T>>,
}

#[derive(Debug, Clone)]
pub struct Separator<T: Real = f32> {
    cfg: ModelConfig,
    params: ParamStore<T>,
    encoder: Tensor<T>,
    input_norm: LayerNorm<T>,
    input_proj: Linear<T>,
    pub blocks: Vec<Block<T>>,
    head: Linear<T>,
    decoder: Tensor<T>,
}

impl<T: Real> Separator<T> {
    /// Builds a model with weights drawn from a stream seeded by `seed`.
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let (n, c, k) = (cfg.embed_dim, cfg.sources, cfg.encoder_kernel);
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pb = ParamBuilder::new(&mut params, &mut rng);
        let encoder = pb.weight("encoder.weight", &[n, 1, k], k);
        let input_norm = LayerNorm::new(&mut pb.scope("mask.input.norm"), n);
        let input_proj = Linear::new(&mut pb.scope("mask.input.proj"), n, n);
        let blocks = (0..cfg.blocks)
            .map(|i| {
                let mut b = pb.scope(format!("block.{i}"));
                Block {
                    attention: MossFormerBlock::new(&mut b.scope("attention"), cfg.attention()),
                    recurrent: cfg.hybrid.then(|| RecurrentModule::new(&mut b.scope("recurrent"), &cfg.recurrent())),
                }
            })
            .collect();
        let head = Linear::new(&mut pb.scope("mask.head"), n, c * n);
        let decoder = pb.weight("decoder.weight", &[n, 1, k], k);
        Ok(Self { cfg: cfg.clone(), params, encoder, input_norm, input_proj, blocks, head, decoder })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    /// `x[T] → e[N×S]`, non-negative.
    pub fn encode(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let t = x.numel();
        self.cfg.encoded_len(t)?;
        let x = x.reshape(&[1, t])?;
        Ok(x.conv1d(&self.encoder, None, self.cfg.hop(), 0)?.relu())
    }

    /// `e[N×S] → masks[C×N×S]`, non-negative.
    pub fn mask_net(&self, e: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, s) = (e.shape()[0], e.shape()[1]);
        let mut h = profile::scope(profile::INPUT, || -> Result<_> {
            self.input_proj.forward(&self.input_norm.forward(&e.transpose()?)?)
        })?;
        for block in &self.blocks {
            h = profile::scope(profile::ATTENTION, || block.attention.forward(&h))?;
            if let Some(rec) = &block.recurrent {
                h = profile::scope(profile::RECURRENT, || rec.forward(&h))?;
            }
        }
        profile::scope(profile::HEAD, || -> Result<_> {
            let m = self.head.forward(&h)?.relu();
            Ok(m.transpose()?.reshape(&[self.cfg.sources, n, s])?)
        })
    }

    /// `(e[N×S], masks[C×N×S]) → ŝ[C×T]` with a shared transposed filterbank.
    pub fn decode(&self, e: &Tensor<T>, masks: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, s) = (e.shape()[0], e.shape()[1]);
        let outs = (0..self.cfg.sources)
            .map(|i| {
                let m = masks.narrow(0, i, 1)?.reshape(&[n, s])?;
                Ok(m.mul(e)?.conv_transpose1d(&self.decoder, self.cfg.hop())?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::concat(&outs, 0)?)
    }

    /// `x[T] → ŝ[C×T]`; `T` must be aligned (see [`ModelConfig::encoded_len`]).
    pub fn separate(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let e = profile::scope(profile::ENCODER, || self.encode(x))?;
        let masks = self.mask_net(&e)?;
        profile::scope(profile::DECODER, || self.decode(&e, &masks))
    }

    /// Inference on raw samples of any length ≥ 1: zero-pads to alignment,
    /// separates without recording a graph and trims back to `len`.
    pub fn separate_samples(&self, samples: &[T]) -> Result<Vec<Vec<T>>> {
        let len = samples.len();
        let mut padded = samples.to_vec();
        padded.resize(self.cfg.aligned_len(len), T::zero());
        let t = padded.len();
        let out = no_grad(|| self.separate(&Tensor::new(padded, &[t])?))?;
        let data = out.data();
        Ok(data.chunks(t).map(|row| row[..len].to_vec()).collect())
    }
}
