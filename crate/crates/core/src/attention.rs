//! Joint local-global self-attention block.
//!
//! Exact softmax attention runs inside non-overlapping chunks of `K` frames
//! while a linearised attention (ReLU feature map, `1/S` scaling) covers the
//! whole sequence. A single shared query/key head feeds both branches
//! through per-branch offset/scale vectors.
//!
//! ```text
//! h      = ConvU(LN(x))
//! v, u   = SiLU(h·Wv), SiLU(h·Wu)          S×(E·N)
//! z      = SiLU(h·Wqk)                      S×d
//! q/k    = rotary(z ⊙ γᵢ + βᵢ)               four variants
//! out    = x + (u ⊗ (local(q,k,v) + global(q,k,v)))·Wo
//! ```

use mf2_tensor::{Real, Tensor};
use serde::{Deserialize, Serialize};

use crate::layers::{LayerNorm, Linear};
use crate::params::ParamBuilder;
use crate::profile;
use crate::recurrent::ConvU;
use crate::{Error, Result};

const ROTARY_BASE: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    /// Embedding dimension `N`.
    pub dim: usize,
    /// Local chunk size `K`.
    pub chunk: usize,
    /// Shared query/key width.
    pub qk_dim: usize,
    /// Value/gate expansion factor.
    pub expansion: usize,
    /// Rotary phase rotation of queries and keys.
    pub rotary: bool,
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("embed_dim", "must be ≥ 1"));
        }
        if self.chunk == 0 {
            return Err(Error::config("chunk_size", "must be ≥ 1"));
        }
        if self.qk_dim == 0 || (self.rotary && !self.qk_dim.is_multiple_of(2)) {
            return Err(Error::config("qk_dim", "must be ≥ 1 (and even with rotary)"));
        }
        if self.expansion == 0 {
            return Err(Error::config("expansion", "must be ≥ 1"));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.expansion * self.dim
    }
}

/// Splits `S×D` into `ceil(S/K)` chunks of `K` rows, zero-padding the tail.
/// Returns the `nc×K×D` chunks and the pad length.
pub fn chunk_split<T: Real>(x: &Tensor<T>, k: usize) -> Result<(Tensor<T>, usize)> {
    let (s, d) = (x.shape()[0], x.shape()[1]);
    let nc = s.div_ceil(k);
    let pad = nc * k - s;
    Ok((x.pad_end(0, pad)?.reshape(&[nc, k, d])?, pad))
}

/// Inverse of [`chunk_split`]: flattens chunks and drops the padded rows.
pub fn chunk_merge<T: Real>(chunks: &Tensor<T>, seq_len: usize) -> Result<Tensor<T>> {
    let (nc, k, d) = (chunks.shape()[0], chunks.shape()[1], chunks.shape()[2]);
    let flat = chunks.reshape(&[nc * k, d])?;
    if nc * k == seq_len {
        Ok(flat)
    } else {
        Ok(flat.narrow(0, 0, seq_len)?)
    }
}

/// Softmax attention within each chunk. Keys in the last `pad_len` rows of
/// the final chunk are masked out.
pub fn local_attention<T: Real>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    pad_len: usize,
) -> Result<Tensor<T>> {
    let (nc, kk, d) = (q.shape()[0], q.shape()[1], q.shape()[2]);
    let logits = q.matmul(&k.transpose()?)?.scale(1.0 / (d as f64).sqrt());
    let logits = if pad_len > 0 {
        let mut mask = vec![T::zero(); nc * kk * kk];
        let last = (nc - 1) * kk * kk;
        for row in 0..kk {
            for col in kk - pad_len..kk {
                mask[last + row * kk + col] = T::neg_infinity();
            }
        }
        logits.add(&Tensor::new(mask, &[nc, kk, kk])?)?
    } else {
        logits
    };
    Ok(logits.softmax().matmul(v)?)
}

/// `φ(q)·(φ(k)ᵀ·v) / S` with `φ = ReLU`, evaluated in linear order in `S`.
pub fn global_linear_attention<T: Real>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let s = q.shape()[0];
    let kv = k.relu().transpose()?.matmul(v)?;
    Ok(q.relu().matmul(&kv)?.scale(1.0 / s as f64))
}

#[derive(Debug, Clone)]
struct OffsetScale<T: Real> {
    gamma: Tensor<T>,
    beta: Tensor<T>,
}

impl<T: Real> OffsetScale<T> {
    fn new(pb: &mut ParamBuilder<'_, T>, dim: usize) -> Self {
        Self { gamma: pb.ones("gamma", &[dim]), beta: pb.zeros("beta", &[dim]) }
    }

    fn forward(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(z.mul_along(&self.gamma, 1)?.add_along(&self.beta, 1)?)
    }
}

#[derive(Debug, Clone)]
pub struct MossFormerBlock<T: Real> {
    cfg: AttentionConfig,
    norm: LayerNorm<T>,
    conv: ConvU<T>,
    to_v: Linear<T>,
    to_u: Linear<T>,
    to_qk: Linear<T>,
    /// local q, local k, global q, global k
    qk_heads: [OffsetScale<T>; 4],
    pub out: Linear<T>,
}

impl<T: Real> MossFormerBlock<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, cfg: AttentionConfig) -> Self {
        let (n, e, d) = (cfg.dim, cfg.hidden(), cfg.qk_dim);
        Self {
            cfg,
            norm: LayerNorm::new(&mut pb.scope("norm"), n),
            conv: ConvU::new(&mut pb.scope("conv"), n),
            to_v: Linear::new(&mut pb.scope("to_v"), n, e),
            to_u: Linear::new(&mut pb.scope("to_u"), n, e),
            to_qk: Linear::new(&mut pb.scope("to_qk"), n, d),
            qk_heads: ["q_local", "k_local", "q_global", "k_global"]
                .map(|name| OffsetScale::new(&mut pb.scope(name), d)),
            out: Linear::new(&mut pb.scope("out"), e, n),
        }
    }

    pub fn config(&self) -> &AttentionConfig {
        &self.cfg
    }

    /// Closed-form parameter count: `(1+3E)N² + (10+2E)N + N·d + 9d`.
    pub fn param_count(cfg: &AttentionConfig) -> usize {
        let (n, e, d) = (cfg.dim, cfg.hidden(), cfg.qk_dim);
        LayerNorm::<f32>::param_count(n)
            + ConvU::<f32>::param_count(n)
            + 2 * Linear::<f32>::param_count(n, e)
            + Linear::<f32>::param_count(n, d)
            + 4 * 2 * d
            + Linear::<f32>::param_count(e, n)
    }

    /// `S×N → S×N` for any `S ≥ 1`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape()[0];
        let h = self.conv.forward(&self.norm.forward(x)?)?;
        let v = self.to_v.forward(&h)?.silu();
        let u = self.to_u.forward(&h)?.silu();
        let z = self.to_qk.forward(&h)?.silu();
        let positions: Vec<usize> = (0..s).collect();
        let qk = self
            .qk_heads
            .iter()
            .map(|head| {
                let t = head.forward(&z)?;
                if self.cfg.rotary {
                    Ok(t.rotary(&positions, ROTARY_BASE)?)
                } else {
                    Ok(t)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let local = profile::scope(profile::ATTENTION_LOCAL, || -> Result<_> {
            let (ql, _) = chunk_split(&qk[0], self.cfg.chunk)?;
            let (kl, _) = chunk_split(&qk[1], self.cfg.chunk)?;
            let (vl, pad) = chunk_split(&v, self.cfg.chunk)?;
            chunk_merge(&local_attention(&ql, &kl, &vl, pad)?, s)
        })?;
        let global = profile::scope(profile::ATTENTION_GLOBAL, || global_linear_attention(&qk[2], &qk[3], &v))?;
        let mixed = u.mul(&local.add(&global)?)?;
        Ok(x.add(&self.out.forward(&mixed)?)?)
    }
}
