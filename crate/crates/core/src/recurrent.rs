//! RNN-free recurrent module.
//!
//! ```text
//! x ─ bottleneck (1×1, PReLU, LN) ─ GCU ─ output (LN, 1×1) ─(+x)→
//!
//! GCU:   U = ConvU(h)   V = ConvU(h)   Y = DilatedFSMN(V)   O = h + U ⊗ Y
//! FSMN:  X₀ = PReLU(V·W)
//!        Xₗ = PReLU(IN(GroupConv_(1,k), dil 2^(l-1) ([X₀ … Xₗ₋₁])))
//!        Y  = X₀ + [X₀ … X_L]·P
//! ```
//!
//! The memory runs in a `channels×1×S` layout so the grouped 2-D convolution
//! reduces to a grouped, dilated convolution along time.

use mf2_tensor::{NormKind, Real, Tensor};
use serde::{Deserialize, Serialize};

use crate::layers::{from_image, to_image, LayerNorm, Linear, PRelu};
use crate::params::ParamBuilder;
use crate::{Error, Result};

const DCONV_KERNEL: usize = 3;

/// Ablation switches. All on is the full module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    /// Dilation `2^(l-1)` in memory block `l`; off uses 1 everywhere.
    pub dilation: bool,
    /// Dense concatenation of all earlier memory outputs.
    pub dense: bool,
    /// `U`/`V` branches of the GCU; off feeds the FSMN directly and adds its output.
    pub gate: bool,
    /// Conv-U branches; off replaces them by plain linear layers.
    pub conv_u: bool,
    /// Bottleneck and output layers.
    pub bottleneck: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { dilation: true, dense: true, gate: true, conv_u: true, bottleneck: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecurrentConfig {
    /// Outer embedding dimension `N`.
    pub dim: usize,
    /// Bottleneck dimension `N′`.
    pub bottleneck_dim: usize,
    /// Number of memory blocks `L`.
    pub memory_blocks: usize,
    /// Memory kernel width along time (odd).
    pub memory_kernel: usize,
    /// Channel groups of the memory convolutions.
    pub groups: usize,
    pub toggles: Toggles,
}

impl RecurrentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bottleneck_dim == 0 || self.bottleneck_dim > self.dim {
            return Err(Error::config("bottleneck_dim", format!("must be in 1..={}", self.dim)));
        }
        if self.memory_blocks == 0 {
            return Err(Error::config("memory_blocks", "must be ≥ 1"));
        }
        if self.memory_kernel.is_multiple_of(2) {
            return Err(Error::config("memory_kernel", "must be odd"));
        }
        let inner = self.inner_dim();
        if self.groups == 0 || !inner.is_multiple_of(self.groups) {
            return Err(Error::config(
                "memory_groups",
                format!("must divide the memory width {inner}"),
            ));
        }
        Ok(())
    }

    /// Width the GCU layer runs at.
    pub fn inner_dim(&self) -> usize {
        if self.toggles.bottleneck {
            self.bottleneck_dim
        } else {
            self.dim
        }
    }

    /// Dilation of memory block `l` (1-based).
    pub fn dilation(&self, l: usize) -> usize {
        if self.toggles.dilation {
            1 << (l - 1)
        } else {
            1
        }
    }

    /// Receptive field of the memory in frames: `1 + Σₗ dₗ·(k − 1)`.
    pub fn receptive_field(&self) -> usize {
        1 + (1..=self.memory_blocks).map(|l| self.dilation(l) * (self.memory_kernel - 1)).sum::<usize>()
    }

    /// Input channels of memory block `l` (1-based).
    pub fn block_inputs(&self, l: usize) -> usize {
        if self.toggles.dense {
            l * self.inner_dim()
        } else {
            self.inner_dim()
        }
    }
}

/// LayerNorm → linear → SiLU → depthwise conv (width 3), with the skip
/// connection around the depthwise convolution.
#[derive(Debug, Clone)]
pub struct ConvU<T: Real> {
    pub norm: LayerNorm<T>,
    pub linear: Linear<T>,
    pub dconv_weight: Tensor<T>,
    pub dconv_bias: Tensor<T>,
}

impl<T: Real> ConvU<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, dim: usize) -> Self {
        Self {
            norm: LayerNorm::new(&mut pb.scope("norm"), dim),
            linear: Linear::new(&mut pb.scope("linear"), dim, dim),
            dconv_weight: pb.weight("dconv.weight", &[dim, 1, 1, DCONV_KERNEL], DCONV_KERNEL),
            dconv_bias: pb.zeros("dconv.bias", &[dim]),
        }
    }

    pub fn param_count(dim: usize) -> usize {
        LayerNorm::<f32>::param_count(dim) + Linear::<f32>::param_count(dim, dim) + DCONV_KERNEL * dim + dim
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let dim = x.shape()[1];
        let h = self.linear.forward(&self.norm.forward(x)?)?.silu();
        let conv = to_image(&h)?.grouped_conv2d(&self.dconv_weight, Some(&self.dconv_bias), dim, (1, 1))?;
        Ok(h.add(&from_image(&conv)?)?)
    }
}

#[derive(Debug, Clone)]
pub enum GateBranch<T: Real> {
    ConvU(ConvU<T>),
    Linear(Linear<T>),
}

impl<T: Real> GateBranch<T> {
    fn new(pb: &mut ParamBuilder<'_, T>, dim: usize, conv_u: bool) -> Self {
        if conv_u {
            GateBranch::ConvU(ConvU::new(pb, dim))
        } else {
            GateBranch::Linear(Linear::new(pb, dim, dim))
        }
    }

    fn param_count(dim: usize, conv_u: bool) -> usize {
        if conv_u {
            ConvU::<f32>::param_count(dim)
        } else {
            Linear::<f32>::param_count(dim, dim)
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            GateBranch::ConvU(c) => c.forward(x),
            GateBranch::Linear(l) => l.forward(x),
        }
    }
}

/// One 2-D Conv block: zero padding, grouped dilated conv, instance norm, PReLU.
#[derive(Debug, Clone)]
pub struct MemoryBlock<T: Real> {
    pub weight: Tensor<T>,
    pub norm_gamma: Tensor<T>,
    pub norm_beta: Tensor<T>,
    pub act: PRelu<T>,
    pub dilation: usize,
    groups: usize,
}

impl<T: Real> MemoryBlock<T> {
    /// `D×1×S` (any multiple of `D` channels when dense) → `D×1×S`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_with(x, false)
    }

    fn forward_with(&self, x: &Tensor<T>, frozen_stats: bool) -> Result<Tensor<T>> {
        let y = x.grouped_conv2d(&self.weight, None, self.groups, (1, self.dilation))?;
        let y = if frozen_stats {
            y.normalize_frozen_stats(NormKind::Instance, &self.norm_gamma, &self.norm_beta)?
        } else {
            y.instance_norm(&self.norm_gamma, &self.norm_beta)?
        };
        self.act.forward(&y, 0)
    }
}

#[derive(Debug, Clone)]
pub struct DilatedFsmn<T: Real> {
    pub ffn: Linear<T>,
    pub ffn_act: PRelu<T>,
    pub blocks: Vec<MemoryBlock<T>>,
    pub proj: Linear<T>,
    dense: bool,
}

impl<T: Real> DilatedFsmn<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, cfg: &RecurrentConfig) -> Self {
        let d = cfg.inner_dim();
        let k = cfg.memory_kernel;
        let ffn = Linear::new(&mut pb.scope("ffn"), d, d);
        let ffn_act = PRelu::new(&mut pb.scope("ffn_prelu"), d);
        let blocks = (1..=cfg.memory_blocks)
            .map(|l| {
                let cin = cfg.block_inputs(l);
                let weight = pb.weight(&format!("conv.{l}.weight"), &[d, cin / cfg.groups, 1, k], cin / cfg.groups * k);
                let mut norm = pb.scope(format!("norm.{l}"));
                let norm_gamma = norm.ones("gamma", &[d]);
                let norm_beta = norm.zeros("beta", &[d]);
                MemoryBlock {
                    weight,
                    norm_gamma,
                    norm_beta,
                    act: PRelu::new(&mut pb.scope(format!("prelu.{l}")), d),
                    dilation: cfg.dilation(l),
                    groups: cfg.groups,
                }
            })
            .collect();
        let proj_in = if cfg.toggles.dense { (cfg.memory_blocks + 1) * d } else { d };
        let proj = Linear::new(&mut pb.scope("proj"), proj_in, d);
        Self { ffn, ffn_act, blocks, proj, dense: cfg.toggles.dense }
    }

    pub fn param_count(cfg: &RecurrentConfig) -> usize {
        let d = cfg.inner_dim();
        let blocks: usize = (1..=cfg.memory_blocks)
            .map(|l| d * cfg.block_inputs(l) / cfg.groups * cfg.memory_kernel + 3 * d)
            .sum();
        let proj_in = if cfg.toggles.dense { (cfg.memory_blocks + 1) * d } else { d };
        Linear::<f32>::param_count(d, d) + d + blocks + Linear::<f32>::param_count(proj_in, d)
    }

    /// FFN output `X₀` (`S×D`) and the memory features `X₀ … X_L` (`D×1×S`).
    pub fn memory_features(&self, v: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        self.features_with(v, false)
    }

    fn features_with(&self, v: &Tensor<T>, frozen_stats: bool) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let x0 = self.ffn_act.forward(&self.ffn.forward(v)?, 1)?;
        let mut feats = vec![to_image(&x0)?];
        for block in &self.blocks {
            let input = if self.dense { Tensor::concat(&feats, 0)? } else { feats.last().unwrap().clone() };
            feats.push(block.forward_with(&input, frozen_stats)?);
        }
        Ok((x0, feats))
    }

    pub fn forward(&self, v: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_with(v, false)
    }

    /// Same output as [`DilatedFsmn::forward`]; gradients treat the instance
    /// norm statistics as constants, which leaves only the sliding-window
    /// dependence of the memory. Per-sequence statistics otherwise couple
    /// every output frame to every input frame.
    pub fn forward_frozen_stats(&self, v: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_with(v, true)
    }

    fn forward_with(&self, v: &Tensor<T>, frozen_stats: bool) -> Result<Tensor<T>> {
        let (x0, feats) = self.features_with(v, frozen_stats)?;
        let memory = if self.dense { Tensor::concat(&feats, 0)? } else { feats.last().unwrap().clone() };
        Ok(x0.add(&self.proj.forward(&from_image(&memory)?)?)?)
    }
}

#[derive(Debug, Clone)]
pub struct GcuLayer<T: Real> {
    pub u: Option<GateBranch<T>>,
    pub v: Option<GateBranch<T>>,
    pub fsmn: DilatedFsmn<T>,
}

impl<T: Real> GcuLayer<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, cfg: &RecurrentConfig) -> Self {
        let d = cfg.inner_dim();
        let (u, v) = if cfg.toggles.gate {
            (
                Some(GateBranch::new(&mut pb.scope("u"), d, cfg.toggles.conv_u)),
                Some(GateBranch::new(&mut pb.scope("v"), d, cfg.toggles.conv_u)),
            )
        } else {
            (None, None)
        };
        Self { u, v, fsmn: DilatedFsmn::new(&mut pb.scope("fsmn"), cfg) }
    }

    pub fn param_count(cfg: &RecurrentConfig) -> usize {
        let d = cfg.inner_dim();
        let gates = if cfg.toggles.gate { 2 * GateBranch::<f32>::param_count(d, cfg.toggles.conv_u) } else { 0 };
        gates + DilatedFsmn::<f32>::param_count(cfg)
    }

    /// `O = X + U ⊗ Y`, or `X + Y` without the gate branches.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match (&self.u, &self.v) {
            (Some(u), Some(v)) => {
                let gate = u.forward(x)?;
                let y = self.fsmn.forward(&v.forward(x)?)?;
                Ok(x.add(&gate.mul(&y)?)?)
            }
            _ => Ok(x.add(&self.fsmn.forward(x)?)?),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bottleneck<T: Real> {
    pub proj: Linear<T>,
    pub act: PRelu<T>,
    pub norm: LayerNorm<T>,
}

impl<T: Real> Bottleneck<T> {
    /// 1×1 conv `N → N′`, then PReLU, then LayerNorm.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.norm.forward(&self.act.forward(&self.proj.forward(x)?, 1)?)
    }
}

#[derive(Debug, Clone)]
pub struct OutputLayer<T: Real> {
    pub norm: LayerNorm<T>,
    pub proj: Linear<T>,
}

#[derive(Debug, Clone)]
pub struct RecurrentModule<T: Real> {
    pub bottleneck: Option<Bottleneck<T>>,
    pub gcu: GcuLayer<T>,
    pub output: Option<OutputLayer<T>>,
}

impl<T: Real> RecurrentModule<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, cfg: &RecurrentConfig) -> Self {
        let (n, nb) = (cfg.dim, cfg.bottleneck_dim);
        let bottleneck = cfg.toggles.bottleneck.then(|| {
            let mut b = pb.scope("bottleneck");
            Bottleneck {
                proj: Linear::new(&mut b.scope("proj"), n, nb),
                act: PRelu::new(&mut b.scope("prelu"), nb),
                norm: LayerNorm::new(&mut b.scope("norm"), nb),
            }
        });
        let gcu = GcuLayer::new(&mut pb.scope("gcu"), cfg);
        let output = cfg.toggles.bottleneck.then(|| {
            let mut o = pb.scope("output");
            OutputLayer {
                norm: LayerNorm::new(&mut o.scope("norm"), nb),
                proj: Linear::new(&mut o.scope("proj"), nb, n),
            }
        });
        Self { bottleneck, gcu, output }
    }

    pub fn param_count(cfg: &RecurrentConfig) -> usize {
        let (n, nb) = (cfg.dim, cfg.bottleneck_dim);
        let outer = if cfg.toggles.bottleneck {
            (Linear::<f32>::param_count(n, nb) + nb + LayerNorm::<f32>::param_count(nb))
                + (LayerNorm::<f32>::param_count(nb) + Linear::<f32>::param_count(nb, n))
        } else {
            0
        };
        outer + GcuLayer::<f32>::param_count(cfg)
    }

    /// `S×N → S×N`. With the bottleneck, the result is `x + out(GCU(bottleneck(x)))`;
    /// without it, the GCU layer (which carries its own skip) runs at width `N`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match (&self.bottleneck, &self.output) {
            (Some(b), Some(o)) => {
                let h = self.gcu.forward(&b.forward(x)?)?;
                let y = o.proj.forward(&o.norm.forward(&h)?)?;
                Ok(x.add(&y)?)
            }
            _ => self.gcu.forward(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use mf2_tensor::gradcheck::{check_gradients, project, GradCheckOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::params::ParamStore;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), shape).unwrap()
    }

    fn cfg(toggles: Toggles) -> RecurrentConfig {
        RecurrentConfig { dim: 8, bottleneck_dim: 4, memory_blocks: 2, memory_kernel: 5, groups: 4, toggles }
    }

    fn build<M>(f: impl FnOnce(&mut ParamBuilder<'_, f64>) -> M) -> (M, ParamStore<f64>) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = f(&mut ParamBuilder::new(&mut store, &mut rng));
        (m, store)
    }

    fn zero(t: &Tensor<f64>) {
        t.update_data(|d| d.fill(0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Toggles::default());
        assert!(c.validate().is_ok());
        c.memory_kernel = 4;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "memory_kernel"));
        let mut c = cfg(Toggles::default());
        c.bottleneck_dim = 9;
        assert!(c.validate().is_err());
        let mut c = cfg(Toggles::default());
        c.groups = 3;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "memory_groups"));
    }

    #[test]
    fn dilation_schedule_and_receptive_field() {
        let c = cfg(Toggles::default());
        assert_eq!((c.dilation(1), c.dilation(2)), (1, 2));
        assert_eq!(c.receptive_field(), 13);
        let c = cfg(Toggles { dilation: false, ..Default::default() });
        assert_eq!(c.receptive_field(), 9);
    }

    #[test]
    fn conv_u_skip_paths() {
        let (cu, _) = build(|pb| ConvU::<f64>::new(pb, 6));
        let x = random(&mut ChaCha8Rng::seed_from_u64(1), &[5, 6]);
        assert_eq!(cu.forward(&x).unwrap().shape(), &[5, 6]);
        // Depthwise weights zeroed: only the skip around the D-Conv remains.
        zero(&cu.dconv_weight);
        let h = cu.linear.forward(&cu.norm.forward(&x).unwrap()).unwrap().silu();
        assert_eq!(cu.forward(&x).unwrap().to_vec(), h.to_vec());
        // Linear weights zeroed as well: silu(0) = 0 on both paths.
        zero(&cu.linear.weight);
        assert!(cu.forward(&x).unwrap().to_vec().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fsmn_channel_bookkeeping() {
        let c = RecurrentConfig { dim: 64, bottleneck_dim: 32, memory_blocks: 2, memory_kernel: 5, groups: 32, toggles: Toggles::default() };
        assert_eq!((c.block_inputs(1), c.block_inputs(2)), (32, 64));
        let (f, _) = build(|pb| DilatedFsmn::<f64>::new(pb, &c));
        assert_eq!(f.blocks[0].weight.shape(), &[32, 1, 1, 5]);
        assert_eq!(f.blocks[1].weight.shape(), &[32, 2, 1, 5]);
        assert_eq!(f.proj.weight.shape(), &[96, 32]);
        let x = random(&mut ChaCha8Rng::seed_from_u64(2), &[11, 32]);
        let (_, feats) = f.memory_features(&x).unwrap();
        assert!(feats.iter().all(|t| t.shape() == [32, 1, 11]));
    }

    #[test]
    fn fsmn_zero_memory_returns_x0() {
        let c = cfg(Toggles::default());
        let (f, _) = build(|pb| DilatedFsmn::<f64>::new(pb, &c));
        f.blocks.iter().for_each(|b| zero(&b.weight));
        zero(&f.proj.weight);
        let x = random(&mut ChaCha8Rng::seed_from_u64(4), &[9, 4]);
        let (x0, _) = f.memory_features(&x).unwrap();
        assert_eq!(f.forward(&x).unwrap().to_vec(), x0.to_vec());
    }

    #[test]
    fn gcu_gate_surgery() {
        let c = cfg(Toggles::default());
        let (g, _) = build(|pb| GcuLayer::<f64>::new(pb, &c));
        let x = random(&mut ChaCha8Rng::seed_from_u64(5), &[10, 4]);
        let Some(GateBranch::ConvU(u)) = &g.u else { panic!("conv-u gate expected") };
        zero(&u.linear.weight);
        zero(&u.dconv_weight);
        // U ≡ 0
        assert_eq!(g.forward(&x).unwrap().to_vec(), x.to_vec());
        // U ≡ 1
        u.dconv_bias.update_data(|d| d.fill(1.0));
        let y = g.fsmn.forward(&g.v.as_ref().unwrap().forward(&x).unwrap()).unwrap();
        let expect = x.add(&y).unwrap().to_vec();
        for (a, b) in g.forward(&x).unwrap().to_vec().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_layer_is_identity() {
        let c = cfg(Toggles::default());
        let (m, _) = build(|pb| RecurrentModule::<f64>::new(pb, &c));
        let o = m.output.as_ref().unwrap();
        zero(&o.proj.weight);
        let x = random(&mut ChaCha8Rng::seed_from_u64(6), &[7, 8]);
        assert_eq!(m.forward(&x).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn closed_form_counts_match_instantiation() {
        for bits in 0..32u32 {
            let t = Toggles {
                dilation: bits & 1 != 0,
                dense: bits & 2 != 0,
                gate: bits & 4 != 0,
                conv_u: bits & 8 != 0,
                bottleneck: bits & 16 != 0,
            };
            let c = cfg(t);
            let (_, store) = build(|pb| RecurrentModule::<f64>::new(pb, &c));
            assert_eq!(store.numel(), RecurrentModule::<f64>::param_count(&c), "{t:?}");
        }
    }

    #[test]
    fn every_toggle_combination_passes_gradcheck() {
        let x = random(&mut ChaCha8Rng::seed_from_u64(7), &[9, 8]).with_grad();
        for bits in 0..32u32 {
            let t = Toggles {
                dilation: bits & 1 != 0,
                dense: bits & 2 != 0,
                gate: bits & 4 != 0,
                conv_u: bits & 8 != 0,
                bottleneck: bits & 16 != 0,
            };
            let c = cfg(t);
            let (m, store) = build(|pb| RecurrentModule::<f64>::new(pb, &c));
            let mut inputs = vec![x.clone()];
            inputs.extend(store.tensors());
            let opts = GradCheckOptions { max_per_tensor: 6, ..Default::default() };
            let report = check_gradients(&inputs, || -> Result<_> { Ok(project(&m.forward(&x)?, 8)?) }, opts).unwrap();
            assert!(report.passes(1e-4), "{t:?}: {report:?}");
            assert_eq!(m.forward(&x).unwrap().shape(), &[9, 8]);
        }
    }
}
