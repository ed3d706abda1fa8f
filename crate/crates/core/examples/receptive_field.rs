//! Probes which input frames reach one output frame of the dilated memory.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example receptive_field
//! ```

use mf2_tensor::Tensor;
use mossformer2::params::{ParamBuilder, ParamStore};
use mossformer2::recurrent::{DilatedFsmn, RecurrentConfig, Toggles};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reach(cfg: &RecurrentConfig, frozen: bool) -> mossformer2::Result<Vec<usize>> {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fsmn = DilatedFsmn::<f64>::new(&mut ParamBuilder::new(&mut store, &mut rng), cfg);
    let (s, d, t) = (33, cfg.bottleneck_dim, 16);
    let v = Tensor::new((0..s * d).map(|i| (i as f64 * 0.61).sin()).collect(), &[s, d])?.with_grad();
    let y = if frozen { fsmn.forward_frozen_stats(&v)? } else { fsmn.forward(&v)? };
    y.narrow(0, t, 1)?.sum().backward()?;
    let g = v.grad().unwrap_or_default();
    Ok((0..s).filter(|&i| g[i * d..(i + 1) * d].iter().any(|x| *x != 0.0)).collect())
}

fn main() -> mossformer2::Result<()> {
    for dilation in [true, false] {
        let cfg = RecurrentConfig {
            dim: 8,
            bottleneck_dim: 4,
            memory_blocks: 2,
            memory_kernel: 5,
            groups: 4,
            toggles: Toggles { dilation, ..Default::default() },
        };
        let frames = reach(&cfg, true)?;
        println!(
            "dilation {dilation:<5}  receptive field {:>2}  frames {}..={}",
            cfg.receptive_field(),
            frames[0],
            frames[frames.len() - 1]
        );
        println!("                 with live norm statistics: {} of 33 frames", reach(&cfg, false)?.len());
    }
    Ok(())
}
