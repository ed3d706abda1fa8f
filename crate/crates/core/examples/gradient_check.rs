//! Compares analytic and finite-difference gradients of a tiny separator.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example gradient_check
//! ```

use mf2_tensor::gradcheck::{check_gradients, project, GradCheckOptions};
use mf2_tensor::Tensor;
use mossformer2::{ModelConfig, Separator};

fn main() -> mossformer2::Result<()> {
    let cfg = ModelConfig {
        embed_dim: 16,
        blocks: 1,
        chunk_size: 4,
        qk_dim: 8,
        bottleneck_dim: 8,
        memory_groups: Some(4),
        ..ModelConfig::desk()
    };
    let model = Separator::<f64>::new(&cfg, 0)?;
    let x = Tensor::new((0..64).map(|i| (i as f64 * 0.37).sin()).collect(), &[64])?.with_grad();
    let mut inputs = vec![x.clone()];
    inputs.extend(model.params().tensors());
    let opts = GradCheckOptions { max_per_tensor: 16, kink_screen: Some(1e-5), ..Default::default() };
    let r = check_gradients(&inputs, || Ok::<_, mossformer2::Error>(project(&model.separate(&x)?, 1)?), opts)?;
    println!("{} tensors, {} entries checked, {} at kinks", inputs.len(), r.checked, r.skipped);
    println!("max relative error {:.2e}", r.max_rel_error);
    Ok(())
}
