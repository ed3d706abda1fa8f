//! Times the global attention path at doubling sequence lengths.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example linear_attention_scaling
//! ```

use mossformer2::commands::bench_rtf;
use mossformer2::{profile, ModelConfig, Separator};

fn main() -> mossformer2::Result<()> {
    let model = Separator::<f32>::new(&ModelConfig::desk(), 0)?;
    let mut prev: Option<f64> = None;
    for secs in [1.0, 2.0, 4.0, 8.0] {
        let r = bench_rtf(&model, secs, 5, 0)?;
        let g = r.components[profile::ATTENTION_GLOBAL];
        let l = r.components[profile::ATTENTION_LOCAL];
        let ratio = prev.map_or(String::new(), |p| format!("  x{:.2}", g / p));
        println!("S {:>6}  global {:>8.2} ms  local {:>8.2} ms  RTF {:.3}{ratio}", r.encoded_len, g * 1e3, l * 1e3, r.median_rtf);
        prev = Some(g);
    }
    Ok(())
}
