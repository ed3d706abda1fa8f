//! Saves, reloads and re-saves a checkpoint and inspects its entries.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example checkpoint
//! ```

use mossformer2::archive::Payload;
use mossformer2::{load_checkpoint, save_checkpoint, ModelConfig, Separator, TensorArchive};

fn main() -> mossformer2::Result<()> {
    let dir = std::env::temp_dir();
    let (a, b) = (dir.join("mossformer2_a.mft2"), dir.join("mossformer2_b.mft2"));
    save_checkpoint(&Separator::<f32>::new(&ModelConfig::desk(), 7)?, &a)?;
    save_checkpoint(&load_checkpoint(&a, None)?, &b)?;
    let read = |p: &std::path::Path| std::fs::read(p).map_err(|e| mossformer2::Error::io(p, e));
    println!("byte-identical after reload: {}", read(&a)? == read(&b)?);
    let archive = TensorArchive::load(&a)?;
    println!("{} entries", archive.len());
    for name in archive.names().take(6) {
        match archive.get(name) {
            Some(Payload::F32 { dims, .. }) => println!("  {name:<40} f32 {dims:?}"),
            Some(Payload::Bytes(b)) => println!("  {name:<40} {} bytes", b.len()),
            None => {}
        }
    }
    Ok(())
}
