//! Parameter breakdown of every bundled profile.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example param_count
//! ```

use mossformer2::commands::param_report;
use mossformer2::TrainConfig;

fn main() -> mossformer2::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["desk", "mossformer2", "mossformer2_small", "mossformer", "mossformer_small"] {
        let cfg = TrainConfig::load(dir.join(format!("{name}.toml")))?;
        let r = param_report(&cfg.model)?;
        println!("== {name}");
        print!("{}", r.table());
    }
    Ok(())
}
