//! Writes a small synthetic corpus with a manifest usable by `evaluate`.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example make_corpus -- /tmp/corpus
//! ```

use mossformer2::data::{synth_corpus, write_corpus, CorpusSpec};

fn main() -> mossformer2::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus".into());
    let spec = CorpusSpec { count: 8, duration_s: 1.0, ..Default::default() };
    let manifest = write_corpus(&dir, &synth_corpus(&spec)?)?;
    println!("{}", manifest.display());
    Ok(())
}
