//! Draws fresh mixtures from a pool of single-speaker streams.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example dynamic_mixing
//! ```

use mossformer2::data::{dynamic_mix, CorpusSpec, SourcePool};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mossformer2::Result<()> {
    let spec = CorpusSpec { duration_s: 1.0, speakers: 6, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pool = SourcePool::synth(&spec, 3, &mut rng)?;
    println!("pool: {} streams, speakers {:?}", pool.streams.len(), pool.speakers());
    for _ in 0..5 {
        let m = dynamic_mix(&pool, 2, 4000, &mut rng)?;
        let gains: Vec<String> = m.gains_db.iter().map(|g| format!("{g:+.2} dB")).collect();
        println!("speakers {:?}  picks {:?}  gains {}", m.sample.speakers, m.picks, gains.join(", "));
    }
    Ok(())
}
