//! Overfits the desk profile on four fixed synthetic mixtures.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example train_overfit
//! ```

use std::time::Instant;

use mossformer2::data::{synth_corpus, CorpusSpec};
use mossformer2::train::evaluate_si_sdri;
use mossformer2::{TrainConfig, Trainer};

fn main() -> mossformer2::Result<()> {
    let mut cfg = TrainConfig::desk();
    cfg.train.lr = 1e-3;
    cfg.data = CorpusSpec { count: 4, duration_s: 0.25, ..Default::default() };
    let corpus = synth_corpus(&cfg.data)?;
    let mut trainer = Trainer::with_corpus(cfg, corpus.clone())?;
    let start = Instant::now();
    for _ in 0..500 {
        let log = trainer.run_epoch()?;
        if log.epoch % 10 == 0 {
            let eval = evaluate_si_sdri(trainer.model(), &corpus)?;
            println!(
                "epoch {:>3}  loss {:>7.2} dB  train SI-SDRi {:>6.2} dB  eval {:>6.2} dB  grad {:.3}  {:.1}s",
                log.epoch,
                log.loss,
                log.si_sdri,
                eval,
                log.grad_norm_pre,
                start.elapsed().as_secs_f64()
            );
            if eval >= 10.0 {
                break;
            }
        }
    }
    Ok(())
}
