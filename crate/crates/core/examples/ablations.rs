//! Parameter counts and a short training run for each recurrent-module toggle.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example ablations
//! ```

use mossformer2::data::CorpusSpec;
use mossformer2::{TrainConfig, Trainer, Toggles};

fn main() -> mossformer2::Result<()> {
    let full = Toggles::default();
    let variants = [
        ("full", full),
        ("no dilation", Toggles { dilation: false, ..full }),
        ("no dense", Toggles { dense: false, ..full }),
        ("linear gate", Toggles { conv_u: false, ..full }),
        ("no gate", Toggles { gate: false, ..full }),
        ("no bottleneck", Toggles { bottleneck: false, ..full }),
    ];
    for (name, t) in variants {
        let mut cfg = TrainConfig::desk();
        cfg.model.ablation = t;
        cfg.train.lr = 1e-3;
        cfg.data = CorpusSpec { count: 4, duration_s: 0.25, ..Default::default() };
        let mut trainer = Trainer::new(cfg)?;
        let mut last = None;
        for _ in 0..10 {
            last = Some(trainer.run_epoch()?);
        }
        let log = last.expect("ran");
        println!(
            "{name:<14} params {:>7}  epoch {:>2} loss {:>7.2} dB  SI-SDRi {:>6.2} dB",
            trainer.model().params().numel(),
            log.epoch,
            log.loss,
            trainer.evaluate(trainer.corpus())?
        );
    }
    Ok(())
}
