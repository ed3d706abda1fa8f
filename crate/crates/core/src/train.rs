//! Training loop: Adam, PIT SI-SDR loss, global-norm clipping and the
//! hold-then-halve learning-rate schedule.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mf2_tensor::optim::global_grad_norm;
use mf2_tensor::{clip_global_norm, no_grad, Adam, AdamConfig, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::save_checkpoint;
use crate::config::TrainConfig;
use crate::data::{dynamic_mix, synth_corpus, MixtureSample, SourcePool};
use crate::objectives::{pit_loss, si_sdr, si_sdri};
use crate::separator::Separator;
use crate::{Error, Result};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const BEST_CHECKPOINT: &str = "best.mft2";
pub const LAST_CHECKPOINT: &str = "last.mft2";

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub steps: usize,
    /// Mean PIT loss (negative SI-SDR, dB).
    pub loss: f64,
    /// Mean SI-SDRi of the training estimates seen this epoch.
    pub si_sdri: f64,
    /// Largest gradient norm before clipping.
    pub grad_norm_max: f64,
    /// Mean gradient norm before and after clipping.
    pub grad_norm_pre: f64,
    pub grad_norm_post: f64,
    pub seconds: f64,
}

pub struct Trainer {
    cfg: TrainConfig,
    model: Separator<f32>,
    opt: Adam<f32>,
    corpus: Vec<MixtureSample>,
    pool: Option<SourcePool>,
    rng: ChaCha8Rng,
    epoch: usize,
    step: usize,
}

impl Trainer {
    /// Builds the model and the synthetic training corpus described by `cfg`.
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let corpus = synth_corpus(&cfg.data)?;
        Self::with_corpus(cfg, corpus)
    }

    pub fn with_corpus(cfg: TrainConfig, corpus: Vec<MixtureSample>) -> Result<Self> {
        cfg.validate()?;
        if corpus.is_empty() {
            return Err(Error::config("data.count", "training corpus is empty"));
        }
        let model = Separator::new(&cfg.model, cfg.seed)?;
        let opt = Adam::new(model.params().tensors(), AdamConfig { lr: cfg.train.lr, ..Default::default() });
        let pool = cfg.train.dynamic_mixing.then(|| SourcePool::from_corpus(&corpus));
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_da7a);
        Ok(Self { cfg, model, opt, corpus, pool, rng, epoch: 0, step: 0 })
    }

    pub fn model(&self) -> &Separator<f32> {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn corpus(&self) -> &[MixtureSample] {
        &self.corpus
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn optimizer(&self) -> &Adam<f32> {
        &self.opt
    }

    fn epoch_samples(&mut self) -> Result<Vec<MixtureSample>> {
        let mut order: Vec<usize> = (0..self.corpus.len()).collect();
        order.shuffle(&mut self.rng);
        match &self.pool {
            None => Ok(order.into_iter().map(|i| self.corpus[i].clone()).collect()),
            Some(pool) => order
                .into_iter()
                .map(|i| Ok(dynamic_mix(pool, self.cfg.model.sources, self.corpus[i].len(), &mut self.rng)?.sample))
                .collect(),
        }
    }

    /// One pass over the corpus. Returns the epoch's log record.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let start = Instant::now();
        self.epoch += 1;
        let lr = self.cfg.train.lr_at(self.epoch);
        self.opt.set_lr(lr);
        let samples = self.epoch_samples()?;
        let b = self.cfg.train.batch_size;
        let params = self.model.params().tensors();
        let (mut loss_sum, mut sdri_sum) = (0.0, 0.0);
        let (mut pre_sum, mut post_sum, mut pre_max) = (0.0, 0.0, 0.0f64);
        let mut steps = 0;
        for batch in samples.chunks(b) {
            self.opt.zero_grad();
            let mut batch_loss = 0.0;
            for sample in batch {
                let t = sample.len();
                let x = Tensor::new(sample.mix.clone(), &[t])?;
                let est = self.model.separate(&x)?;
                let (loss, assignment) = pit_loss(&est, &sample.sources)?;
                loss.scale(1.0 / batch.len() as f64).backward()?;
                let value = loss.item() as f64;
                batch_loss += value / batch.len() as f64;
                let refs: Vec<&[f32]> = sample.sources.iter().map(Vec::as_slice).collect();
                let baseline = refs.iter().map(|r| si_sdr(&sample.mix, r)).sum::<Result<f64>>()? / refs.len() as f64;
                sdri_sum += assignment.mean_si_sdr - baseline;
            }
            self.step += 1;
            let pre = clip_global_norm(&params, self.cfg.train.clip_norm);
            if !batch_loss.is_finite() || !pre.is_finite() {
                return Err(Error::NonFiniteLoss { epoch: self.epoch, step: self.step, loss: batch_loss, grad_norm: pre });
            }
            let post = global_grad_norm(&params);
            self.opt.step();
            loss_sum += batch_loss;
            pre_sum += pre;
            post_sum += post;
            pre_max = pre_max.max(pre);
            steps += 1;
        }
        Ok(EpochLog {
            epoch: self.epoch,
            lr,
            steps,
            loss: loss_sum / steps as f64,
            si_sdri: sdri_sum / samples.len() as f64,
            grad_norm_max: pre_max,
            grad_norm_pre: pre_sum / steps as f64,
            grad_norm_post: post_sum / steps as f64,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Trains up to `max_epochs` (or the early-stop target), writing the log
    /// and the best/last checkpoints into `out_dir`.
    pub fn fit(&mut self, out_dir: impl AsRef<Path>) -> Result<TrainSummary> {
        let out_dir = out_dir.as_ref();
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let log_path = out_dir.join(LOG_FILE);
        let mut log = BufWriter::new(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
        let mut best: Option<EpochLog> = None;
        let mut epochs = Vec::new();
        while self.epoch < self.cfg.train.max_epochs {
            let rec = self.run_epoch()?;
            writeln!(log, "{}", serde_json::to_string(&rec).expect("log serialises"))
                .and_then(|_| log.flush())
                .map_err(|e| Error::io(&log_path, e))?;
            if best.as_ref().is_none_or(|b| rec.loss < b.loss) {
                save_checkpoint(&self.model, out_dir.join(BEST_CHECKPOINT))?;
                best = Some(rec.clone());
            }
            let done = self.cfg.train.target_si_sdri.is_some_and(|t| rec.si_sdri >= t);
            epochs.push(rec);
            if done {
                break;
            }
        }
        save_checkpoint(&self.model, out_dir.join(LAST_CHECKPOINT))?;
        Ok(TrainSummary {
            epochs,
            best_epoch: best.map_or(0, |b| b.epoch),
            log: log_path,
            best_checkpoint: out_dir.join(BEST_CHECKPOINT),
            last_checkpoint: out_dir.join(LAST_CHECKPOINT),
        })
    }

    /// Mean SI-SDRi of the current model on `samples`, without a graph.
    pub fn evaluate(&self, samples: &[MixtureSample]) -> Result<f64> {
        evaluate_si_sdri(&self.model, samples)
    }
}

pub fn evaluate_si_sdri(model: &Separator<f32>, samples: &[MixtureSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let est = no_grad(|| model.separate_samples(&s.mix))?;
        let est: Vec<&[f32]> = est.iter().map(Vec::as_slice).collect();
        let refs: Vec<&[f32]> = s.sources.iter().map(Vec::as_slice).collect();
        total += si_sdri(&est, &refs, &s.mix)?.0;
    }
    Ok(total / samples.len().max(1) as f64)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub log: PathBuf,
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CorpusSpec;

    fn tiny() -> TrainConfig {
        let mut cfg = TrainConfig::desk();
        cfg.model.embed_dim = 16;
        cfg.model.blocks = 1;
        cfg.model.qk_dim = 8;
        cfg.model.bottleneck_dim = 8;
        cfg.data = CorpusSpec { count: 2, duration_s: 0.02, ..Default::default() };
        cfg.train.lr = 1e-3;
        cfg
    }

    #[test]
    fn epoch_is_reproducible() {
        let a = Trainer::new(tiny()).unwrap().run_epoch().unwrap();
        let b = Trainer::new(tiny()).unwrap().run_epoch().unwrap();
        assert_eq!(a.loss, b.loss);
        assert!(a.grad_norm_pre >= a.grad_norm_post);
    }

    #[test]
    fn dynamic_mixing_runs() {
        let mut cfg = tiny();
        cfg.train.dynamic_mixing = true;
        cfg.data.speakers = 3;
        let rec = Trainer::new(cfg).unwrap().run_epoch().unwrap();
        assert!(rec.loss.is_finite());
    }
}
