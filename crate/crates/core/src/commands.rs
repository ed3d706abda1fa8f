//! Implementations behind the `mossformer2` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::archive::load_checkpoint;
use crate::config::TrainConfig;
use crate::data::{synth_source, wav, CorpusSpec, Manifest, MixtureSample};
use crate::objectives::{rtf, si_sdri, EvalReport};
use crate::profile;
use crate::separator::{ModelConfig, Separator};
use crate::train::{TrainSummary, Trainer};
use crate::{Error, Result};

/// `train`: reads a config, optionally overrides its seed, trains into `out_dir`.
pub fn cmd_train(config: &Path, out_dir: &Path, seed: Option<u64>) -> Result<TrainSummary> {
    let mut cfg = TrainConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Trainer::new(cfg)?.fit(out_dir)
}

fn model_override(config: Option<&Path>) -> Result<Option<ModelConfig>> {
    config.map(|p| TrainConfig::load(p).map(|c| c.model)).transpose()
}

/// `separate`: writes `source_1.wav … source_C.wav`, each as long as the input.
/// Nothing is written unless the checkpoint and input both load.
pub fn cmd_separate(checkpoint: &Path, input: &Path, out_dir: &Path, config: Option<&Path>) -> Result<Vec<PathBuf>> {
    let model = load_checkpoint(checkpoint, model_override(config)?.as_ref())?;
    let (samples, rate) = wav::read(input)?;
    let outs = model.separate_samples(&samples)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    outs.iter()
        .enumerate()
        .map(|(i, s)| {
            let p = out_dir.join(format!("source_{}.wav", i + 1));
            wav::write(&p, s, rate)?;
            Ok(p)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub evaluated: usize,
    pub failed: usize,
    pub mean_si_sdri: f64,
}

/// Scores `estimate` on every manifest entry. Entries that fail to load or
/// score become error records; the run continues.
pub fn evaluate_manifest(
    manifest: &Manifest,
    mut estimate: impl FnMut(&MixtureSample) -> Result<Vec<Vec<f32>>>,
) -> (Vec<EvalReport>, EvalSummary) {
    let mut reports = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let report = (|| -> Result<EvalReport> {
            let sample = manifest.load_entry(entry)?;
            let start = Instant::now();
            let est = estimate(&sample)?;
            let elapsed = start.elapsed();
            let est: Vec<&[f32]> = est.iter().map(Vec::as_slice).collect();
            let refs: Vec<&[f32]> = sample.sources.iter().map(Vec::as_slice).collect();
            let (imp, a) = si_sdri(&est, &refs, &sample.mix)?;
            Ok(EvalReport {
                id: entry.id.clone(),
                si_sdr: a.per_source,
                permutation: a.perm,
                si_sdri: imp,
                rtf: rtf(elapsed, sample.len() as f64 / sample.sample_rate as f64),
                error: None,
            })
        })()
        .unwrap_or_else(|e| EvalReport::failed(&entry.id, &e));
        reports.push(report);
    }
    let ok: Vec<f64> = reports.iter().filter(|r| r.error.is_none()).map(|r| r.si_sdri).collect();
    let summary = EvalSummary {
        evaluated: ok.len(),
        failed: reports.len() - ok.len(),
        mean_si_sdri: ok.iter().sum::<f64>() / ok.len().max(1) as f64,
    };
    (reports, summary)
}

/// `evaluate`: one JSON line per entry to `out`, then a summary line.
pub fn cmd_evaluate(checkpoint: &Path, manifest: &Path, config: Option<&Path>, out: &mut impl Write) -> Result<EvalSummary> {
    let model = load_checkpoint(checkpoint, model_override(config)?.as_ref())?;
    let manifest = Manifest::load(manifest)?;
    let (reports, summary) = evaluate_manifest(&manifest, |s| model.separate_samples(&s.mix));
    let io = |e| Error::io("<output>", e);
    for r in &reports {
        writeln!(out, "{}", r.to_json_line()).map_err(io)?;
    }
    writeln!(out, "{}", serde_json::json!({ "summary": summary })).map_err(io)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct RtfReport {
    pub duration_s: f64,
    pub samples: usize,
    pub encoded_len: usize,
    pub repeats: usize,
    /// Wall-clock seconds of each repeat.
    pub timings: Vec<f64>,
    pub median_seconds: f64,
    pub median_rtf: f64,
    /// Median seconds per component; nested entries overlap their parents.
    pub components: IndexMap<String, f64>,
    /// Median of the per-repeat sums over the top-level components.
    pub component_total: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Times `repeats` separations of a synthetic clip of `duration_s` seconds
/// after one untimed warm-up.
pub fn bench_rtf(model: &Separator<f32>, duration_s: f64, repeats: usize, seed: u64) -> Result<RtfReport> {
    if !(duration_s > 0.0) {
        return Err(Error::config("duration", "must be positive"));
    }
    if repeats == 0 {
        return Err(Error::config("repeats", "must be ≥ 1"));
    }
    let spec = CorpusSpec { sources: model.config().sources, duration_s, ..Default::default() };
    let n = model.config().aligned_len(spec.samples().max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clip = vec![0.0f32; n];
    for k in 0..model.config().sources {
        synth_source(&spec, k, n, &mut rng).iter().zip(clip.iter_mut()).for_each(|(s, c)| *c += s);
    }
    model.separate_samples(&clip)?;
    let mut timings = Vec::with_capacity(repeats);
    let mut per_component: IndexMap<String, Vec<f64>> = IndexMap::new();
    let mut sums = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let (out, parts) = profile::record(|| model.separate_samples(&clip));
        let elapsed = start.elapsed();
        out?;
        timings.push(elapsed.as_secs_f64());
        let top: Duration = profile::TOP_LEVEL.iter().filter_map(|k| parts.get(k)).sum();
        sums.push(top.as_secs_f64());
        for (k, d) in parts {
            per_component.entry(k.to_string()).or_default().push(d.as_secs_f64());
        }
    }
    let median_seconds = median(&timings);
    let audio = n as f64 / spec.sample_rate as f64;
    Ok(RtfReport {
        duration_s: audio,
        samples: n,
        encoded_len: model.config().encoded_len(n)?,
        repeats,
        median_rtf: median_seconds / audio,
        timings,
        median_seconds,
        components: per_component.into_iter().map(|(k, v)| (k, median(&v))).collect(),
        component_total: median(&sums),
    })
}

/// `bench-rtf`: model from a checkpoint, or a fresh one from a config.
pub fn cmd_bench_rtf(
    checkpoint: Option<&Path>,
    config: Option<&Path>,
    duration_s: f64,
    repeats: usize,
    seed: u64,
) -> Result<RtfReport> {
    let model = match (checkpoint, config) {
        (Some(ck), _) => load_checkpoint(ck, model_override(config)?.as_ref())?,
        (None, Some(c)) => Separator::new(&TrainConfig::load(c)?.model, seed)?,
        (None, None) => Separator::new(&ModelConfig::desk(), seed)?,
    };
    bench_rtf(&model, duration_s, repeats, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamReport {
    pub rows: Vec<(String, usize)>,
    pub total: usize,
    /// Scalar count of an actually instantiated model.
    pub instantiated: usize,
}

impl ParamReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        for (name, n) in &self.rows {
            s += &format!("{name:<12} {n:>12}\n");
        }
        s += &format!("{:<12} {:>12}  ({:.2} M)\n", "total", self.total, self.total as f64 / 1e6);
        s
    }
}

/// Closed-form breakdown, cross-checked against an instantiated model.
pub fn param_report(cfg: &ModelConfig) -> Result<ParamReport> {
    let rows: Vec<(String, usize)> = cfg.param_breakdown().into_iter().map(|(k, n)| (k.to_string(), n)).collect();
    let total = rows.iter().map(|(_, n)| n).sum();
    let instantiated = Separator::<f32>::new(cfg, 0)?.params().numel();
    Ok(ParamReport { rows, total, instantiated })
}

pub fn cmd_param_count(config: &Path) -> Result<ParamReport> {
    param_report(&TrainConfig::load(config)?.model)
}
