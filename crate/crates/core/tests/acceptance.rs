//! Acceptance criteria 1–11. Runs as a plain binary and prints one
//! `PASS`/`FAIL` line per criterion; any failure makes the target fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use mf2_tensor::gradcheck::{check_gradients, project, GradCheckOptions, GradCheckReport};
use mf2_tensor::{no_grad, Tensor};
use mossformer2::attention::{global_linear_attention, AttentionConfig, MossFormerBlock};
use mossformer2::commands::bench_rtf;
use mossformer2::data::{synth_corpus, CorpusSpec};
use mossformer2::objectives::{pit, pit_loss, si_sdr, EPS};
use mossformer2::params::{ParamBuilder, ParamStore};
use mossformer2::profile;
use mossformer2::recurrent::{ConvU, DilatedFsmn, GateBranch, GcuLayer, RecurrentConfig, RecurrentModule, Toggles};
use mossformer2::train::evaluate_si_sdri;
use mossformer2::{load_checkpoint, save_checkpoint, ModelConfig, Result, Separator, TrainConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-4;
/// Entries whose `h` and `h/2` central differences disagree by more than
/// this have an activation kink inside the stencil and are not compared.
const KINK_SCREEN: f64 = 1e-5;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Uniform in `±[0.05, 1]`, clear of every activation kink.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(data, shape).unwrap().with_grad()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn build<M>(seed: u64, f: impl FnOnce(&mut ParamBuilder<'_, f64>) -> M) -> (M, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = f(&mut ParamBuilder::new(&mut store, &mut rng));
    (m, store)
}

fn gradcheck(
    name: &str,
    inputs: &[Tensor<f64>],
    per_tensor: usize,
    f: impl Fn() -> Result<Tensor<f64>>,
) -> std::result::Result<GradCheckReport, String> {
    let opts = GradCheckOptions { max_per_tensor: per_tensor, kink_screen: Some(KINK_SCREEN), ..Default::default() };
    let r = check_gradients(inputs, f, opts).map_err(|e| format!("{name}: {e}"))?;
    let probed = r.checked + r.skipped;
    ensure(r.skipped * 20 <= probed, || format!("{name}: {} of {probed} entries straddle a kink", r.skipped))?;
    ensure(r.passes(GRAD_TOL), || format!("{name}: max rel error {:.2e} at {:?}", r.max_rel_error, r.worst))?;
    Ok(r)
}

fn recurrent_cfg(toggles: Toggles) -> RecurrentConfig {
    RecurrentConfig { dim: 8, bottleneck_dim: 4, memory_blocks: 2, memory_kernel: 5, groups: 2, toggles }
}

fn tiny_model(toggles: Toggles) -> ModelConfig {
    ModelConfig {
        embed_dim: 16,
        blocks: 1,
        chunk_size: 4,
        qk_dim: 8,
        bottleneck_dim: 8,
        memory_groups: Some(4),
        ablation: toggles,
        ..ModelConfig::desk()
    }
}

fn separator_gradcheck(toggles: Toggles, seed: u64) -> std::result::Result<GradCheckReport, String> {
    let cfg = tiny_model(toggles);
    let model = Separator::<f64>::new(&cfg, seed).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let x = Tensor::new(uniform(&mut rng, 64, 1.0), &[64]).unwrap().with_grad();
    let mut inputs = vec![x.clone()];
    inputs.extend(model.params().tensors());
    gradcheck("separator", &inputs, 32, || Ok(project(&model.separate(&x)?, 5)?))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let (mut checked, mut skipped) = (0, 0);
    let mut note = |r: GradCheckReport| {
        worst = worst.max(r.max_rel_error);
        checked += r.checked;
        skipped += r.skipped;
    };

    // primitives
    let a = away_from_zero(&mut rng, &[3, 4]);
    let b = away_from_zero(&mut rng, &[4, 5]);
    note(gradcheck("matmul", &[a.clone(), b.clone()], usize::MAX, || Ok(project(&a.matmul(&b)?, 1)?))?);
    let a3 = away_from_zero(&mut rng, &[2, 3, 4]);
    let b3 = away_from_zero(&mut rng, &[2, 4, 2]);
    note(gradcheck("batched matmul", &[a3.clone(), b3.clone()], usize::MAX, || Ok(project(&a3.matmul(&b3)?, 2)?))?);
    let x = away_from_zero(&mut rng, &[2, 11]);
    let w = away_from_zero(&mut rng, &[3, 2, 4]);
    let bias = away_from_zero(&mut rng, &[3]);
    note(gradcheck("conv1d", &[x.clone(), w.clone(), bias.clone()], usize::MAX, || {
        Ok(project(&x.conv1d(&w, Some(&bias), 2, 1)?, 3)?)
    })?);
    let wt = away_from_zero(&mut rng, &[2, 3, 4]);
    note(gradcheck("conv_transpose1d", &[x.clone(), wt.clone()], usize::MAX, || {
        Ok(project(&x.conv_transpose1d(&wt, 2)?, 4)?)
    })?);
    let img = away_from_zero(&mut rng, &[4, 1, 9]);
    let gw = away_from_zero(&mut rng, &[4, 2, 1, 3]);
    let gb = away_from_zero(&mut rng, &[4]);
    note(gradcheck("grouped_conv2d", &[img.clone(), gw.clone(), gb.clone()], usize::MAX, || {
        Ok(project(&img.grouped_conv2d(&gw, Some(&gb), 2, (1, 2))?, 5)?)
    })?);
    let s = away_from_zero(&mut rng, &[5, 6]);
    let g6 = away_from_zero(&mut rng, &[6]);
    let b6 = away_from_zero(&mut rng, &[6]);
    note(gradcheck("layer_norm", &[s.clone(), g6.clone(), b6.clone()], usize::MAX, || {
        Ok(project(&s.layer_norm(&g6, &b6)?, 6)?)
    })?);
    let g4 = away_from_zero(&mut rng, &[4]);
    let b4 = away_from_zero(&mut rng, &[4]);
    note(gradcheck("instance_norm", &[img.clone(), g4.clone(), b4.clone()], usize::MAX, || {
        Ok(project(&img.instance_norm(&g4, &b4)?, 7)?)
    })?);
    let alpha = away_from_zero(&mut rng, &[6]);
    note(gradcheck("activations", &[s.clone(), alpha.clone()], usize::MAX, || {
        let y = s.relu().add(&s.silu())?.add(&s.sigmoid())?.add(&s.softmax())?.add(&s.prelu(&alpha, 1)?)?;
        Ok(project(&y, 8)?)
    })?);
    let rot = away_from_zero(&mut rng, &[5, 4]);
    note(gradcheck("rotary", std::slice::from_ref(&rot), usize::MAX, || Ok(project(&rot.rotary(&[0, 3, 4, 9, 10], 10_000.0)?, 9)?))?);
    let u = away_from_zero(&mut rng, &[5, 6]);
    note(gradcheck("elementwise/shape", &[s.clone(), u.clone(), g6.clone()], usize::MAX, || {
        let y = s.mul(&u)?.sub(&u.scale(0.5))?.add_along(&g6, 1)?.mul_along(&g6, 1)?.add_scalar(0.3);
        let y = Tensor::concat(&[y.narrow(0, 1, 3)?, s.transpose()?.reshape(&[5, 6])?], 0)?.pad_end(1, 2)?;
        Ok(project(&y, 10)?.add(&s.mean())?)
    })?);

    // composites
    let (cu, store) = build(2, |pb| ConvU::<f64>::new(pb, 6));
    let x = away_from_zero(&mut rng, &[9, 6]);
    let mut inputs = vec![x.clone()];
    inputs.extend(store.tensors());
    note(gradcheck("conv-u", &inputs, usize::MAX, || Ok(project(&cu.forward(&x)?, 11)?))?);

    let rc = recurrent_cfg(Toggles::default());
    let (fsmn, store) = build(3, |pb| DilatedFsmn::<f64>::new(pb, &rc));
    let v = away_from_zero(&mut rng, &[13, 4]);
    let mut inputs = vec![v.clone()];
    inputs.extend(store.tensors());
    note(gradcheck("dilated fsmn", &inputs, usize::MAX, || Ok(project(&fsmn.forward(&v)?, 12)?))?);

    let (gcu, store) = build(4, |pb| GcuLayer::<f64>::new(pb, &rc));
    let mut inputs = vec![v.clone()];
    inputs.extend(store.tensors());
    note(gradcheck("gcu layer", &inputs, 16, || Ok(project(&gcu.forward(&v)?, 13)?))?);

    let (rm, store) = build(5, |pb| RecurrentModule::<f64>::new(pb, &rc));
    let x = away_from_zero(&mut rng, &[11, 8]);
    let mut inputs = vec![x.clone()];
    inputs.extend(store.tensors());
    note(gradcheck("recurrent module", &inputs, 16, || Ok(project(&rm.forward(&x)?, 14)?))?);

    let ac = AttentionConfig { dim: 8, chunk: 4, qk_dim: 4, expansion: 2, rotary: true };
    let (blk, store) = build(6, |pb| MossFormerBlock::<f64>::new(pb, ac));
    let mut inputs = vec![x.clone()];
    inputs.extend(store.tensors());
    note(gradcheck("mossformer block", &inputs, 16, || Ok(project(&blk.forward(&x)?, 15)?))?);

    note(separator_gradcheck(Toggles::default(), 7)?);

    let refs: Vec<Vec<f64>> = (0..2).map(|_| uniform(&mut rng, 32, 1.0)).collect();
    let mut est_data = [refs[1].clone(), refs[0].clone()].concat();
    est_data.iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
    let est = Tensor::new(est_data, &[2, 32]).unwrap().with_grad();
    note(gradcheck("pit loss", std::slice::from_ref(&est), usize::MAX, || Ok(pit_loss(&est, &refs)?.0))?);

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} entries ({skipped} at kinks), max rel error {worst:.2e}, {:.1}s", elapsed.as_secs_f64()))
}

/// Shapes and non-negativity of a model over the three canonical lengths.
fn shape_suite(cfg: &ModelConfig, seed: u64) -> std::result::Result<(), String> {
    let model = Separator::<f32>::new(cfg, seed).map_err(|e| e.to_string())?;
    let k = cfg.encoder_kernel;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in [k, 20 * k, cfg.aligned_len(16000)] {
        let x = Tensor::new(uniform(&mut rng, t, 0.5).iter().map(|v| *v as f32).collect(), &[t]).unwrap();
        let (e, masks, out) = no_grad(|| -> Result<_> {
            let e = model.encode(&x)?;
            let m = model.mask_net(&e)?;
            let out = model.decode(&e, &m)?;
            Ok((e, m, out))
        })
        .map_err(|e| e.to_string())?;
        ensure(out.shape() == [cfg.sources, t], || format!("T={t}: output shape {:?}", out.shape()))?;
        ensure(e.shape() == [cfg.embed_dim, 2 * t / k - 1], || format!("T={t}: encoded shape {:?}", e.shape()))?;
        ensure(e.data().iter().all(|v| *v >= 0.0), || format!("T={t}: negative encoder output"))?;
        ensure(masks.data().iter().all(|v| *v >= 0.0), || format!("T={t}: negative mask"))?;
        let full = no_grad(|| model.separate(&x)).map_err(|e| e.to_string())?;
        ensure(full.to_vec() == out.to_vec(), || "separate() differs from encode/mask/decode".into())?;
    }
    Ok(())
}

fn criterion_2() -> Outcome {
    let desk = ModelConfig::desk();
    shape_suite(&desk, 0)?;
    shape_suite(&ModelConfig { sources: 3, ..desk.clone() }, 1)?;
    shape_suite(&ModelConfig { encoder_kernel: 16, ..desk.clone() }, 2)?;
    Ok("T ∈ {K₁, 20·K₁, 16000} for K₁ ∈ {8, 16}, C ∈ {2, 3}".into())
}

/// `(φ(q)·φ(k)ᵀ)·v / S` by explicit loops.
fn quadratic_oracle(q: &[f64], k: &[f64], v: &[f64], s: usize, d: usize, dv: usize) -> Vec<f64> {
    let relu = |x: f64| x.max(0.0);
    let mut out = vec![0.0; s * dv];
    for t in 0..s {
        for j in 0..s {
            let a: f64 = (0..d).map(|c| relu(q[t * d + c]) * relu(k[j * d + c])).sum();
            for c in 0..dv {
                out[t * dv + c] += a * v[j * dv + c] / s as f64;
            }
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (d, dv) = (8, 12);
    let mut worst = 0.0f64;
    for s in [1, 2, 7, 16, 33, 64] {
        let q = uniform(&mut rng, s * d, 1.0);
        let k = uniform(&mut rng, s * d, 1.0);
        let v = uniform(&mut rng, s * dv, 1.0);
        let oracle = quadratic_oracle(&q, &k, &v, s, d, dv);
        let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-30);
        let f64_out = global_linear_attention(
            &Tensor::new(q.clone(), &[s, d]).unwrap(),
            &Tensor::new(k.clone(), &[s, d]).unwrap(),
            &Tensor::new(v.clone(), &[s, dv]).unwrap(),
        )
        .map_err(|e| e.to_string())?
        .to_vec();
        let to32 = |x: &[f64]| x.iter().map(|v| *v as f32).collect::<Vec<_>>();
        let f32_out = global_linear_attention(
            &Tensor::new(to32(&q), &[s, d]).unwrap(),
            &Tensor::new(to32(&k), &[s, d]).unwrap(),
            &Tensor::new(to32(&v), &[s, dv]).unwrap(),
        )
        .map_err(|e| e.to_string())?
        .to_f64_vec();
        for out in [&f64_out, &f32_out] {
            let err = out.iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            ensure(err < 1e-5, || format!("S={s}: rel error {err:.2e}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("S ≤ 64, max rel error {worst:.2e} (f32 and f64)"))
}

/// Input frames that the output at `t` depends on through the memory's
/// sliding windows (normalisation statistics held at their values).
fn dependence(fsmn: &DilatedFsmn<f64>, s: usize, d: usize, t: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = Tensor::new(uniform(&mut rng, s * d, 1.0), &[s, d]).unwrap().with_grad();
    let y = fsmn.forward_frozen_stats(&v).unwrap();
    let w = Tensor::new(uniform(&mut rng, d, 1.0), &[1, d]).unwrap();
    y.narrow(0, t, 1).unwrap().mul(&w).unwrap().sum().backward().unwrap();
    let g = v.grad().unwrap();
    (0..s).filter(|&i| g[i * d..(i + 1) * d].iter().any(|x| *x != 0.0)).collect()
}

fn criterion_4() -> Outcome {
    let (s, d) = (41, 4);
    let mut lines = vec![];
    for (blocks, dilation, reach) in [(2, true, 6), (2, false, 4), (3, true, 14), (3, false, 6)] {
        let cfg = RecurrentConfig {
            dim: 8,
            bottleneck_dim: d,
            memory_blocks: blocks,
            memory_kernel: 5,
            groups: 2,
            toggles: Toggles { dilation, ..Default::default() },
        };
        let formula: usize = 1 + (0..blocks).map(|l| if dilation { 1 << l } else { 1 } * 4).sum::<usize>();
        ensure(formula == 2 * reach + 1 && cfg.receptive_field() == formula, || format!("RF formula {formula}"))?;
        let (fsmn, _) = build(40 + blocks as u64, |pb| DilatedFsmn::<f64>::new(pb, &cfg));
        for t in [20, 3, s - 2] {
            let got = dependence(&fsmn, s, d, t, t as u64);
            let expect: Vec<usize> = (t.saturating_sub(reach)..=(t + reach).min(s - 1)).collect();
            ensure(got == expect, || format!("L={blocks} dilation={dilation} t={t}: {got:?}"))?;
        }
        lines.push(format!("L={blocks}{} ±{reach}", if dilation { "" } else { " undilated" }));
    }
    Ok(lines.join(", "))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for conv_u in [true, false] {
        let cfg = recurrent_cfg(Toggles { conv_u, ..Default::default() });
        let (g, _) = build(50, |pb| GcuLayer::<f64>::new(pb, &cfg));
        let x = Tensor::new(uniform(&mut rng, 10 * 4, 1.0), &[10, 4]).unwrap();
        let zero = |t: &Tensor<f64>| t.update_data(|d| d.fill(0.0));
        let bias = match g.u.as_ref().unwrap() {
            GateBranch::ConvU(c) => {
                zero(&c.linear.weight);
                zero(&c.linear.bias);
                zero(&c.dconv_weight);
                c.dconv_bias.clone()
            }
            GateBranch::Linear(l) => {
                zero(&l.weight);
                l.bias.clone()
            }
        };
        zero(&bias);
        let out = g.forward(&x).unwrap().to_vec();
        ensure(out == x.to_vec(), || format!("conv_u={conv_u}: zero gate changed the input"))?;
        bias.update_data(|d| d.fill(1.0));
        let y = g.fsmn.forward(&g.v.as_ref().unwrap().forward(&x).unwrap()).unwrap().to_vec();
        let expect: Vec<f64> = x.to_vec().iter().zip(&y).map(|(a, b)| a + b).collect();
        let out = g.forward(&x).unwrap().to_vec();
        ensure(out == expect, || format!("conv_u={conv_u}: unit gate is not x + Y"))?;
    }
    Ok("U≡0 ⇒ O = X, U≡1 ⇒ O = X + Y (Conv-U and linear gates)".into())
}

/// Textbook SI-SDR, written out independently of the library.
fn si_sdr_oracle(est: &[f64], r: &[f64]) -> f64 {
    let dot: f64 = est.iter().zip(r).map(|(a, b)| a * b).sum();
    let rr: f64 = r.iter().map(|b| b * b).sum();
    let s: Vec<f64> = r.iter().map(|b| dot / rr * b).collect();
    let ps: f64 = s.iter().map(|v| v * v).sum();
    let pn: f64 = est.iter().zip(&s).map(|(a, b)| (a - b) * (a - b)).sum();
    10.0 * ((ps + 1e-8) / (pn + 1e-8)).log10()
}

/// All permutations of `0..n` by recursive insertion.
fn all_perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![];
    for p in all_perms(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for c in [2usize, 3] {
        for _ in 0..100 {
            let len = 40;
            let refs: Vec<Vec<f64>> = (0..c).map(|_| uniform(&mut rng, len, 1.0)).collect();
            let est: Vec<Vec<f64>> = (0..c)
                .map(|_| {
                    let mix: Vec<f64> = (0..len).map(|i| refs.iter().map(|r| r[i] * rng.gen_range(0.0..1.0)).sum()).collect();
                    mix.iter().map(|v| v + rng.gen_range(-0.2..0.2)).collect()
                })
                .collect();
            let oracle = all_perms(c)
                .into_iter()
                .map(|p| (p.iter().enumerate().map(|(i, &j)| si_sdr_oracle(&est[i], &refs[j])).sum::<f64>() / c as f64, p))
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            let e: Vec<&[f64]> = est.iter().map(Vec::as_slice).collect();
            let r: Vec<&[f64]> = refs.iter().map(Vec::as_slice).collect();
            let got = pit(&e, &r).map_err(|e| e.to_string())?;
            ensure((got.mean_si_sdr - oracle.0).abs() < 1e-9 && got.perm == oracle.1, || {
                format!("C={c}: {got:?} vs oracle {oracle:?}")
            })?;

            // relabel the references with a random permutation σ
            let sigma = &all_perms(c)[rng.gen_range(0..(1..=c).product::<usize>())];
            let permuted: Vec<Vec<f64>> = sigma.iter().map(|&j| refs[j].clone()).collect();
            let t = Tensor::new(est.concat(), &[c, len]).unwrap();
            let (l0, a0) = pit_loss(&t, &refs).map_err(|e| e.to_string())?;
            let (l1, a1) = pit_loss(&t, &permuted).map_err(|e| e.to_string())?;
            ensure((l0.item() - l1.item()).abs() < 1e-6, || format!("loss changed under σ={sigma:?}"))?;
            let composed: Vec<usize> = a1.perm.iter().map(|&j| sigma[j]).collect();
            ensure(composed == a0.perm, || format!("assignment does not compose: {composed:?} vs {:?}", a0.perm))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} instances, C ∈ {{2, 3}}"))
}

fn criterion_7() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-6;
    let zero = si_sdr(&[1.0f64, 1.0], &[1.0, 0.0]).map_err(|e| e.to_string())?;
    ensure(close(zero, 0.0), || format!("[1,1] vs [1,0] gave {zero}"))?;
    let floor = si_sdr(&[0.0f64, 1.0], &[1.0, 0.0]).map_err(|e| e.to_string())?;
    let floor_expect = 10.0 * (EPS / (1.0 + EPS)).log10();
    ensure(close(floor, floor_expect), || format!("orthogonal gave {floor}, expected {floor_expect}"))?;
    let cap = si_sdr(&[2.0f64, 0.0], &[1.0, 0.0]).map_err(|e| e.to_string())?;
    let cap_expect = 10.0 * ((4.0 + EPS) / EPS).log10();
    ensure(close(cap, cap_expect), || format!("scaled copy gave {cap}, expected {cap_expect}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = uniform(&mut rng, 8000, 3.0);
    let e: Vec<f64> = r.iter().map(|v| 0.8 * v + rng.gen_range(-1.5..1.5)).collect();
    let base = si_sdr(&e, &r).map_err(|e| e.to_string())?;
    ensure(close(base, si_sdr_oracle(&e, &r)), || "library and oracle disagree".into())?;
    for alpha in [0.01, 1.0, 100.0] {
        let scaled: Vec<f64> = e.iter().map(|v| alpha * v).collect();
        let v = si_sdr(&scaled, &r).map_err(|e| e.to_string())?;
        ensure(close(v, base), || format!("α={alpha}: {v} vs {base}"))?;
    }
    Ok(format!("0 dB, floor {floor:.4} dB, cap {cap:.4} dB, scale-invariant"))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut cfg = TrainConfig::desk();
    cfg.train.lr = 1e-3;
    cfg.data = CorpusSpec { count: 4, duration_s: 0.25, ..Default::default() };
    let corpus = synth_corpus(&cfg.data).map_err(|e| e.to_string())?;
    let mut trainer = Trainer::with_corpus(cfg, corpus.clone()).map_err(|e| e.to_string())?;
    let mut steps = 0;
    let mut score = f64::NEG_INFINITY;
    while steps < 2000 {
        steps += trainer.run_epoch().map_err(|e| e.to_string())?.steps;
        if trainer.epoch() % 5 == 0 {
            score = evaluate_si_sdri(trainer.model(), &corpus).map_err(|e| e.to_string())?;
            if score >= 10.0 {
                break;
            }
        }
    }
    ensure(score >= 10.0, || format!("SI-SDRi {score:.2} dB after {steps} steps"))?;
    Ok(format!("SI-SDRi {score:.2} dB after {steps} steps, {:.1}s", start.elapsed().as_secs_f64()))
}

/// Recurrent-module parameter count at the desk profile, derived by hand
/// from the layer list of each variant.
fn hand_recurrent_count(t: Toggles) -> usize {
    let (n, nb, blocks, k) = (64usize, 32usize, 2usize, 5usize);
    let d = if t.bottleneck { nb } else { n };
    let groups = d;
    let linear = |i: usize, o: usize| i * o + o;
    let outer = if t.bottleneck { (linear(n, nb) + nb + 2 * nb) + (2 * nb + linear(nb, n)) } else { 0 };
    let branch = if t.conv_u { 2 * d + linear(d, d) + 3 * d + d } else { linear(d, d) };
    let gates = if t.gate { 2 * branch } else { 0 };
    let memory: usize = (1..=blocks)
        .map(|l| {
            let cin = if t.dense { l * d } else { d };
            d * (cin / groups) * k + 3 * d
        })
        .sum();
    let proj = if t.dense { linear((blocks + 1) * d, d) } else { linear(d, d) };
    outer + gates + linear(d, d) + d + memory + proj
}

fn criterion_9() -> Outcome {
    let full = Toggles::default();
    let variants = [
        ("no dilation", Toggles { dilation: false, ..full }),
        ("no dense", Toggles { dense: false, ..full }),
        ("linear gate", Toggles { conv_u: false, ..full }),
        ("no gate", Toggles { gate: false, ..full }),
        ("no bottleneck", Toggles { bottleneck: false, ..full }),
    ];
    let desk = ModelConfig::desk();
    let full_count = desk.param_count();
    let mut counts = vec![("full", full_count)];
    for (i, (name, t)) in variants.iter().enumerate() {
        let cfg = ModelConfig { ablation: *t, ..desk.clone() };
        let model = Separator::<f32>::new(&cfg, 0).map_err(|e| e.to_string())?;
        let actual = model.params().numel();
        let predicted = full_count - desk.blocks * hand_recurrent_count(full) + desk.blocks * hand_recurrent_count(*t);
        ensure(actual == predicted && cfg.param_count() == actual, || {
            format!("{name}: instantiated {actual}, predicted {predicted}")
        })?;
        shape_suite(&cfg, i as u64).map_err(|e| format!("{name}: {e}"))?;
        separator_gradcheck(*t, 70 + i as u64).map_err(|e| format!("{name}: {e}"))?;
        let rc = recurrent_cfg(*t);
        let (rm, store) = build(80 + i as u64, |pb| RecurrentModule::<f64>::new(pb, &rc));
        let mut rng = ChaCha8Rng::seed_from_u64(90 + i as u64);
        let x = away_from_zero(&mut rng, &[9, 8]);
        let mut inputs = vec![x.clone()];
        inputs.extend(store.tensors());
        gradcheck(name, &inputs, 8, || Ok(project(&rm.forward(&x)?, 3)?))?;
        counts.push((name, actual));
    }
    // gate < dense < linear gate < full = dilation < bottleneck
    let by = |n: &str| counts.iter().find(|c| c.0 == n).unwrap().1;
    let order = ["no gate", "no dense", "linear gate", "full", "no bottleneck"];
    ensure(order.windows(2).all(|w| by(w[0]) < by(w[1])) && by("no dilation") == by("full"), || {
        format!("unexpected ordering {counts:?}")
    })?;
    Ok(counts.iter().map(|(n, c)| format!("{n} {c}")).collect::<Vec<_>>().join(", "))
}

fn criterion_10() -> Outcome {
    let model = Separator::<f32>::new(&ModelConfig::desk(), 0).map_err(|e| e.to_string())?;
    let short = bench_rtf(&model, 2.0, 5, 0).map_err(|e| e.to_string())?;
    let long = bench_rtf(&model, 4.0, 5, 0).map_err(|e| e.to_string())?;
    let global = |r: &mossformer2::commands::RtfReport| r.components[profile::ATTENTION_GLOBAL];
    let ratio = global(&long) / global(&short);
    ensure(long.encoded_len + 1 == 2 * (short.encoded_len + 1), || "S did not double".into())?;
    ensure(ratio < 2.5, || format!("global attention time ratio {ratio:.2}"))?;
    for r in [&short, &long] {
        ensure(r.timings.len() == 5, || "expected 5 timings".into())?;
        let gap = (r.component_total - r.median_seconds).abs() / r.median_seconds;
        ensure(gap < 0.05, || format!("components cover {:.1}% of total", 100.0 * r.component_total / r.median_seconds))?;
    }
    Ok(format!(
        "S {}→{}: global attention ×{ratio:.2}; desk RTF {:.3} (4 s clip)",
        short.encoded_len, long.encoded_len, long.median_rtf
    ))
}

fn criterion_11() -> Outcome {
    let model = Separator::<f32>::new(&ModelConfig::desk(), 11).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.mft2"), dir.path().join("b.mft2"));
    save_checkpoint(&model, &a).map_err(|e| e.to_string())?;
    let reloaded = load_checkpoint(&a, None).map_err(|e| e.to_string())?;
    save_checkpoint(&reloaded, &b).map_err(|e| e.to_string())?;
    let first = std::fs::read(&a).map_err(|e| e.to_string())?;
    let second = std::fs::read(&b).map_err(|e| e.to_string())?;
    ensure(first == second, || "save → load → save changed the archive".into())?;
    let mut cfg = TrainConfig::desk();
    cfg.data = CorpusSpec { count: 2, duration_s: 0.1, ..Default::default() };
    let run = || -> std::result::Result<f64, String> {
        let mut t = Trainer::new(cfg.clone()).map_err(|e| e.to_string())?;
        Ok(t.run_epoch().map_err(|e| e.to_string())?.loss)
    };
    let (a, b) = (run()?, run()?);
    ensure((a - b).abs() < 1e-6, || format!("epoch-1 loss {a} vs {b}"))?;
    Ok(format!("{} byte archive stable; epoch-1 loss {a:.6} twice", first.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("gradient suite", criterion_1),
        ("length/shape suite", criterion_2),
        ("linear-attention oracle", criterion_3),
        ("receptive-field oracle", criterion_4),
        ("GCU algebra", criterion_5),
        ("PIT oracle", criterion_6),
        ("SI-SDR fixtures", criterion_7),
        ("overfit capability", criterion_8),
        ("ablation surface", criterion_9),
        ("complexity check", criterion_10),
        ("persistence", criterion_11),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
