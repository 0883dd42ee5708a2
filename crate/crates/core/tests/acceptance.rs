//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{mean, random_frames, random_tensor, rng, window_constant_frames};
use hfr_core::aligner::{
    init_from_single_frame, pool_tokens, pre_pool_forward, single_frame_forward, tokens_per_window,
    video_forward, window_backward, window_forward, window_forward_traced, Pooling,
    SingleFrameAlignerParams,
};
use hfr_core::analysis::{
    cosine_report, cost_model, dominance_construction, token_budget, CostConfig,
};
use hfr_core::decoding::{decode_repeat, decode_trimmed, trim_aligner, DecodeConfig, DecodeMethod};
use hfr_core::features::{partition_windows, FrameFeatures, WindowBatch};
use hfr_core::numerics::{
    gelu, gelu_backward, linear, linear_backward, max_pool_2x2, max_pool_2x2_backward, Tensor,
};
use hfr_core::trainer::{
    loss_and_grads, loss_from_features, make_motion_dataset, train, ModelConfig, ToyModel,
    TrainConfig, DEFAULT_SPEEDS,
};
use hfr_core::verify::tiny_instance;

type Outcome = Result<String, String>;
type Setter = dyn Fn(&mut ToyModel<f64>, &Tensor<f64>);
type Criterion = (&'static str, fn() -> Outcome, u64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn averaging() -> Outcome {
    let (p, d, h, w) = (16, 24, 32, 16);
    let (mut worst32, mut worst64) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let base = SingleFrameAlignerParams::<f64>::random(seed, d, h);
        let params = init_from_single_frame(&base, w, 0.0, seed).map_err(e2s)?;
        let frames = random_frames::<f64>(&mut rng(seed ^ 0xF00D), w, p, d);
        let singles: Vec<Tensor<f64>> = frames
            .iter()
            .map(|f| single_frame_forward(&f.z, &base).unwrap())
            .collect();
        let got = pre_pool_forward(
            &WindowBatch::new(frames.clone(), 0).concat().unwrap(),
            &params,
        )
        .map_err(e2s)?;
        worst64 = worst64.max(got.max_abs_diff(&mean(&singles)).unwrap());

        let (base32, params32) = (base.cast::<f32>(), params.cast::<f32>());
        let frames32: Vec<FrameFeatures<f32>> = frames.iter().map(|f| f.cast()).collect();
        let singles32: Vec<Tensor<f32>> = frames32
            .iter()
            .map(|f| single_frame_forward(&f.z, &base32).unwrap())
            .collect();
        let got32 = pre_pool_forward(&WindowBatch::new(frames32, 0).concat().unwrap(), &params32)
            .map_err(e2s)?;
        worst32 = worst32.max(got32.max_abs_diff(&mean(&singles32)).unwrap());
    }
    ensure(worst32 <= 1e-5 && worst64 <= 1e-12, || {
        format!("gaps f32 {worst32:.3e}, f64 {worst64:.3e}")
    })?;
    Ok(format!(
        "100 windows, max gap f32 {worst32:.2e}, f64 {worst64:.2e}"
    ))
}

/// Central differences written out directly, one coordinate at a time.
fn numeric_grad(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Tensor<f64> {
    let h = 1e-5;
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.dims().to_vec());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * h);
    }
    out
}

fn rel_err(a: &Tensor<f64>, n: &Tensor<f64>) -> f64 {
    let scale = a.max_abs().max(n.max_abs());
    if scale == 0.0 {
        0.0
    } else {
        a.max_abs_diff(n).unwrap() / scale
    }
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn primitive_grads(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = random_tensor::<f64>(&mut r, vec![3, 4]);
    let w = random_tensor::<f64>(&mut r, vec![4, 5]);
    let b = random_tensor::<f64>(&mut r, vec![5]);
    let g = random_tensor::<f64>(&mut r, vec![3, 5]);
    let lg = linear_backward(&x, &w, &g).unwrap();
    let mut worst = rel_err(
        &lg.input,
        &numeric_grad(&x, |t| dot(&linear(t, &w, &b).unwrap(), &g)),
    );
    worst = worst.max(rel_err(
        &lg.weight,
        &numeric_grad(&w, |t| dot(&linear(&x, t, &b).unwrap(), &g)),
    ));
    worst = worst.max(rel_err(
        &lg.bias,
        &numeric_grad(&b, |t| dot(&linear(&x, &w, t).unwrap(), &g)),
    ));

    let gx = x.scale(3.0);
    let gg = random_tensor::<f64>(&mut r, vec![3, 4]);
    worst = worst.max(rel_err(
        &gelu_backward(&gx, &gg).unwrap(),
        &numeric_grad(&gx, |t| dot(&gelu(t), &gg)),
    ));

    // distinct values spaced well apart, shuffled: no near-ties in any block
    let mut vals: Vec<f64> = (0..32).map(|i| f64::from(i) * 0.1).collect();
    for i in (1..vals.len()).rev() {
        vals.swap(i, rand::Rng::gen_range(&mut r, 0..=i));
    }
    let px = Tensor::new(vec![4, 4, 2], vals).unwrap();
    let pg = random_tensor::<f64>(&mut r, vec![2, 2, 2]);
    let analytic = max_pool_2x2_backward(&px, &pg).unwrap();
    worst.max(rel_err(
        &analytic,
        &numeric_grad(&px, |t| dot(&max_pool_2x2(t).unwrap(), &pg)),
    ))
}

fn model_grads(seed: u64, pooling: Pooling) -> f64 {
    let (model, feats, label) = tiny_instance(seed, pooling).unwrap();
    let (_, _, g) = loss_and_grads(&model, &feats, label).unwrap();
    let loss = |m: &ToyModel<f64>| loss_from_features(m, &feats, label).unwrap();
    let with = |f: &Setter, t: &Tensor<f64>| {
        let mut m = model.clone();
        f(&mut m, t);
        loss(&m)
    };
    let pairs: [(&Tensor<f64>, &Tensor<f64>, &Setter); 6] = [
        (&model.aligner.w_p, &g.aligner.w_p, &|m, t| {
            m.aligner.w_p = t.clone()
        }),
        (&model.aligner.b_p, &g.aligner.b_p, &|m, t| {
            m.aligner.b_p = t.clone()
        }),
        (&model.aligner.w_q, &g.aligner.w_q, &|m, t| {
            m.aligner.w_q = t.clone()
        }),
        (&model.aligner.b_q, &g.aligner.b_q, &|m, t| {
            m.aligner.b_q = t.clone()
        }),
        (&model.head_w, &g.head_w, &|m, t| m.head_w = t.clone()),
        (&model.head_b, &g.head_b, &|m, t| m.head_b = t.clone()),
    ];
    let mut worst = pairs
        .iter()
        .map(|(value, grad, set)| rel_err(grad, &numeric_grad(value, |t| with(set, t))))
        .fold(0.0, f64::max);

    let win = partition_windows(&feats[..2], 2).unwrap().remove(0);
    let trace = window_forward_traced(&win, &model.aligner).unwrap();
    let upstream = random_tensor::<f64>(&mut rng(seed ^ 0xBEEF), trace.tokens.dims().to_vec());
    let frame_grads = window_backward(&trace, &model.aligner, &upstream, true)
        .unwrap()
        .frames
        .unwrap();
    for (k, fg) in frame_grads.iter().enumerate() {
        let n = numeric_grad(&win.frames[k].z, |t| {
            let mut w = win.clone();
            w.frames[k].z = t.clone();
            dot(
                &window_forward(&w, &model.aligner).unwrap().tokens,
                &upstream,
            )
        });
        worst = worst.max(rel_err(fg, &n));
    }
    worst
}

fn gradient_oracle() -> Outcome {
    let mut worst = [0.0f64; 3];
    for seed in 0..100 {
        worst[0] = worst[0].max(primitive_grads(seed));
        worst[1] = worst[1].max(model_grads(seed, Pooling::Post));
        worst[2] = worst[2].max(model_grads(seed, Pooling::Pre));
    }
    ensure(worst.iter().all(|&e| e <= 1e-6), || {
        format!("relative errors {worst:?}")
    })?;
    Ok(format!(
        "100 seeds, worst relative error: primitives {:.2e}, post-pool model {:.2e}, pre-pool model {:.2e}",
        worst[0], worst[1], worst[2]
    ))
}

fn token_accounting() -> Outcome {
    let b = token_budget(1760, 16, 729).map_err(e2s)?;
    ensure(
        (b.windows, b.tokens_per_window, b.total_tokens) == (110, 169, 18590),
        || format!("{b:?}"),
    )?;
    let base = SingleFrameAlignerParams::<f32>::random(0, 2, 2);
    let params = init_from_single_frame(&base, 16, 1.0, 0).map_err(e2s)?;
    let seq = random_frames::<f32>(&mut rng(1), 1760, 729, 2);
    let out = video_forward(&seq, &params).map_err(e2s)?;
    let total: usize = out.iter().map(|t| t.tokens.dims()[0]).sum();
    ensure(out.len() == 110 && total == 18590, || {
        format!("forward gave {} windows, {total} tokens", out.len())
    })?;
    let ratio = 729.0 / tokens_per_window(729).map_err(e2s)? as f64;
    ensure(format!("{ratio:.2}") == "4.31", || format!("ratio {ratio}"))?;
    Ok(format!(
        "110 windows x 169 tokens = 18590, per-window reduction {ratio:.2}x"
    ))
}

fn every_kth<T: Clone>(seq: &[T], k: usize) -> Vec<T> {
    seq.iter().step_by(k).cloned().collect()
}

fn repeat_decoding() -> Outcome {
    let mut worst_k = 0.0f64;
    for seed in 0..20u64 {
        let base = SingleFrameAlignerParams::<f32>::random(seed, 24, 32);
        let noisy = init_from_single_frame(&base, 16, 1.0, seed + 1).map_err(e2s)?;
        let full = window_constant_frames::<f32>(&mut rng(seed), 3, 16, 16, 24);
        let reference = video_forward(&full, &noisy).map_err(e2s)?;
        let init = init_from_single_frame(&base, 16, 0.0, seed).map_err(e2s)?;
        for k in [1usize, 2, 4, 8, 16] {
            let cfg = DecodeConfig::new(16, (16 / k) as u32, DecodeMethod::Repeat).map_err(e2s)?;
            let out = decode_repeat(&every_kth(&full, k), &noisy, &cfg).map_err(e2s)?;
            ensure(
                out.len() == reference.len()
                    && out
                        .iter()
                        .zip(&reference)
                        .all(|(a, b)| a.tokens.bit_eq(&b.tokens)),
                || format!("seed {seed} k={k}: not bit-equal to full rate"),
            )?;

            let s = 16 / k;
            let frames = random_frames::<f32>(&mut rng(seed * 31 + k as u64), s, 16, 24);
            let got = decode_repeat(&frames, &init, &cfg).map_err(e2s)?;
            let singles: Vec<Tensor<f32>> = frames
                .iter()
                .map(|f| single_frame_forward(&f.z, &base).unwrap())
                .collect();
            worst_k = worst_k.max(
                got[0]
                    .tokens
                    .max_abs_diff(&pool_tokens(&mean(&singles)).unwrap())
                    .unwrap(),
            );
        }
    }
    ensure(worst_k <= 1e-5, || {
        format!("k-invariance gap {worst_k:.3e}")
    })?;
    Ok(format!(
        "bit-equal on window-constant video for k in 1..16, k-invariance gap {worst_k:.2e}"
    ))
}

fn trimming() -> Outcome {
    let (mut worst_form, mut worst_gap, mut min_gap) = (0.0f64, 0.0f64, f64::INFINITY);
    for seed in 0..10u64 {
        let base = SingleFrameAlignerParams::<f32>::random(seed, 24, 32);
        let params = init_from_single_frame(&base, 16, 0.0, seed).map_err(e2s)?;
        let bias = Tensor::from_fn(vec![16, 32], |i| base.b_b.data()[i % 32]);
        let z = random_tensor::<f32>(&mut rng(seed + 100), vec![16, 24]);
        let pooled_single = pool_tokens(&single_frame_forward(&z, &base).unwrap()).unwrap();
        for s in [1usize, 2, 4, 8, 16] {
            let trimmed = trim_aligner(&params, s).map_err(e2s)?;
            let frames = random_frames::<f32>(&mut rng(seed * 17 + s as u64), s, 16, 24);
            let singles: Vec<Tensor<f32>> = frames
                .iter()
                .map(|f| single_frame_forward(&f.z, &base).unwrap())
                .collect();
            let frac = s as f32 / 16.0;
            let mut want = mean(&singles).scale(frac);
            want.axpy(1.0 - frac, &bias).unwrap();
            let got = pre_pool_forward(
                &WindowBatch::new(frames, 0).concat().unwrap(),
                &trimmed.to_aligner(),
            )
            .map_err(e2s)?;
            worst_form = worst_form.max(got.max_abs_diff(&want).unwrap());

            let constant: Vec<_> = (0..s).map(|i| common::frame(z.clone(), i)).collect();
            let cfg = DecodeConfig::new(16, s as u32, DecodeMethod::Repeat).map_err(e2s)?;
            let rep = decode_repeat(&constant, &params, &cfg).map_err(e2s)?;
            let trim = decode_trimmed(&constant, &trimmed).map_err(e2s)?;
            let predicted = Tensor::from_fn(pooled_single.dims().to_vec(), |i| {
                (1.0 - frac) * (base.b_b.data()[i % 32] - pooled_single.data()[i])
            });
            let diff = trim[0].tokens.sub(&rep[0].tokens).unwrap();
            worst_gap = worst_gap.max(diff.max_abs_diff(&predicted).unwrap());
            if s < 16 {
                min_gap = min_gap.min(predicted.max_abs());
            }
        }
    }
    ensure(worst_form <= 1e-5 && worst_gap <= 1e-5, || {
        format!("closed form {worst_form:.3e}, gap {worst_gap:.3e}")
    })?;
    ensure(min_gap > 0.0, || "repeat and trim coincide".into())?;
    Ok(format!(
        "s in {{1,2,4,8,16}}: closed form within {worst_form:.2e}, repeat-vs-trim difference within {worst_gap:.2e} (magnitude >= {min_gap:.2})"
    ))
}

fn fps_separation() -> Outcome {
    let seed = 1;
    let dataset = make_motion_dataset(seed, 400, 200, &DEFAULT_SPEEDS, 4.0, 16).map_err(e2s)?;
    let mut acc = [0.0; 2];
    for (slot, fps) in [(0, 16), (1, 1)] {
        let mut model = ToyModel::<f32>::build(&ModelConfig {
            seed,
            ..ModelConfig::default()
        })
        .map_err(e2s)?;
        let cfg = TrainConfig {
            seed,
            fps,
            ..TrainConfig::default()
        };
        acc[slot] = train(&mut model, &dataset, &cfg)
            .map_err(e2s)?
            .test_accuracy;
    }
    let [hi, lo] = acc;
    let summary = format!(
        "seed {seed}: 16 FPS accuracy {hi:.3}, 1 FPS accuracy {lo:.3}, gap {:.3}",
        hi - lo
    );
    ensure(hi >= 0.90 && lo <= 0.65 && hi - lo >= 0.25, || {
        summary.clone()
    })?;
    Ok(summary)
}

fn cosine_analysis() -> Outcome {
    let seq = dominance_construction(7, 4, 24, 4).map_err(e2s)?;
    let report = cosine_report(&seq, 0).map_err(e2s)?;
    let mut max_before = 0.0f64;
    for row in &report.rows[1..] {
        let (before, after) = (row.before.unwrap_or(1.0), row.after.unwrap_or(0.0));
        ensure(after == 1.0 && before < 0.95 && after > before, || {
            format!("frame {}: {before} / {after}", row.frame_index)
        })?;
        max_before = max_before.max(before);
    }
    let z = random_tensor::<f64>(&mut rng(8), vec![16, 24]);
    let same: Vec<_> = (0..4).map(|i| common::frame(z.clone(), i)).collect();
    let identical = cosine_report(&same, 0).map_err(e2s)?;
    ensure(
        identical
            .rows
            .iter()
            .all(|r| r.before == Some(1.0) && r.after == Some(1.0)),
        || "identical frames below 1".into(),
    )?;
    Ok(format!(
        "dominance frames: after 1.0 exactly, before <= {max_before:.3}; identical frames 1.0/1.0"
    ))
}

fn cost() -> Outcome {
    let at = |fps: u32| CostConfig {
        test_fps: fps,
        ..CostConfig::seven_b()
    };
    let one = cost_model(&at(1)).map_err(e2s)?.encoder;
    for fps in [2u32, 4, 8, 16] {
        let e = cost_model(&at(fps)).map_err(e2s)?.encoder;
        ensure(e == one * f64::from(fps), || {
            format!("encoder at {fps} fps: {e} vs {}", one * f64::from(fps))
        })?;
    }
    let mut shares = String::new();
    for output_tokens in [1usize, 32] {
        let (enc, _, llm) = cost_model(&CostConfig {
            output_tokens,
            ..CostConfig::seven_b()
        })
        .map_err(e2s)?
        .shares();
        ensure(enc > llm, || {
            format!("{output_tokens} output tokens: encoder {enc:.3} <= llm {llm:.3}")
        })?;
        shares = format!(
            "encoder {:.1}% vs llm_proxy {:.1}%",
            enc * 100.0,
            llm * 100.0
        );
    }
    Ok(format!(
        "encoder MACs linear in fps; 16 FPS, 32 output tokens: {shares}"
    ))
}

fn pooling_placement() -> Outcome {
    let base = SingleFrameAlignerParams::<f64>::random(3, 3, 5);
    let post = init_from_single_frame(&base, 2, 1.0, 4).map_err(e2s)?;
    let pre = post.clone().with_pooling(Pooling::Pre);
    for p in [4usize, 16, 729] {
        let seq = random_frames::<f64>(&mut rng(p as u64), 3, p, 3);
        let a = video_forward(&seq, &post).map_err(e2s)?;
        let b = video_forward(&seq, &pre).map_err(e2s)?;
        ensure(
            a.len() == b.len()
                && a.iter()
                    .zip(&b)
                    .all(|(x, y)| x.tokens.dims() == y.tokens.dims()),
            || format!("token shapes differ at p={p}"),
        )?;
    }
    let mut worst = [0.0f64; 2];
    for seed in 0..100 {
        worst[0] = worst[0].max(model_grads(seed, Pooling::Post));
        worst[1] = worst[1].max(model_grads(seed, Pooling::Pre));
    }
    ensure(worst.iter().all(|&e| e <= 1e-6), || {
        format!("relative errors {worst:?}")
    })?;
    Ok(format!(
        "equal token counts for p in {{4,16,729}}; gradients post {:.2e}, pre {:.2e}",
        worst[0], worst[1]
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 averaging at init", averaging, 10),
        ("2 gradient oracle", gradient_oracle, 60),
        ("3 token accounting", token_accounting, 5),
        ("4 repeat decoding", repeat_decoding, 10),
        ("5 trimming closed form", trimming, 10),
        ("6 fps separation", fps_separation, 600),
        ("7 cosine analysis", cosine_analysis, 5),
        ("8 cost model", cost, 5),
        ("9 pooling placement", pooling_placement, 60),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        failed += usize::from(status == "FAIL");
        println!(
            "{status} [{name}] {detail} ({:.2} s)",
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
