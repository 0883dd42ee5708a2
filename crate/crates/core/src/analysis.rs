//! Diagnostics: frame-to-frame cosine similarity before and after 2x2
//! pooling, token budgets, and an analytical multiply-accumulate cost model.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aligner::{pool_tokens, tokens_per_window};
use crate::decoding::DecodeMethod;
use crate::error::{Error, Result};
use crate::features::FrameFeatures;
use crate::numerics::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct CosineRow {
    pub frame_index: usize,
    /// Mean per-patch cosine similarity to the reference on raw features;
    /// `None` when every position had a zero-norm vector.
    pub before: Option<f64>,
    /// Same on the 2x2 max-pooled features.
    pub after: Option<f64>,
}

/// A position excluded from an average because one side had zero norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkippedPosition {
    pub frame_index: usize,
    pub pooled: bool,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineReport {
    pub reference_index: usize,
    pub rows: Vec<CosineRow>,
    pub skipped: Vec<SkippedPosition>,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Averages row-wise cosine similarity; returns the mean and skipped rows.
fn mean_row_cosine<T: Scalar>(
    x: &Tensor<T>,
    reference: &Tensor<T>,
) -> Result<(Option<f64>, Vec<usize>)> {
    let (rows, cols) = x.matrix_dims()?;
    if reference.dims() != x.dims() {
        return Err(Error::shape(format!(
            "frame dims {:?} differ from reference dims {:?}",
            x.dims(),
            reference.dims()
        )));
    }
    let (mut sum, mut count, mut skipped) = (0.0, 0usize, Vec::new());
    for r in 0..rows {
        let a: Vec<f64> = x.data()[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| v.as_f64())
            .collect();
        let b: Vec<f64> = reference.data()[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| v.as_f64())
            .collect();
        match cosine(&a, &b) {
            Some(c) => {
                sum += c;
                count += 1;
            }
            None => skipped.push(r),
        }
    }
    Ok(((count > 0).then(|| sum / count as f64), skipped))
}

/// Per-frame similarity to `seq[reference]`, before and after spatial pooling.
pub fn cosine_report<T: Scalar>(
    seq: &[FrameFeatures<T>],
    reference: usize,
) -> Result<CosineReport> {
    let ref_frame = seq.get(reference).ok_or_else(|| {
        Error::config(format!(
            "reference {reference} outside a sequence of {} frames",
            seq.len()
        ))
    })?;
    let ref_pooled = pool_tokens(&ref_frame.z)?;
    let mut rows = Vec::with_capacity(seq.len());
    let mut skipped = Vec::new();
    for f in seq {
        let (before, skip_b) = mean_row_cosine(&f.z, &ref_frame.z)?;
        let (after, skip_a) = mean_row_cosine(&pool_tokens(&f.z)?, &ref_pooled)?;
        for (pooled, list) in [(false, skip_b), (true, skip_a)] {
            skipped.extend(list.into_iter().map(|position| SkippedPosition {
                frame_index: f.frame_index,
                pooled,
                position,
            }));
        }
        rows.push(CosineRow {
            frame_index: f.frame_index,
            before,
            after,
        });
    }
    Ok(CosineReport {
        reference_index: reference,
        rows,
        skipped,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

impl CosineReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "reference frame {}", self.reference_index);
        let _ = writeln!(
            out,
            "{:>8}  {:>10}  {:>10}",
            "frame", "cos_before", "cos_after"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>8}  {:>10}  {:>10}",
                r.frame_index,
                fmt_opt(r.before),
                fmt_opt(r.after)
            );
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "skipped {} zero-norm positions", self.skipped.len());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,cos_before,cos_after\n");
        for r in &self.rows {
            let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
            let _ = writeln!(
                out,
                "{},{},{}",
                r.frame_index,
                cell(r.before),
                cell(r.after)
            );
        }
        out
    }
}

/// Frames whose per-block, per-channel maxima match the reference exactly
/// while every other entry is redrawn below the block maximum. Max pooling
/// maps all of them to the same tokens; the raw features drift.
pub fn dominance_construction(
    seed: u64,
    grid: usize,
    d: usize,
    frames: usize,
) -> Result<Vec<FrameFeatures<f64>>> {
    if grid < 2 || !grid.is_multiple_of(2) || d == 0 || frames == 0 {
        return Err(Error::config(
            "dominance construction needs an even grid ≥ 2, d ≥ 1, frames ≥ 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = grid * grid;
    let reference: Vec<f64> = (0..p * d).map(|_| rng.gen_range(0.0..1.0)).collect();
    let cell = |r: usize, c: usize, ch: usize| (r * grid + c) * d + ch;
    let mut is_max = vec![false; p * d];
    let mut block_max = vec![0.0; p * d];
    for br in 0..grid / 2 {
        for bc in 0..grid / 2 {
            for ch in 0..d {
                let cells = [
                    cell(2 * br, 2 * bc, ch),
                    cell(2 * br, 2 * bc + 1, ch),
                    cell(2 * br + 1, 2 * bc, ch),
                    cell(2 * br + 1, 2 * bc + 1, ch),
                ];
                let best = cells.iter().copied().fold(cells[0], |b, i| {
                    if reference[i] > reference[b] {
                        i
                    } else {
                        b
                    }
                });
                is_max[best] = true;
                for &i in &cells {
                    block_max[i] = reference[best];
                }
            }
        }
    }
    (0..frames)
        .map(|k| {
            let data: Vec<f64> = if k == 0 {
                reference.clone()
            } else {
                (0..p * d)
                    .map(|i| {
                        if is_max[i] {
                            reference[i]
                        } else {
                            rng.gen_range(0.0..block_max[i] * 0.999)
                        }
                    })
                    .collect()
            };
            Ok(FrameFeatures {
                z: Tensor::new(vec![p, d], data)?,
                frame_index: k,
                timestamp_s: k as f32,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenBudget {
    pub windows: usize,
    pub tokens_per_window: usize,
    pub total_tokens: usize,
}

/// `⌈n/w⌉` windows of `⌊√p/2⌋²` tokens.
pub fn token_budget(n_frames: usize, w: usize, p: usize) -> Result<TokenBudget> {
    if n_frames == 0 || w == 0 {
        return Err(Error::config(
            "frame count and window width must be positive",
        ));
    }
    let windows = n_frames.div_ceil(w);
    let tokens_per_window = tokens_per_window(p)?;
    Ok(TokenBudget {
        windows,
        tokens_per_window,
        total_tokens: windows * tokens_per_window,
    })
}

/// MACs per frame of a SigLIP-So400m/14 tower at 384 px: 729 tokens, width
/// 1152, MLP 4304, 27 layers (projections, MLP and attention).
pub const SIGLIP_MACS_PER_FRAME: f64 = 3.33e11;

/// Attention-plus-MLP shape proxy for the language model:
/// `alpha·T²·width + beta·T·width²` for `T` tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlmProxy {
    pub width: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LlmProxy {
    /// Qwen2-7B shape: width 3584, 28 layers; `alpha = 2·28` (scores and
    /// weighted sum), `beta ≈ 18.1·28` (q/o, GQA k/v, gated MLP of 18944).
    pub const SEVEN_B: Self = Self {
        width: 3584.0,
        alpha: 56.0,
        beta: 508.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostConfig {
    pub test_fps: u32,
    pub train_fps: u32,
    pub duration_s: f64,
    pub w: usize,
    pub p: usize,
    pub d: usize,
    pub h: usize,
    pub patch_dim: usize,
    /// Overrides the stub's `p·patch_dim·d` encoder cost per frame.
    pub encoder_macs_per_frame: Option<f64>,
    pub method: DecodeMethod,
    pub output_tokens: usize,
    pub llm: LlmProxy,
}

impl CostConfig {
    /// Desk-scale dims with the stub encoder.
    pub fn desk() -> Self {
        Self {
            test_fps: 16,
            train_fps: 16,
            duration_s: 60.0,
            w: 16,
            p: 16,
            d: 24,
            h: 32,
            patch_dim: 64,
            encoder_macs_per_frame: None,
            method: DecodeMethod::Repeat,
            output_tokens: 32,
            llm: LlmProxy {
                width: 32.0,
                alpha: 2.0,
                beta: 12.0,
            },
        }
    }

    /// SigLIP encoder, 16-frame windows, 7B language model proxy.
    pub fn seven_b() -> Self {
        Self {
            test_fps: 16,
            train_fps: 16,
            duration_s: 110.0,
            w: 16,
            p: 729,
            d: 1152,
            h: 3584,
            patch_dim: 14 * 14 * 3,
            encoder_macs_per_frame: Some(SIGLIP_MACS_PER_FRAME),
            method: DecodeMethod::Repeat,
            output_tokens: 32,
            llm: LlmProxy::SEVEN_B,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub frames: u64,
    pub windows: u64,
    pub visual_tokens: u64,
    pub output_tokens: u64,
    pub encoder: f64,
    pub aligner: f64,
    pub llm_proxy: f64,
    pub config: CostConfig,
}

impl CostReport {
    pub fn total(&self) -> f64 {
        self.encoder + self.aligner + self.llm_proxy
    }

    /// `(encoder, aligner, llm_proxy)` fractions of the total.
    pub fn shares(&self) -> (f64, f64, f64) {
        let t = self.total();
        if t == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        (self.encoder / t, self.aligner / t, self.llm_proxy / t)
    }

    pub fn to_table(&self) -> String {
        let (e, a, l) = self.shares();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "fps {} ({}), duration {} s: {} frames, {} windows, {} visual + {} output tokens",
            self.config.test_fps,
            self.config.method,
            self.config.duration_s,
            self.frames,
            self.windows,
            self.visual_tokens,
            self.output_tokens
        );
        let _ = writeln!(out, "{:<10}  {:>14}  {:>7}", "component", "MACs", "share");
        for (name, v, s) in [
            ("encoder", self.encoder, e),
            ("aligner", self.aligner, a),
            ("llm_proxy", self.llm_proxy, l),
        ] {
            let _ = writeln!(out, "{name:<10}  {v:>14.4e}  {:>6.2}%", s * 100.0);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let (e, a, l) = self.shares();
        format!(
            "component,macs,share\nencoder,{},{e}\naligner,{},{a}\nllm_proxy,{},{l}\n",
            self.encoder, self.aligner, self.llm_proxy
        )
    }
}

/// Analytical multiply-accumulate counts per component for one video.
pub fn cost_model(cfg: &CostConfig) -> Result<CostReport> {
    let positive = cfg.test_fps > 0
        && cfg.train_fps > 0
        && cfg.duration_s > 0.0
        && cfg.w > 0
        && cfg.d > 0
        && cfg.h > 0
        && cfg.patch_dim > 0;
    if !positive {
        return Err(Error::config("cost model dimensions must be positive"));
    }
    let decode = crate::decoding::DecodeConfig::new(cfg.train_fps, cfg.test_fps, cfg.method)?;
    let s = decode.frames_per_window(cfg.w)?;
    let m = tokens_per_window(cfg.p)? as u64;
    let frames = (cfg.duration_s * f64::from(cfg.test_fps)).round().max(1.0) as u64;
    let windows = frames.div_ceil(s as u64);
    let per_frame = cfg
        .encoder_macs_per_frame
        .unwrap_or((cfg.p * cfg.patch_dim * cfg.d) as f64);
    let width = match cfg.method {
        DecodeMethod::Repeat => cfg.w,
        DecodeMethod::Trim => s,
    } as f64;
    let (p, d, h) = (cfg.p as f64, cfg.d as f64, cfg.h as f64);
    let per_window = p * (width * d) * (width * h) + p * (width * h) * h;
    let visual_tokens = windows * m;
    let t = (visual_tokens + cfg.output_tokens as u64) as f64;
    let llm =
        cfg.llm.alpha * t * t * cfg.llm.width + cfg.llm.beta * t * cfg.llm.width * cfg.llm.width;
    Ok(CostReport {
        frames,
        windows,
        visual_tokens,
        output_tokens: cfg.output_tokens as u64,
        encoder: frames as f64 * per_frame,
        aligner: windows as f64 * per_window,
        llm_proxy: llm,
        config: cfg.clone(),
    })
}
