//! Desk-scale pipeline: frozen encoder stub, trainable aligner, linear
//! classifier head, trained to tell clockwise from counter-clockwise
//! rotation at 1 FPS versus 16 FPS input.

use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aligner::{
    init_from_single_frame, tokens_per_window, window_backward, window_forward_traced,
    AlignerGrads, HfrAlignerParams, Pooling, SingleFrameAlignerParams,
};
use crate::error::{Error, Result};
use crate::features::{
    encode_video, generate_rotating_dot, partition_windows, Direction, EncoderStub, FrameFeatures,
    RawVideo, DEFAULT_ENCODER_SEED, DEFAULT_FRAME_CAP,
};
use crate::numerics::io::NamedArchive;
use crate::numerics::{linear, linear_backward, Scalar, Tensor};

pub const CLASSES: usize = 2;
pub const DEFAULT_SIDE: usize = 32;
pub const DEFAULT_SPEEDS: [f64; 2] = [0.25, 0.75];

/// Dimensions and seeds for building a fresh [`ToyModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub side: usize,
    pub patch_grid: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub classes: usize,
    pub noise_scale: f64,
    pub pooling: Pooling,
    pub encoder_seed: u64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            side: DEFAULT_SIDE,
            patch_grid: 4,
            d: 24,
            h: 16,
            w: 16,
            classes: CLASSES,
            noise_scale: 1.0,
            pooling: Pooling::Post,
            encoder_seed: DEFAULT_ENCODER_SEED,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel<T = f32> {
    pub encoder: EncoderStub<T>,
    pub aligner: HfrAlignerParams<T>,
    /// `(m·h) × C`
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

impl<T: Scalar> ToyModel<T> {
    /// Random base aligner, block-matrix init, zero head.
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        let encoder = EncoderStub::new(cfg.encoder_seed, cfg.side, cfg.patch_grid, cfg.d)?;
        let base = SingleFrameAlignerParams::random(cfg.seed, cfg.d, cfg.h);
        let aligner =
            init_from_single_frame(&base, cfg.w, cfg.noise_scale, cfg.seed.wrapping_add(1))?
                .with_pooling(cfg.pooling);
        Self::with_parts(encoder, aligner, cfg.classes)
    }

    pub fn with_parts(
        encoder: EncoderStub<T>,
        aligner: HfrAlignerParams<T>,
        classes: usize,
    ) -> Result<Self> {
        let (_, h) = aligner.validate()?;
        if classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        let m = tokens_per_window(encoder.patches())?;
        Ok(Self {
            encoder,
            aligner,
            head_w: Tensor::zeros(vec![m * h, classes]),
            head_b: Tensor::zeros(vec![classes]),
        })
    }

    pub fn classes(&self) -> usize {
        self.head_b.len()
    }

    pub fn cast<U: Scalar>(&self) -> ToyModel<U> {
        ToyModel {
            encoder: EncoderStub::from_projection(
                self.encoder.patch_grid(),
                self.encoder.projection().cast(),
            )
            .expect("projection already validated"),
            aligner: self.aligner.cast(),
            head_w: self.head_w.cast(),
            head_b: self.head_b.cast(),
        }
    }

    fn sgd_step(&mut self, grads: &ModelGrads<T>, lr: T) -> Result<()> {
        self.aligner.w_p.axpy(-lr, &grads.aligner.w_p)?;
        self.aligner.b_p.axpy(-lr, &grads.aligner.b_p)?;
        self.aligner.w_q.axpy(-lr, &grads.aligner.w_q)?;
        self.aligner.b_q.axpy(-lr, &grads.aligner.b_q)?;
        self.head_w.axpy(-lr, &grads.head_w)?;
        self.head_b.axpy(-lr, &grads.head_b)
    }
}

impl ToyModel<f32> {
    pub fn to_archive(&self) -> Result<NamedArchive> {
        let mut archive =
            crate::aligner::aligner_to_archive(&self.aligner, self.encoder.patches())?;
        archive.insert("head/W", self.head_w.clone());
        archive.insert("head/b", self.head_b.clone());
        archive.insert("encoder/proj", self.encoder.projection().clone());
        archive.insert(
            "encoder/meta",
            Tensor::new(vec![1], vec![self.encoder.patch_grid() as f32])?,
        );
        Ok(archive)
    }

    pub fn from_archive(archive: &NamedArchive) -> Result<Self> {
        let (aligner, _) = crate::aligner::aligner_from_archive(archive)?;
        let grid = archive.require("encoder/meta")?.data()[0] as usize;
        let encoder = EncoderStub::from_projection(grid, archive.require("encoder/proj")?.clone())?;
        let mut model = Self::with_parts(encoder, aligner, archive.require("head/b")?.len())?;
        let head_w = archive.require("head/W")?;
        if head_w.dims() != model.head_w.dims() {
            return Err(Error::format(format!(
                "head/W dims {:?}, expected {:?}",
                head_w.dims(),
                model.head_w.dims()
            )));
        }
        model.head_w = head_w.clone();
        model.head_b = archive.require("head/b")?.clone();
        Ok(model)
    }
}

/// Gradients for every trainable tensor of a [`ToyModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T = f32> {
    pub aligner: AlignerGrads<T>,
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

impl<T: Scalar> ModelGrads<T> {
    fn zeros_like(model: &ToyModel<T>) -> Self {
        Self {
            aligner: AlignerGrads::zeros_like(&model.aligner),
            head_w: Tensor::zeros(model.head_w.dims().to_vec()),
            head_b: Tensor::zeros(model.head_b.dims().to_vec()),
        }
    }

    fn accumulate(&mut self, other: &Self) -> Result<()> {
        self.aligner.accumulate(&other.aligner)?;
        self.head_w.axpy(T::one(), &other.head_w)?;
        self.head_b.axpy(T::one(), &other.head_b)
    }
}

/// Head logits for an encoded frame sequence: tokens are averaged over
/// windows, flattened row-major and fed to the affine head.
pub fn logits_from_features<T: Scalar>(
    model: &ToyModel<T>,
    feats: &[FrameFeatures<T>],
) -> Result<Tensor<T>> {
    Ok(forward_features(model, feats)?.2)
}

/// Window traces, flattened mean tokens, logits.
type Forward<T> = (Vec<crate::aligner::WindowTrace<T>>, Tensor<T>, Tensor<T>);

fn forward_features<T: Scalar>(
    model: &ToyModel<T>,
    feats: &[FrameFeatures<T>],
) -> Result<Forward<T>> {
    let windows = partition_windows(feats, model.aligner.window)?;
    let traces = windows
        .iter()
        .map(|w| window_forward_traced(w, &model.aligner))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = Tensor::zeros(traces[0].tokens.dims().to_vec());
    for t in &traces {
        pooled.axpy(T::one(), &t.tokens)?;
    }
    let pooled = pooled.scale(T::from_f64(1.0 / traces.len() as f64));
    let flat = pooled.reshape(vec![1, model.head_w.dims()[0]])?;
    let logits = linear(&flat, &model.head_w, &model.head_b)?;
    Ok((traces, flat, logits.reshape(vec![model.classes()])?))
}

fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, label: usize) -> (f64, Vec<f64>) {
    let z: Vec<f64> = logits.data().iter().map(|v| v.as_f64()).collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
    let log_norm = max + sum.ln();
    let probs = z.iter().map(|v| (v - log_norm).exp()).collect();
    (log_norm - z[label], probs)
}

/// Loss, logits and gradients of every trainable tensor for one encoded item.
pub fn loss_and_grads<T: Scalar>(
    model: &ToyModel<T>,
    feats: &[FrameFeatures<T>],
    label: usize,
) -> Result<(f64, Tensor<T>, ModelGrads<T>)> {
    if label >= model.classes() {
        return Err(Error::config(format!(
            "label {label} outside {} classes",
            model.classes()
        )));
    }
    let (traces, flat, logits) = forward_features(model, feats)?;
    let (loss, probs) = softmax_cross_entropy(&logits, label);
    let c = model.classes();
    let grad_logits = Tensor::from_fn(vec![1, c], |j| {
        T::from_f64(probs[j] - if j == label { 1.0 } else { 0.0 })
    });
    let head = linear_backward(&flat, &model.head_w, &grad_logits)?;
    let per_window = head
        .input
        .scale(T::from_f64(1.0 / traces.len() as f64))
        .reshape(traces[0].tokens.dims().to_vec())?;
    let mut aligner = AlignerGrads::zeros_like(&model.aligner);
    for t in &traces {
        let g = window_backward(t, &model.aligner, &per_window, false)?;
        aligner.accumulate(&g.params)?;
    }
    Ok((
        loss,
        logits,
        ModelGrads {
            aligner,
            head_w: head.weight,
            head_b: head.bias,
        },
    ))
}

/// Loss value only; the scalar function the gradient oracle differentiates.
pub fn loss_from_features<T: Scalar>(
    model: &ToyModel<T>,
    feats: &[FrameFeatures<T>],
    label: usize,
) -> Result<f64> {
    let logits = logits_from_features(model, feats)?;
    Ok(softmax_cross_entropy(&logits, label).0)
}

fn check_fps(fps: u32) -> Result<()> {
    if fps == 1 || fps == 16 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "sampling fps must be 1 or 16, got {fps}"
        )))
    }
}

pub fn encode_item<T: Scalar>(
    model: &ToyModel<T>,
    video: &RawVideo,
    fps: u32,
) -> Result<Vec<FrameFeatures<T>>> {
    check_fps(fps)?;
    encode_video(video, &model.encoder, fps, DEFAULT_FRAME_CAP)
}

/// Samples `video` at `fps`, encodes it and scores it against `label`.
pub fn forward_loss<T: Scalar>(
    model: &ToyModel<T>,
    video: &RawVideo,
    label: usize,
    fps: u32,
) -> Result<(f64, Tensor<T>)> {
    let feats = encode_item(model, video, fps)?;
    let logits = logits_from_features(model, &feats)?;
    if label >= model.classes() {
        return Err(Error::config(format!(
            "label {label} outside {} classes",
            model.classes()
        )));
    }
    Ok((softmax_cross_entropy(&logits, label).0, logits))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionItem {
    pub video: RawVideo,
    pub label: usize,
    pub speed: f64,
    pub direction: Direction,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDataset {
    pub train: Vec<MotionItem>,
    pub test: Vec<MotionItem>,
    pub speeds: Vec<f64>,
}

/// Whether `rps` reverses apparent direction when sampled at `fps`.
pub fn aliases(rps: f64, fps: f64) -> bool {
    let frac = (rps / fps).rem_euclid(1.0);
    frac > 0.5 && frac < 1.0
}

/// Balanced CW/CCW rotating-dot videos; item `i` of a split uses speed
/// `speeds[(i / 2) % len]` and alternates direction. Train and test item
/// seeds are drawn from one stream and never coincide.
pub fn make_motion_dataset(
    seed: u64,
    n_train: usize,
    n_test: usize,
    speeds: &[f64],
    duration_s: f64,
    native_fps: u32,
) -> Result<MotionDataset> {
    if speeds.is_empty() {
        return Err(Error::config("need at least one speed"));
    }
    for &r in speeds {
        if !(r > 0.0 && r < 8.0) {
            return Err(Error::config(format!(
                "speed {r} rev/s aliases at 16 fps or is not positive; need 0 < r < 8"
            )));
        }
    }
    if !speeds.iter().any(|&r| aliases(r, 1.0)) {
        return Err(Error::config(format!(
            "no speed in {speeds:?} aliases at 1 fps (need one with r mod 1 > 1/2)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = std::collections::HashSet::new();
    let mut split = |n: usize| -> Result<Vec<MotionItem>> {
        (0..n)
            .map(|i| {
                let item_seed = loop {
                    let s: u64 = rng.gen();
                    if used.insert(s) {
                        break s;
                    }
                };
                let speed = speeds[(i / 2) % speeds.len()];
                let direction = if i % 2 == 0 {
                    Direction::Ccw
                } else {
                    Direction::Cw
                };
                let video = generate_rotating_dot(
                    item_seed,
                    speed,
                    direction,
                    duration_s,
                    native_fps,
                    DEFAULT_SIDE,
                )?;
                Ok(MotionItem {
                    video,
                    label: direction.label(),
                    speed,
                    direction,
                    seed: item_seed,
                })
            })
            .collect()
    };
    let train = split(n_train)?;
    let test = split(n_test)?;
    Ok(MotionDataset {
        train,
        test,
        speeds: speeds.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub fps: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 30,
            batch: 8,
            seed: 1,
            fps: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub test_accuracy: f64,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (k, loss) in self.epoch_losses.iter().enumerate() {
            writeln!(out, "epoch {} loss {:.6}", k + 1, loss)?;
        }
        writeln!(out, "test_accuracy {:.4}", self.test_accuracy)?;
        f.write_str(&out)
    }
}

/// Plain SGD on the mean per-batch loss. Per-item gradients run in
/// parallel and are reduced in item order; the encoder is never touched.
pub fn train<T: Scalar>(
    model: &mut ToyModel<T>,
    dataset: &MotionDataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    check_fps(cfg.fps)?;
    if dataset.train.is_empty() && cfg.epochs > 0 {
        return Err(Error::config("training split is empty"));
    }
    if cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 || cfg.batch == 0 {
        return Err(Error::config(
            "learning rate and batch size must be positive",
        ));
    }
    let encoded = dataset
        .train
        .par_iter()
        .map(|item| encode_item(model, &item.video, cfg.fps))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch) {
            let results = batch
                .par_iter()
                .map(|&i| loss_and_grads(model, &encoded[i], dataset.train[i].label))
                .collect::<Result<Vec<_>>>()?;
            let mut acc = ModelGrads::zeros_like(model);
            for (loss, _, g) in &results {
                if !loss.is_finite() {
                    return Err(Error::Training { step, loss: *loss });
                }
                total += loss;
                acc.accumulate(g)?;
            }
            model.sgd_step(&acc, T::from_f64(cfg.learning_rate / batch.len() as f64))?;
            step += 1;
        }
        epoch_losses.push(total / encoded.len() as f64);
    }
    let test_accuracy = if dataset.test.is_empty() {
        0.0
    } else {
        evaluate(model, &dataset.test, cfg.fps)?
    };
    Ok(TrainReport {
        epoch_losses,
        test_accuracy,
    })
}

/// Anything that scores a video into class logits.
pub trait Classifier: Sync {
    fn logits(&self, video: &RawVideo, fps: u32) -> Result<Vec<f64>>;
}

impl<T: Scalar> Classifier for ToyModel<T> {
    fn logits(&self, video: &RawVideo, fps: u32) -> Result<Vec<f64>> {
        let feats = encode_item(self, video, fps)?;
        Ok(logits_from_features(self, &feats)?
            .data()
            .iter()
            .map(|v| v.as_f64())
            .collect())
    }
}

/// Index of the largest logit; ties go to the lower index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Fraction of items whose argmax logit equals the label.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, items: &[MotionItem], fps: u32) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::config("evaluation split is empty"));
    }
    let hits = items
        .par_iter()
        .map(|item| {
            Ok(usize::from(
                argmax(&model.logits(&item.video, fps)?) == item.label,
            ))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / items.len() as f64)
}
