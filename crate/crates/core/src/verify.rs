//! Self-checks exposed by the command line: the block-init averaging
//! identity and backward passes against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aligner::{
    init_from_single_frame, pre_pool_forward, single_frame_forward, window_backward,
    window_forward, window_forward_traced, HfrAlignerParams, Pooling, SingleFrameAlignerParams,
};
use crate::error::Result;
use crate::features::{exact_sqrt, partition_windows, FrameFeatures, WindowBatch};
use crate::numerics::{
    finite_difference_gradient, gelu, gelu_backward, linear, linear_backward, max_pool_2x2,
    max_pool_2x2_backward, relative_error, Scalar, Tensor,
};
use crate::trainer::{loss_and_grads, loss_from_features, ModelConfig, ToyModel};

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-6;
pub const AVG_TOLERANCE_F32: f64 = 1e-5;
pub const AVG_TOLERANCE_F64: f64 = 1e-12;
/// Pool blocks closer than this to a tie are redrawn before a gradient check.
const TIE_GAP: f64 = 1e-3;

fn random_tensor<T: Scalar>(rng: &mut ChaCha8Rng, dims: Vec<usize>, lo: f64, hi: f64) -> Tensor<T> {
    Tensor::from_fn(dims, |_| T::from_f64(rng.gen_range(lo..hi)))
}

fn random_frames<T: Scalar>(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: usize,
    d: usize,
) -> Vec<FrameFeatures<T>> {
    (0..n)
        .map(|i| FrameFeatures {
            z: random_tensor(rng, vec![p, d], -1.0, 1.0),
            frame_index: i,
            timestamp_s: i as f32,
        })
        .collect()
}

/// `max |H̃ − mean_k single_frame(z_k)|` for one window.
pub fn averaging_gap<T: Scalar>(
    win: &WindowBatch<T>,
    base: &SingleFrameAlignerParams<T>,
    params: &HfrAlignerParams<T>,
) -> Result<f64> {
    let h_tilde = pre_pool_forward(&win.concat()?, params)?;
    let mut mean = Tensor::zeros(h_tilde.dims().to_vec());
    for f in &win.frames {
        mean.axpy(T::one(), &single_frame_forward(&f.z, base)?)?;
    }
    let mean = mean.scale(T::from_f64(1.0 / win.frames.len() as f64));
    h_tilde.max_abs_diff(&mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingReport {
    pub seeds: usize,
    pub max_gap_f32: f64,
    pub max_gap_f64: f64,
}

impl AveragingReport {
    pub fn passed(&self) -> bool {
        self.max_gap_f32 <= AVG_TOLERANCE_F32 && self.max_gap_f64 <= AVG_TOLERANCE_F64
    }
}

/// Checks the averaging identity on `seeds` random windows of `p` patches
/// in 32-bit and 64-bit arithmetic.
pub fn check_averaging(
    base: &SingleFrameAlignerParams<f32>,
    params: &HfrAlignerParams<f32>,
    p: usize,
    seeds: usize,
) -> Result<AveragingReport> {
    let (d, _) = params.validate()?;
    let (base64, params64) = (base.cast::<f64>(), params.cast::<f64>());
    let mut report = AveragingReport {
        seeds,
        max_gap_f32: 0.0,
        max_gap_f64: 0.0,
    };
    for seed in 0..seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames: Vec<FrameFeatures<f64>> = random_frames(&mut rng, params.window, p, d);
        let win64 = WindowBatch::new(frames, 0);
        let win32 = WindowBatch::new(win64.frames.iter().map(|f| f.cast()).collect(), 0);
        report.max_gap_f32 = report.max_gap_f32.max(averaging_gap(&win32, base, params)?);
        report.max_gap_f64 = report
            .max_gap_f64
            .max(averaging_gap(&win64, &base64, &params64)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub worst: f64,
    pub seeds: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.worst <= GRAD_TOLERANCE
    }
}

fn weighted_sum(t: &Tensor<f64>, weights: &Tensor<f64>) -> f64 {
    t.data()
        .iter()
        .zip(weights.data())
        .map(|(a, b)| a * b)
        .sum()
}

/// Smallest gap between a 2x2 block maximum and its runner-up.
fn min_pool_gap(grid: &Tensor<f64>) -> f64 {
    let (g, h) = (grid.dims()[0], grid.dims()[2]);
    let d = grid.data();
    let mut gap = f64::INFINITY;
    for bi in 0..g / 2 {
        for bj in 0..g / 2 {
            for c in 0..h {
                let mut v = [
                    d[((2 * bi) * g + 2 * bj) * h + c],
                    d[((2 * bi) * g + 2 * bj + 1) * h + c],
                    d[((2 * bi + 1) * g + 2 * bj) * h + c],
                    d[((2 * bi + 1) * g + 2 * bj + 1) * h + c],
                ];
                v.sort_by(|a, b| b.total_cmp(a));
                gap = gap.min(v[0] - v[1]);
            }
        }
    }
    gap
}

fn as_grid(t: &Tensor<f64>) -> Tensor<f64> {
    let (p, c) = (t.dims()[0], t.dims()[1]);
    let g = exact_sqrt(p).expect("square patch count");
    t.clone().reshape(vec![g, g, c]).expect("same length")
}

pub fn check_linear(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, a, b) = (
        rng.gen_range(1..5),
        rng.gen_range(1..6),
        rng.gen_range(1..6),
    );
    let x: Tensor<f64> = random_tensor(&mut rng, vec![n, a], -2.0, 2.0);
    let w: Tensor<f64> = random_tensor(&mut rng, vec![a, b], -2.0, 2.0);
    let bias: Tensor<f64> = random_tensor(&mut rng, vec![b], -2.0, 2.0);
    let r: Tensor<f64> = random_tensor(&mut rng, vec![n, b], -1.0, 1.0);
    let grads = linear_backward(&x, &w, &r)?;
    let f = |x: &Tensor<f64>, w: &Tensor<f64>, bias: &Tensor<f64>| {
        weighted_sum(&linear(x, w, bias).unwrap(), &r)
    };
    let nx = finite_difference_gradient(|t| f(t, &w, &bias), &x, FD_STEP)?;
    let nw = finite_difference_gradient(|t| f(&x, t, &bias), &w, FD_STEP)?;
    let nb = finite_difference_gradient(|t| f(&x, &w, t), &bias, FD_STEP)?;
    Ok(relative_error(&grads.input, &nx)?
        .max(relative_error(&grads.weight, &nw)?)
        .max(relative_error(&grads.bias, &nb)?))
}

pub fn check_gelu(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..8);
    let x: Tensor<f64> = random_tensor(&mut rng, vec![n, 3], -4.0, 4.0);
    let r: Tensor<f64> = random_tensor(&mut rng, x.dims().to_vec(), -1.0, 1.0);
    let analytic = gelu_backward(&x, &r)?;
    let numeric = finite_difference_gradient(|t| weighted_sum(&gelu(t), &r), &x, FD_STEP)?;
    relative_error(&analytic, &numeric)
}

pub fn check_max_pool(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = rng.gen_range(2..6);
    let h = rng.gen_range(1..4);
    let x: Tensor<f64> = loop {
        let x = random_tensor(&mut rng, vec![g, g, h], -1.0, 1.0);
        if min_pool_gap(&x) >= TIE_GAP {
            break x;
        }
    };
    let r: Tensor<f64> = random_tensor(&mut rng, vec![g / 2, g / 2, h], -1.0, 1.0);
    let analytic = max_pool_2x2_backward(&x, &r)?;
    let numeric =
        finite_difference_gradient(|t| weighted_sum(&max_pool_2x2(t).unwrap(), &r), &x, FD_STEP)?;
    relative_error(&analytic, &numeric)
}

/// Tiny toy model (p=4, d=3, h=5, w=2, C=2) with a random head, plus a
/// 3-frame input whose pooling blocks are well separated from ties.
pub fn tiny_instance(
    seed: u64,
    pooling: Pooling,
) -> Result<(ToyModel<f64>, Vec<FrameFeatures<f64>>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig {
        side: 16,
        patch_grid: 2,
        d: 3,
        h: 5,
        w: 2,
        classes: 2,
        noise_scale: 1.0,
        pooling,
        seed,
        ..ModelConfig::default()
    };
    loop {
        let mut model = ToyModel::<f64>::build(&cfg)?;
        model.head_w = random_tensor(&mut rng, model.head_w.dims().to_vec(), -1.0, 1.0);
        model.head_b = random_tensor(&mut rng, vec![2], -1.0, 1.0);
        let feats = random_frames(&mut rng, 3, 4, 3);
        let label = rng.gen_range(0..2);
        let windows = partition_windows(&feats, 2)?;
        let mut gap = f64::INFINITY;
        for win in &windows {
            let trace = window_forward_traced(win, &model.aligner)?;
            gap = gap.min(match pooling {
                Pooling::Post => min_pool_gap(&as_grid(&trace.pre_pool)),
                Pooling::Pre => win
                    .frames
                    .iter()
                    .map(|f| min_pool_gap(&as_grid(&f.z)))
                    .fold(f64::INFINITY, f64::min),
            });
        }
        if gap >= TIE_GAP {
            return Ok((model, feats, label));
        }
    }
}

/// Every trainable gradient of the aligner-plus-head loss.
pub fn check_full_model(seed: u64, pooling: Pooling) -> Result<f64> {
    let (model, feats, label) = tiny_instance(seed, pooling)?;
    let (_, _, grads) = loss_and_grads(&model, &feats, label)?;
    let loss = |m: &ToyModel<f64>| loss_from_features(m, &feats, label).unwrap();
    let mut worst: f64 = 0.0;
    let mut check = |analytic: &Tensor<f64>, numeric: Tensor<f64>| -> Result<()> {
        worst = worst.max(relative_error(analytic, &numeric)?);
        Ok(())
    };
    macro_rules! param {
        ($($field:ident).+, $grad:expr) => {{
            let base = model.$($field).+.clone();
            let numeric = finite_difference_gradient(
                |t| {
                    let mut m = model.clone();
                    m.$($field).+ = t.clone();
                    loss(&m)
                },
                &base,
                FD_STEP,
            )?;
            check($grad, numeric)?;
        }};
    }
    param!(aligner.w_p, &grads.aligner.w_p);
    param!(aligner.b_p, &grads.aligner.b_p);
    param!(aligner.w_q, &grads.aligner.w_q);
    param!(aligner.b_q, &grads.aligner.b_q);
    param!(head_w, &grads.head_w);
    param!(head_b, &grads.head_b);
    Ok(worst)
}

/// Gradient of a random functional of one window's tokens with respect to
/// its input frames, which exercises the pre-pool backward path.
pub fn check_window_inputs(seed: u64, pooling: Pooling) -> Result<f64> {
    let (model, feats, _) = tiny_instance(seed, pooling)?;
    let win = partition_windows(&feats[..2], 2)?.remove(0);
    let trace = window_forward_traced(&win, &model.aligner)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let r: Tensor<f64> = random_tensor(&mut rng, trace.tokens.dims().to_vec(), -1.0, 1.0);
    let grads = window_backward(&trace, &model.aligner, &r, true)?;
    let frame_grads = grads.frames.expect("requested");
    let mut worst: f64 = 0.0;
    for (k, analytic) in frame_grads.iter().enumerate() {
        let numeric = finite_difference_gradient(
            |t| {
                let mut w = win.clone();
                w.frames[k].z = t.clone();
                weighted_sum(&window_forward(&w, &model.aligner).unwrap().tokens, &r)
            },
            &win.frames[k].z,
            FD_STEP,
        )?;
        worst = worst.max(relative_error(analytic, &numeric)?);
    }
    Ok(worst)
}

/// Runs every gradient check over `seeds` seeds.
pub fn gradient_checks(seeds: usize) -> Result<Vec<GradCheck>> {
    type Check = fn(u64) -> Result<f64>;
    let checks: [(&str, Check); 7] = [
        ("linear", check_linear),
        ("gelu", check_gelu),
        ("max_pool_2x2", check_max_pool),
        ("aligner+head (post-pool)", |s| {
            check_full_model(s, Pooling::Post)
        }),
        ("aligner+head (pre-pool)", |s| {
            check_full_model(s, Pooling::Pre)
        }),
        ("window inputs (post-pool)", |s| {
            check_window_inputs(s, Pooling::Post)
        }),
        ("window inputs (pre-pool)", |s| {
            check_window_inputs(s, Pooling::Pre)
        }),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let mut worst: f64 = 0.0;
            for seed in 0..seeds as u64 {
                worst = worst.max(f(seed)?);
            }
            Ok(GradCheck {
                name: (*name).to_string(),
                worst,
                seeds,
            })
        })
        .collect()
}

/// Block-init aligner with zero noise from a random base, for self-tests.
pub fn zero_noise_pair(
    seed: u64,
    d: usize,
    h: usize,
    w: usize,
) -> Result<(SingleFrameAlignerParams<f32>, HfrAlignerParams<f32>)> {
    let base = SingleFrameAlignerParams::random(seed, d, h);
    let params = init_from_single_frame(&base, w, 0.0, seed)?;
    Ok((base, params))
}
