use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{exact_sqrt, partition_windows, FrameFeatures, WindowBatch};
use crate::numerics::{
    concat_feature_dim, gelu, gelu_backward, linear, linear_backward, linear_backward_params,
    max_pool_2x2, max_pool_2x2_backward, split_feature_dim, Scalar, Tensor,
};

use super::{HfrAlignerParams, Pooling, SingleFrameAlignerParams};

/// Pooled tokens of one processing window.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualTokens<T = f32> {
    /// `m × h`, `m = ⌊√p/2⌋²`
    pub tokens: Tensor<T>,
    pub window_index: usize,
}

/// `⌊√p/2⌋²` for a perfect-square patch count.
pub fn tokens_per_window(p: usize) -> Result<usize> {
    let g = exact_sqrt(p)
        .ok_or_else(|| Error::shape(format!("patch count {p} is not a perfect square")))?;
    Ok((g / 2) * (g / 2))
}

fn grid_side(p: usize) -> Result<usize> {
    exact_sqrt(p).ok_or_else(|| Error::shape(format!("patch count {p} is not a perfect square")))
}

/// Views `p × c` rows as a `√p × √p × c` grid (row-major patch order), max
/// pools 2x2 and flattens back to `m × c`.
pub fn pool_tokens<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (p, c) = x.matrix_dims()?;
    let g = grid_side(p)?;
    let pooled = max_pool_2x2(&x.clone().reshape(vec![g, g, c])?)?;
    let half = g / 2;
    pooled.reshape(vec![half * half, c])
}

pub fn pool_tokens_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (p, c) = x.matrix_dims()?;
    let g = grid_side(p)?;
    let half = g / 2;
    let grad = grad_out.clone().reshape(vec![half, half, c])?;
    max_pool_2x2_backward(&x.clone().reshape(vec![g, g, c])?, &grad)?.reshape(vec![p, c])
}

/// `B(GELU(A(z)))` row-wise.
pub fn single_frame_forward<T: Scalar>(
    z: &Tensor<T>,
    params: &SingleFrameAlignerParams<T>,
) -> Result<Tensor<T>> {
    let hidden = linear(z, &params.w_a, &params.b_a)?;
    linear(&gelu(&hidden), &params.w_b, &params.b_b)
}

/// `H̃ = Q(GELU(P(Z_cat)))` without pooling.
pub fn pre_pool_forward<T: Scalar>(
    concat: &Tensor<T>,
    params: &HfrAlignerParams<T>,
) -> Result<Tensor<T>> {
    let hidden = linear(concat, &params.w_p, &params.b_p)?;
    linear(&gelu(&hidden), &params.w_q, &params.b_q)
}

/// Intermediate values of one window forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct WindowTrace<T = f32> {
    pub window_index: usize,
    /// Per-frame features as fed in (before any pre-pooling).
    pub frames: Vec<Tensor<T>>,
    /// MLP input: `Z_cat`, with `p` rows (post) or `m` rows (pre).
    pub input: Tensor<T>,
    /// Output of `P`, before GELU.
    pub hidden: Tensor<T>,
    /// `H̃`.
    pub pre_pool: Tensor<T>,
    /// Final `m × h` tokens.
    pub tokens: Tensor<T>,
}

fn check_window<T: Scalar>(win: &WindowBatch<T>, params: &HfrAlignerParams<T>) -> Result<usize> {
    let (d, _) = params.validate()?;
    if win.frames.len() != params.window {
        return Err(Error::shape(format!(
            "window holds {} frames, aligner expects w={}",
            win.frames.len(),
            params.window
        )));
    }
    let p = win.frames[0].z.matrix_dims()?.0;
    grid_side(p)?;
    for f in &win.frames {
        if f.z.dims() != [p, d] {
            return Err(Error::shape(format!(
                "frame {} features have dims {:?}, expected [{p}, {d}]",
                f.frame_index,
                f.z.dims()
            )));
        }
    }
    Ok(p)
}

pub fn window_forward_traced<T: Scalar>(
    win: &WindowBatch<T>,
    params: &HfrAlignerParams<T>,
) -> Result<WindowTrace<T>> {
    check_window(win, params)?;
    let frames: Vec<Tensor<T>> = win.frames.iter().map(|f| f.z.clone()).collect();
    let input = match params.pooling {
        Pooling::Post => win.concat()?,
        Pooling::Pre => {
            let pooled = frames.iter().map(pool_tokens).collect::<Result<Vec<_>>>()?;
            concat_feature_dim(&pooled.iter().collect::<Vec<_>>())?
        }
    };
    let hidden = linear(&input, &params.w_p, &params.b_p)?;
    let pre_pool = linear(&gelu(&hidden), &params.w_q, &params.b_q)?;
    let tokens = match params.pooling {
        Pooling::Post => pool_tokens(&pre_pool)?,
        Pooling::Pre => pre_pool.clone(),
    };
    Ok(WindowTrace {
        window_index: win.window_index,
        frames,
        input,
        hidden,
        pre_pool,
        tokens,
    })
}

pub fn window_forward<T: Scalar>(
    win: &WindowBatch<T>,
    params: &HfrAlignerParams<T>,
) -> Result<VisualTokens<T>> {
    let trace = window_forward_traced(win, params)?;
    Ok(VisualTokens {
        tokens: trace.tokens,
        window_index: trace.window_index,
    })
}

/// Runs every window independently; output order follows `window_index`.
pub fn video_forward<T: Scalar>(
    seq: &[FrameFeatures<T>],
    params: &HfrAlignerParams<T>,
) -> Result<Vec<VisualTokens<T>>> {
    let windows = partition_windows(seq, params.window)?;
    windows
        .par_iter()
        .map(|win| window_forward(win, params))
        .collect()
}

/// Gradients for the four aligner tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignerGrads<T = f32> {
    pub w_p: Tensor<T>,
    pub b_p: Tensor<T>,
    pub w_q: Tensor<T>,
    pub b_q: Tensor<T>,
}

impl<T: Scalar> AlignerGrads<T> {
    pub fn zeros_like(params: &HfrAlignerParams<T>) -> Self {
        Self {
            w_p: Tensor::zeros(params.w_p.dims().to_vec()),
            b_p: Tensor::zeros(params.b_p.dims().to_vec()),
            w_q: Tensor::zeros(params.w_q.dims().to_vec()),
            b_q: Tensor::zeros(params.b_q.dims().to_vec()),
        }
    }

    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        self.w_p.axpy(T::one(), &other.w_p)?;
        self.b_p.axpy(T::one(), &other.b_p)?;
        self.w_q.axpy(T::one(), &other.w_q)?;
        self.b_q.axpy(T::one(), &other.b_q)
    }
}

#[derive(Debug, Clone)]
pub struct WindowGrads<T = f32> {
    pub params: AlignerGrads<T>,
    /// Gradient for each input frame's features, when requested.
    pub frames: Option<Vec<Tensor<T>>>,
}

/// Backward pass of [`window_forward_traced`] for an upstream gradient on the tokens.
pub fn window_backward<T: Scalar>(
    trace: &WindowTrace<T>,
    params: &HfrAlignerParams<T>,
    grad_tokens: &Tensor<T>,
    want_frame_grads: bool,
) -> Result<WindowGrads<T>> {
    if grad_tokens.dims() != trace.tokens.dims() {
        return Err(Error::shape(format!(
            "token gradient dims {:?}, expected {:?}",
            grad_tokens.dims(),
            trace.tokens.dims()
        )));
    }
    let grad_pre_pool = match params.pooling {
        Pooling::Post => pool_tokens_backward(&trace.pre_pool, grad_tokens)?,
        Pooling::Pre => grad_tokens.clone(),
    };
    let activated = gelu(&trace.hidden);
    let q = linear_backward(&activated, &params.w_q, &grad_pre_pool)?;
    let grad_hidden = gelu_backward(&trace.hidden, &q.input)?;
    let (w_p, b_p, frames) = if want_frame_grads {
        let p = linear_backward(&trace.input, &params.w_p, &grad_hidden)?;
        let widths: Vec<usize> = vec![params.feature_dim(); params.window];
        let blocks = split_feature_dim(&p.input, &widths)?;
        let frame_grads = match params.pooling {
            Pooling::Post => blocks,
            Pooling::Pre => trace
                .frames
                .iter()
                .zip(&blocks)
                .map(|(z, g)| pool_tokens_backward(z, g))
                .collect::<Result<Vec<_>>>()?,
        };
        (p.weight, p.bias, Some(frame_grads))
    } else {
        let (w, b) = linear_backward_params(&trace.input, &grad_hidden)?;
        (w, b, None)
    };
    Ok(WindowGrads {
        params: AlignerGrads {
            w_p,
            b_p,
            w_q: q.weight,
            b_q: q.bias,
        },
        frames,
    })
}
