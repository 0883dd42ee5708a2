//! Variable-frame-rate decoding: running an aligner trained with `w` frames
//! per window on `s = w/k` frames per window, either by repeating each frame
//! `k` times or by slicing the aligner down to its leading `s` blocks.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::aligner::{window_forward, HfrAlignerParams, Pooling, VisualTokens};
use crate::error::{Error, Result};
use crate::features::{partition_windows, FrameFeatures, WindowBatch};
use crate::numerics::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeMethod {
    Repeat,
    Trim,
}

impl fmt::Display for DecodeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Repeat => "repeat",
            Self::Trim => "trim",
        })
    }
}

impl FromStr for DecodeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "repeat" => Ok(Self::Repeat),
            "trim" => Ok(Self::Trim),
            other => Err(Error::config(format!(
                "unknown decode method {other:?}, expected one of: repeat, trim"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    pub train_fps: u32,
    pub test_fps: u32,
    pub method: DecodeMethod,
}

impl DecodeConfig {
    /// Only integer reduction factors are accepted: `test_fps` must divide `train_fps`.
    pub fn new(train_fps: u32, test_fps: u32, method: DecodeMethod) -> Result<Self> {
        if test_fps == 0 || train_fps == 0 {
            return Err(Error::config("frame rates must be at least 1"));
        }
        if !train_fps.is_multiple_of(test_fps) {
            return Err(Error::config(format!(
                "test fps {test_fps} does not divide train fps {train_fps}"
            )));
        }
        Ok(Self {
            train_fps,
            test_fps,
            method,
        })
    }

    /// Reduction factor `k = train_fps / test_fps`.
    pub fn k(&self) -> usize {
        (self.train_fps / self.test_fps) as usize
    }

    /// Frames per window at test time for an aligner of width `w`.
    pub fn frames_per_window(&self, w: usize) -> Result<usize> {
        let k = self.k();
        if !w.is_multiple_of(k) {
            return Err(Error::config(format!(
                "reduction factor {k} does not divide window width {w}"
            )));
        }
        Ok(w / k)
    }
}

/// Repeats each of `frames` `k` times, frame-major, into a full-width window.
pub fn repeat_expand<T: Scalar>(
    frames: &[FrameFeatures<T>],
    k: usize,
    w: usize,
    window_index: usize,
) -> Result<WindowBatch<T>> {
    if k == 0 || frames.len() * k != w {
        return Err(Error::config(format!(
            "{} frames repeated {k} times do not fill a window of {w}",
            frames.len()
        )));
    }
    let expanded = frames
        .iter()
        .flat_map(|f| std::iter::repeat_n(f, k).cloned())
        .collect();
    Ok(WindowBatch::new(expanded, window_index))
}

/// Decodes a sequence sampled at `cfg.test_fps` by frame repetition.
pub fn decode_repeat<T: Scalar>(
    seq: &[FrameFeatures<T>],
    params: &HfrAlignerParams<T>,
    cfg: &DecodeConfig,
) -> Result<Vec<VisualTokens<T>>> {
    if cfg.method != DecodeMethod::Repeat {
        return Err(Error::config("decode_repeat needs the repeat method"));
    }
    let k = cfg.k();
    let s = cfg.frames_per_window(params.window)?;
    let windows = partition_windows(seq, s)?;
    windows
        .par_iter()
        .map(|win| {
            let full = repeat_expand(&win.frames, k, params.window, win.window_index)?;
            window_forward(&full, params)
        })
        .collect()
}

/// Leading-block slice of an aligner for `s` frames per window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedAlignerParams<T = f32> {
    /// `(s·d) × (s·h)`
    pub w_p: Tensor<T>,
    pub b_p: Tensor<T>,
    /// `(s·h) × h`
    pub w_q: Tensor<T>,
    pub b_q: Tensor<T>,
    pub s: usize,
    pub pooling: Pooling,
}

impl<T: Scalar> TrimmedAlignerParams<T> {
    /// The trimmed weights as a window aligner of width `s`.
    pub fn to_aligner(&self) -> HfrAlignerParams<T> {
        HfrAlignerParams {
            w_p: self.w_p.clone(),
            b_p: self.b_p.clone(),
            w_q: self.w_q.clone(),
            b_q: self.b_q.clone(),
            window: self.s,
            pooling: self.pooling,
        }
    }
}

/// `W_P' = W_P[:sd, :sh]`, `b_P' = b_P[:sh]`, `W_Q' = W_Q[:sh, :]`, `b_Q' = b_Q`.
pub fn trim_aligner<T: Scalar>(
    params: &HfrAlignerParams<T>,
    s: usize,
) -> Result<TrimmedAlignerParams<T>> {
    let (d, h) = params.validate()?;
    if s == 0 || s > params.window {
        return Err(Error::config(format!(
            "trim width {s} outside 1..={}",
            params.window
        )));
    }
    let cols = params.window * h;
    let (sd, sh) = (s * d, s * h);
    let wp = params.w_p.data();
    let mut w_p = Vec::with_capacity(sd * sh);
    for r in 0..sd {
        w_p.extend_from_slice(&wp[r * cols..r * cols + sh]);
    }
    Ok(TrimmedAlignerParams {
        w_p: Tensor::new(vec![sd, sh], w_p)?,
        b_p: Tensor::new(vec![sh], params.b_p.data()[..sh].to_vec())?,
        w_q: Tensor::new(vec![sh, h], params.w_q.data()[..sh * h].to_vec())?,
        b_q: params.b_q.clone(),
        s,
        pooling: params.pooling,
    })
}

/// Decodes with trimmed weights on windows of `s` frames.
pub fn decode_trimmed<T: Scalar>(
    seq: &[FrameFeatures<T>],
    trimmed: &TrimmedAlignerParams<T>,
) -> Result<Vec<VisualTokens<T>>> {
    crate::aligner::video_forward(seq, &trimmed.to_aligner())
}
