use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::io::NamedArchive;
use crate::numerics::{Scalar, Tensor};

/// Weights of the image-model aligner `B(GELU(A(z)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleFrameAlignerParams<T = f32> {
    /// `d × h`
    pub w_a: Tensor<T>,
    pub b_a: Tensor<T>,
    /// `h × h`
    pub w_b: Tensor<T>,
    pub b_b: Tensor<T>,
}

impl<T: Scalar> SingleFrameAlignerParams<T> {
    /// Seeded random weights with the usual dense-layer default: weights and
    /// biases uniform on `±1/√fan_in`.
    pub fn random(seed: u64, d: usize, h: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |dims: Vec<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Tensor::from_fn(dims, |_| T::from_f64(rng.gen_range(-bound..bound)))
        };
        let w_a = uniform(vec![d, h], d);
        let b_a = uniform(vec![h], d);
        let w_b = uniform(vec![h, h], h);
        let b_b = uniform(vec![h], h);
        Self { w_a, b_a, w_b, b_b }
    }

    pub fn feature_dim(&self) -> usize {
        self.w_a.dims()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_b.dims()[1]
    }

    pub fn validate(&self) -> Result<(usize, usize)> {
        let (d, h) = self.w_a.matrix_dims()?;
        let ok = self.b_a.dims() == [h] && self.w_b.dims() == [h, h] && self.b_b.dims() == [h];
        if !ok {
            return Err(Error::shape(format!(
                "single-frame aligner dims inconsistent: W_A {:?}, b_A {:?}, W_B {:?}, b_B {:?}",
                self.w_a.dims(),
                self.b_a.dims(),
                self.w_b.dims(),
                self.b_b.dims()
            )));
        }
        if ![&self.w_a, &self.b_a, &self.w_b, &self.b_b]
            .iter()
            .all(|t| t.is_finite())
        {
            return Err(Error::shape("single-frame aligner has non-finite weights"));
        }
        Ok((d, h))
    }

    pub fn cast<U: Scalar>(&self) -> SingleFrameAlignerParams<U> {
        SingleFrameAlignerParams {
            w_a: self.w_a.cast(),
            b_a: self.b_a.cast(),
            w_b: self.w_b.cast(),
            b_b: self.b_b.cast(),
        }
    }
}

/// Where the 2x2 spatial max pool sits relative to the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Pooling {
    /// Pool each frame's features, then run the MLP on the pooled grid.
    Pre,
    /// Run the MLP on all `p` patches, then pool its output.
    #[default]
    Post,
}

impl Pooling {
    pub fn code(self) -> u32 {
        match self {
            Self::Post => 0,
            Self::Pre => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Self::Post),
            1 => Ok(Self::Pre),
            other => Err(Error::format(format!("unknown pooling code {other}"))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pre => "pre",
            Self::Post => "post",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(Self::Pre),
            "post" => Ok(Self::Post),
            other => Err(Error::config(format!(
                "unknown pooling {other:?}, expected one of: pre, post"
            ))),
        }
    }
}

/// Weights of the window aligner `Q(GELU(P(Z_cat)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HfrAlignerParams<T = f32> {
    /// `(w·d) × (w·h)`
    pub w_p: Tensor<T>,
    pub b_p: Tensor<T>,
    /// `(w·h) × h`
    pub w_q: Tensor<T>,
    pub b_q: Tensor<T>,
    pub window: usize,
    pub pooling: Pooling,
}

impl<T: Scalar> HfrAlignerParams<T> {
    pub fn feature_dim(&self) -> usize {
        self.w_p.dims()[0] / self.window.max(1)
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_q.dims()[1]
    }

    pub fn with_pooling(mut self, pooling: Pooling) -> Self {
        self.pooling = pooling;
        self
    }

    /// Checks shape consistency; returns `(d, h)`.
    pub fn validate(&self) -> Result<(usize, usize)> {
        let w = self.window;
        if w == 0 {
            return Err(Error::shape("window width must be at least 1"));
        }
        let (rows, cols) = self.w_p.matrix_dims()?;
        let (qrows, h) = self.w_q.matrix_dims()?;
        if rows % w != 0 || cols != w * h || qrows != w * h {
            return Err(Error::shape(format!(
                "aligner dims inconsistent with w={w}: W_P {:?}, W_Q {:?}",
                self.w_p.dims(),
                self.w_q.dims()
            )));
        }
        if self.b_p.dims() != [w * h] || self.b_q.dims() != [h] {
            return Err(Error::shape(format!(
                "aligner bias dims {:?} / {:?}, expected [{}] / [{h}]",
                self.b_p.dims(),
                self.b_q.dims(),
                w * h
            )));
        }
        if ![&self.w_p, &self.b_p, &self.w_q, &self.b_q]
            .iter()
            .all(|t| t.is_finite())
        {
            return Err(Error::shape("aligner has non-finite weights"));
        }
        Ok((rows / w, h))
    }

    pub fn cast<U: Scalar>(&self) -> HfrAlignerParams<U> {
        HfrAlignerParams {
            w_p: self.w_p.cast(),
            b_p: self.b_p.cast(),
            w_q: self.w_q.cast(),
            b_q: self.b_q.cast(),
            window: self.window,
            pooling: self.pooling,
        }
    }
}

/// Block-matrix initialization from a single-frame aligner.
///
/// `W_P` carries `W_A` on its `w` diagonal blocks and Kaiming-uniform noise
/// on `±noise_scale·√(6/(w·d))` elsewhere; `b_P` stacks `b_A`; `W_Q`
/// stacks `W_B / w`; `b_Q = b_B`. With `noise_scale = 0` the window output
/// is exactly the mean of the per-frame single-frame outputs.
pub fn init_from_single_frame<T: Scalar>(
    base: &SingleFrameAlignerParams<T>,
    w: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<HfrAlignerParams<T>> {
    if w == 0 {
        return Err(Error::config("window width must be at least 1"));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::config(format!(
            "noise scale must be non-negative, got {noise_scale}"
        )));
    }
    let (d, h) = base.validate()?;
    let bound = noise_scale * (6.0 / (w * d) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (w * d, w * h);
    let wa = base.w_a.data();
    let mut w_p = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (br, bc) = (r / d, c / h);
            w_p[r * cols + c] = if br == bc {
                wa[(r % d) * h + c % h]
            } else if bound > 0.0 {
                T::from_f64(rng.gen_range(-bound..=bound))
            } else {
                T::zero()
            };
        }
    }
    let b_p: Vec<T> = (0..w)
        .flat_map(|_| base.b_a.data().iter().copied())
        .collect();
    let inv_w = T::from_f64(1.0 / w as f64);
    let w_q: Vec<T> = (0..w)
        .flat_map(|_| base.w_b.data().iter().map(move |&v| v * inv_w))
        .collect();
    Ok(HfrAlignerParams {
        w_p: Tensor::new(vec![rows, cols], w_p)?,
        b_p: Tensor::new(vec![cols], b_p)?,
        w_q: Tensor::new(vec![cols, h], w_q)?,
        b_q: base.b_b.clone(),
        window: w,
        pooling: Pooling::Post,
    })
}

/// Stores aligner weights under `aligner/*`; meta is `[w, d, h, p, pooling_code]`.
pub fn aligner_to_archive(params: &HfrAlignerParams<f32>, p: usize) -> Result<NamedArchive> {
    let (d, h) = params.validate()?;
    let mut archive = NamedArchive::new();
    archive.insert("aligner/W_P", params.w_p.clone());
    archive.insert("aligner/b_P", params.b_p.clone());
    archive.insert("aligner/W_Q", params.w_q.clone());
    archive.insert("aligner/b_Q", params.b_q.clone());
    let meta = [params.window, d, h, p, params.pooling.code() as usize].map(|v| v as f32);
    archive.insert("aligner/meta", Tensor::new(vec![5], meta.to_vec())?);
    Ok(archive)
}

/// Reads `aligner/*`; returns the parameters and the stored patch count `p`.
pub fn aligner_from_archive(archive: &NamedArchive) -> Result<(HfrAlignerParams<f32>, usize)> {
    let meta = archive.require("aligner/meta")?;
    if meta.dims() != [5] {
        return Err(Error::format(
            "aligner/meta must hold [w, d, h, p, pooling_code]",
        ));
    }
    let m: Vec<usize> = meta.data().iter().map(|&v| v as usize).collect();
    let params = HfrAlignerParams {
        w_p: archive.require("aligner/W_P")?.clone(),
        b_p: archive.require("aligner/b_P")?.clone(),
        w_q: archive.require("aligner/W_Q")?.clone(),
        b_q: archive.require("aligner/b_Q")?.clone(),
        window: m[0],
        pooling: Pooling::from_code(m[4] as u32)?,
    };
    let (d, h) = params
        .validate()
        .map_err(|e| Error::format(format!("stored aligner is invalid: {e}")))?;
    if (d, h) != (m[1], m[2]) {
        return Err(Error::format(format!(
            "aligner/meta says d={}, h={} but weights imply d={d}, h={h}",
            m[1], m[2]
        )));
    }
    Ok((params, m[3]))
}

pub fn base_to_archive(base: &SingleFrameAlignerParams<f32>) -> NamedArchive {
    let mut archive = NamedArchive::new();
    archive.insert("base/W_A", base.w_a.clone());
    archive.insert("base/b_A", base.b_a.clone());
    archive.insert("base/W_B", base.w_b.clone());
    archive.insert("base/b_B", base.b_b.clone());
    archive
}

pub fn base_from_archive(archive: &NamedArchive) -> Result<SingleFrameAlignerParams<f32>> {
    let base = SingleFrameAlignerParams {
        w_a: archive.require("base/W_A")?.clone(),
        b_a: archive.require("base/b_A")?.clone(),
        w_b: archive.require("base/W_B")?.clone(),
        b_b: archive.require("base/b_B")?.clone(),
    };
    base.validate()
        .map_err(|e| Error::format(format!("stored base aligner is invalid: {e}")))?;
    Ok(base)
}
