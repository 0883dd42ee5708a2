use crate::error::{Error, Result};
use crate::numerics::{concat_feature_dim, Scalar, Tensor};

use super::FrameFeatures;

/// `w` consecutive frames forming one processing window.
///
/// The first `valid` frames come from the input sequence; the rest repeat
/// the last real frame to fill a short final window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch<T = f32> {
    pub frames: Vec<FrameFeatures<T>>,
    pub window_index: usize,
    pub valid: usize,
}

impl<T: Scalar> WindowBatch<T> {
    pub fn new(frames: Vec<FrameFeatures<T>>, window_index: usize) -> Self {
        let valid = frames.len();
        Self {
            frames,
            window_index,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.frames.len()
    }

    /// `p × (w·d)`; column block `k` is frame `k`'s features.
    pub fn concat(&self) -> Result<Tensor<T>> {
        let parts: Vec<&Tensor<T>> = self.frames.iter().map(|f| &f.z).collect();
        concat_feature_dim(&parts)
    }
}

/// Splits `seq` into consecutive non-overlapping windows of `w` frames.
/// A short final window is padded by repeating its last frame.
pub fn partition_windows<T: Scalar>(
    seq: &[FrameFeatures<T>],
    w: usize,
) -> Result<Vec<WindowBatch<T>>> {
    if seq.is_empty() {
        return Err(Error::config("cannot window an empty frame sequence"));
    }
    if w == 0 {
        return Err(Error::config("window width must be at least 1"));
    }
    Ok(seq
        .chunks(w)
        .enumerate()
        .map(|(j, chunk)| {
            let mut frames = chunk.to_vec();
            let last = chunk[chunk.len() - 1].clone();
            frames.resize(w, last);
            WindowBatch {
                frames,
                window_index: j,
                valid: chunk.len(),
            }
        })
        .collect())
}
