use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

use super::sampling::sample_frame_indices;
use super::synth::{GrayFrame, RawVideo};

/// Seed of the frozen projection used when callers do not supply one.
pub const DEFAULT_ENCODER_SEED: u64 = 0x05EE_DF16;

/// One frame's encoder output: `p` patch rows of width `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures<T = f32> {
    pub z: Tensor<T>,
    pub frame_index: usize,
    pub timestamp_s: f32,
}

impl<T: Scalar> FrameFeatures<T> {
    pub fn cast<U: Scalar>(&self) -> FrameFeatures<U> {
        FrameFeatures {
            z: self.z.cast(),
            frame_index: self.frame_index,
            timestamp_s: self.timestamp_s,
        }
    }
}

/// Frozen per-patch linear featurizer.
///
/// The frame is cut into `patch_grid × patch_grid` square patches; each
/// patch is flattened row-major and multiplied by the same fixed
/// `patch_dim × d` projection.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStub<T = f32> {
    patch_grid: usize,
    patch_side: usize,
    proj: Tensor<T>,
}

impl<T: Scalar> EncoderStub<T> {
    /// Projection entries are uniform on `±√(3/patch_dim)`, so a unit-norm
    /// patch maps to features of unit variance.
    pub fn new(seed: u64, side: usize, patch_grid: usize, d: usize) -> Result<Self> {
        if patch_grid == 0 || d == 0 || side == 0 || !side.is_multiple_of(patch_grid) {
            return Err(Error::shape(format!(
                "frame side {side} must be a positive multiple of the patch grid {patch_grid}"
            )));
        }
        let patch_side = side / patch_grid;
        let patch_dim = patch_side * patch_side;
        let bound = (3.0 / patch_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj = Tensor::from_fn(vec![patch_dim, d], |_| {
            T::from_f64(rng.gen_range(-bound..bound))
        });
        Ok(Self {
            patch_grid,
            patch_side,
            proj,
        })
    }

    /// Restores a stub from a stored projection.
    pub fn from_projection(patch_grid: usize, proj: Tensor<T>) -> Result<Self> {
        let (patch_dim, _) = proj.matrix_dims()?;
        let patch_side = super::exact_sqrt(patch_dim)
            .ok_or_else(|| Error::shape(format!("patch dim {patch_dim} is not a square")))?;
        if patch_grid == 0 {
            return Err(Error::shape("patch grid must be positive"));
        }
        Ok(Self {
            patch_grid,
            patch_side,
            proj,
        })
    }

    pub fn patch_grid(&self) -> usize {
        self.patch_grid
    }

    pub fn patches(&self) -> usize {
        self.patch_grid * self.patch_grid
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn feature_dim(&self) -> usize {
        self.proj.dims()[1]
    }

    pub fn frame_side(&self) -> usize {
        self.patch_grid * self.patch_side
    }

    pub fn projection(&self) -> &Tensor<T> {
        &self.proj
    }
}

/// `Z = Enc(F)`: rows follow the row-major patch order.
pub fn encode_frame<T: Scalar>(
    frame: &GrayFrame,
    enc: &EncoderStub<T>,
    frame_index: usize,
    timestamp_s: f32,
) -> Result<FrameFeatures<T>> {
    if !frame.side.is_multiple_of(enc.patch_grid) {
        return Err(Error::shape(format!(
            "frame side {} is not divisible by the patch grid {}",
            frame.side, enc.patch_grid
        )));
    }
    if frame.side != enc.frame_side() {
        return Err(Error::shape(format!(
            "frame side {} does not match the encoder's {}",
            frame.side,
            enc.frame_side()
        )));
    }
    let (g, ps) = (enc.patch_grid, enc.patch_side);
    let mut patches = Vec::with_capacity(g * g * ps * ps);
    for pr in 0..g {
        for pc in 0..g {
            for r in 0..ps {
                let start = (pr * ps + r) * frame.side + pc * ps;
                patches.extend(
                    frame.pixels[start..start + ps]
                        .iter()
                        .map(|&v| T::from_f64(f64::from(v))),
                );
            }
        }
    }
    let patches = Tensor::new(vec![g * g, ps * ps], patches)?;
    let zero_bias = Tensor::zeros(vec![enc.feature_dim()]);
    let z = crate::numerics::linear(&patches, &enc.proj, &zero_bias)?;
    Ok(FrameFeatures {
        z,
        frame_index,
        timestamp_s,
    })
}

/// Samples `video` at `target_fps` (with the frame cap) and encodes every kept frame.
pub fn encode_video<T: Scalar>(
    video: &RawVideo,
    enc: &EncoderStub<T>,
    target_fps: u32,
    cap: usize,
) -> Result<Vec<FrameFeatures<T>>> {
    let idx = sample_frame_indices(video.frames.len(), video.native_fps, target_fps, cap)?;
    idx.into_iter()
        .map(|i| {
            let ts = (i as f64 / f64::from(video.native_fps)) as f32;
            encode_frame(&video.frames[i], enc, i, ts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_frame(seed: u64, side: usize) -> GrayFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayFrame {
            side,
            pixels: (0..side * side).map(|_| rng.gen_range(0.0..1.0)).collect(),
        }
    }

    #[test]
    fn zero_frame_maps_to_zero() {
        let enc = EncoderStub::<f32>::new(1, 32, 4, 24).unwrap();
        let z = encode_frame(&GrayFrame::zeros(32), &enc, 0, 0.0).unwrap().z;
        assert_eq!(z.dims(), &[16, 24]);
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encoding_is_linear() {
        let enc = EncoderStub::<f32>::new(2, 32, 4, 24).unwrap();
        let (a, b) = (random_frame(1, 32), random_frame(2, 32));
        let sum = GrayFrame {
            side: 32,
            pixels: a.pixels.iter().zip(&b.pixels).map(|(x, y)| x + y).collect(),
        };
        let za = encode_frame(&a, &enc, 0, 0.0).unwrap().z;
        let zb = encode_frame(&b, &enc, 0, 0.0).unwrap().z;
        let zs = encode_frame(&sum, &enc, 0, 0.0).unwrap().z;
        assert!(zs.max_abs_diff(&za.add(&zb).unwrap()).unwrap() <= 1e-5);
    }

    #[test]
    fn single_patch_change_touches_one_row() {
        let enc = EncoderStub::<f64>::new(3, 32, 4, 24).unwrap();
        let a = random_frame(4, 32);
        let mut b = a.clone();
        // patch (row 2, col 1) covers rows 16..24, cols 8..16
        b.pixels[18 * 32 + 10] += 0.25;
        let za = encode_frame(&a, &enc, 0, 0.0).unwrap().z;
        let zb = encode_frame(&b, &enc, 0, 0.0).unwrap().z;
        for row in 0..16 {
            let differs = (0..24).any(|c| za.data()[row * 24 + c] != zb.data()[row * 24 + c]);
            assert_eq!(differs, row == 2 * 4 + 1, "row {row}");
        }
    }

    #[test]
    fn deterministic_projection() {
        let a = EncoderStub::<f32>::new(11, 32, 4, 24).unwrap();
        let b = EncoderStub::<f32>::new(11, 32, 4, 24).unwrap();
        assert!(a.projection().bit_eq(b.projection()));
        let f = random_frame(5, 32);
        let za = encode_frame(&f, &a, 0, 0.0).unwrap();
        let zb = encode_frame(&f, &b, 0, 0.0).unwrap();
        assert!(za.z.bit_eq(&zb.z));
    }

    #[test]
    fn indivisible_side_is_shape_error() {
        let enc = EncoderStub::<f32>::new(1, 32, 4, 8).unwrap();
        let frame = GrayFrame::zeros(30);
        assert!(matches!(
            encode_frame(&frame, &enc, 0, 0.0),
            Err(Error::Shape(_))
        ));
        assert!(EncoderStub::<f32>::new(1, 30, 4, 8).is_err());
    }
}
