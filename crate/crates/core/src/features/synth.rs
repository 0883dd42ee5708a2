use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Rotation sense as seen on screen (rows grow downward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Counter-clockwise, `+1`.
    Ccw,
    /// Clockwise, `-1`.
    Cw,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Self::Ccw => 1.0,
            Self::Cw => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Self::Ccw),
            -1 => Ok(Self::Cw),
            other => Err(Error::config(format!(
                "direction must be +1 or -1, got {other}"
            ))),
        }
    }

    /// Class label used by the trainer.
    pub fn label(self) -> usize {
        match self {
            Self::Cw => 0,
            Self::Ccw => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ccw => "ccw",
            Self::Cw => "cw",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ccw" => Ok(Self::Ccw),
            "cw" => Ok(Self::Cw),
            other => Err(Error::config(format!(
                "unknown direction {other:?}, expected one of: ccw, cw"
            ))),
        }
    }
}

/// Square grayscale image with pixels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub side: usize,
    pub pixels: Vec<f32>,
}

impl GrayFrame {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            pixels: vec![0.0; side * side],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.side + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawVideo {
    pub frames: Vec<GrayFrame>,
    pub native_fps: u32,
    pub duration_s: f64,
}

/// Renders a Gaussian dot (σ = side/16) orbiting the image center at radius
/// side/4. The starting phase is drawn from `seed`.
pub fn generate_rotating_dot(
    seed: u64,
    revolutions_per_s: f64,
    direction: Direction,
    duration_s: f64,
    native_fps: u32,
    side: usize,
) -> Result<RawVideo> {
    if side < 16 {
        return Err(Error::config(format!(
            "frame side must be at least 16, got {side}"
        )));
    }
    if native_fps < 16 {
        return Err(Error::config(format!(
            "native fps must be at least 16, got {native_fps}"
        )));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) || !revolutions_per_s.is_finite() {
        return Err(Error::config("duration must be positive and speed finite"));
    }
    let phase = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..TAU);
    let count = (f64::from(native_fps) * duration_s).round() as usize;
    let s = side as f64;
    let (center, radius, sigma) = (s / 2.0, s / 4.0, s / 16.0);
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let frames = (0..count)
        .map(|i| {
            let t = i as f64 / f64::from(native_fps);
            let theta = phase + direction.sign() * TAU * revolutions_per_s * t;
            let (cx, cy) = (center + radius * theta.cos(), center - radius * theta.sin());
            let mut frame = GrayFrame::zeros(side);
            for row in 0..side {
                let dy = row as f64 + 0.5 - cy;
                for col in 0..side {
                    let dx = col as f64 + 0.5 - cx;
                    frame.pixels[row * side + col] =
                        (-(dx * dx + dy * dy) * inv_two_var).exp() as f32;
                }
            }
            frame
        })
        .collect();
    Ok(RawVideo {
        frames,
        native_fps,
        duration_s,
    })
}

/// Intensity centroid as an angle around the image center, counter-clockwise
/// positive, in `(-π, π]`.
pub fn dot_centroid(frame: &GrayFrame) -> f64 {
    let c = frame.side as f64 / 2.0;
    let (mut sx, mut sy, mut mass) = (0.0, 0.0, 0.0);
    for row in 0..frame.side {
        for col in 0..frame.side {
            let v = f64::from(frame.get(row, col));
            sx += v * (col as f64 + 0.5 - c);
            sy += v * (c - (row as f64 + 0.5));
            mass += v;
        }
    }
    if mass == 0.0 {
        return 0.0;
    }
    sy.atan2(sx)
}
