//! Frame sampling, synthetic videos, the frozen encoder stub and windowing.

mod encoder;
mod sampling;
mod storage;
mod synth;
mod window;

pub use encoder::{encode_frame, encode_video, EncoderStub, FrameFeatures, DEFAULT_ENCODER_SEED};
pub use sampling::{sample_frame_indices, DEFAULT_FRAME_CAP};
pub use storage::{features_from_archive, features_to_archive, read_features, write_features};
pub use synth::{dot_centroid, generate_rotating_dot, Direction, GrayFrame, RawVideo};
pub use window::{partition_windows, WindowBatch};

/// Side length of a perfect square, if it is one.
pub fn exact_sqrt(p: usize) -> Option<usize> {
    let g = (p as f64).sqrt().round() as usize;
    (g * g == p).then_some(g)
}
