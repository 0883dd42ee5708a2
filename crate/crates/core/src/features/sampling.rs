use crate::error::{Error, Result};

/// Frame budget of the 16 FPS sampler: 16 frames per second for up to 110 s.
pub const DEFAULT_FRAME_CAP: usize = 16 * 110;

/// Indices of the source frames to keep when resampling to `target_fps`.
///
/// Short videos are stride-sampled at the target rate; a final stride
/// that rounds past the last frame is dropped. When that would
/// exceed `cap` frames, exactly `cap` indices are spread uniformly over the
/// whole video instead.
pub fn sample_frame_indices(
    total_frames: usize,
    native_fps: u32,
    target_fps: u32,
    cap: usize,
) -> Result<Vec<usize>> {
    if total_frames == 0 || native_fps == 0 || target_fps == 0 || cap == 0 {
        return Err(Error::config(format!(
            "sampling arguments must be positive (frames {total_frames}, native {native_fps}, target {target_fps}, cap {cap})"
        )));
    }
    if target_fps > native_fps {
        return Err(Error::UnsupportedRate {
            target: target_fps,
            native: native_fps,
        });
    }
    let ratio = f64::from(native_fps) / f64::from(target_fps);
    let wanted = (total_frames as u64 * u64::from(target_fps)).div_ceil(u64::from(native_fps));
    let last = total_frames - 1;
    if wanted as usize <= cap {
        Ok((0..wanted as usize)
            .map(|t| (t as f64 * ratio).round() as usize)
            .take_while(|&i| i <= last)
            .collect())
    } else {
        Ok((0..cap)
            .map(|i| (i as u128 * total_frames as u128 / cap as u128) as usize)
            .collect())
    }
}
