//! The high-frame-rate aligner.
//!
//! A window of `w` frames is concatenated to `p × (w·d)`, mapped through
//! `P: w·d → w·h`, GELU and `Q: w·h → h`, and the resulting `p × h` map is
//! 2x2 max pooled on its `√p × √p` patch grid to `⌊√p/2⌋²` visual tokens.

mod forward;
mod params;

pub use forward::{
    pool_tokens, pool_tokens_backward, pre_pool_forward, single_frame_forward, tokens_per_window,
    video_forward, window_backward, window_forward, window_forward_traced, AlignerGrads,
    VisualTokens, WindowGrads, WindowTrace,
};
pub use params::{
    aligner_from_archive, aligner_to_archive, base_from_archive, base_to_archive,
    init_from_single_frame, HfrAlignerParams, Pooling, SingleFrameAlignerParams,
};
