mod common;

use common::{random_frames, rng};
use hfr_core::features::{
    dot_centroid, encode_video, generate_rotating_dot, partition_windows, read_features,
    sample_frame_indices, write_features, Direction, EncoderStub, DEFAULT_ENCODER_SEED,
    DEFAULT_FRAME_CAP,
};
use hfr_core::numerics::io::NamedArchive;
use hfr_core::numerics::Tensor;
use hfr_core::Error;
use proptest::prelude::*;
use std::f64::consts::TAU;

#[test]
fn long_video_is_capped_uniformly() {
    let idx = sample_frame_indices(30 * 200, 30, 16, DEFAULT_FRAME_CAP).unwrap();
    assert_eq!(idx.len(), DEFAULT_FRAME_CAP);
    assert_eq!(idx[0], 0);
    assert!(idx.windows(2).all(|p| p[0] < p[1]));
}

#[test]
fn short_video_keeps_the_target_rate() {
    let idx = sample_frame_indices(64, 16, 1, DEFAULT_FRAME_CAP).unwrap();
    assert_eq!(idx, vec![0, 16, 32, 48]);
    assert_eq!(
        sample_frame_indices(64, 16, 16, DEFAULT_FRAME_CAP).unwrap(),
        (0..64).collect::<Vec<_>>()
    );
}

#[test]
fn upsampling_is_unsupported() {
    assert!(matches!(
        sample_frame_indices(10, 8, 16, 100),
        Err(Error::UnsupportedRate {
            target: 16,
            native: 8
        })
    ));
}

fn signed_step(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(TAU);
    if d > TAU / 2.0 {
        d - TAU
    } else {
        d
    }
}

#[test]
fn dot_turns_the_requested_way_at_high_rate() {
    for (dir, sign) in [(Direction::Ccw, 1.0), (Direction::Cw, -1.0)] {
        let v = generate_rotating_dot(3, 0.75, dir, 2.0, 16, 32).unwrap();
        for pair in v.frames.windows(2) {
            let step = signed_step(dot_centroid(&pair[0]), dot_centroid(&pair[1]));
            assert!(
                (step - sign * TAU * 0.75 / 16.0).abs() < 0.05,
                "{dir}: {step}"
            );
        }
    }
}

#[test]
fn fast_dot_aliases_to_the_opposite_direction_at_one_fps() {
    let v = generate_rotating_dot(5, 0.75, Direction::Ccw, 4.0, 16, 32).unwrap();
    let kept = sample_frame_indices(v.frames.len(), 16, 1, DEFAULT_FRAME_CAP).unwrap();
    for pair in kept.windows(2) {
        let step = signed_step(
            dot_centroid(&v.frames[pair[0]]),
            dot_centroid(&v.frames[pair[1]]),
        );
        assert!((step + TAU / 4.0).abs() < 0.05, "apparent step {step}");
    }
}

#[test]
fn cw_and_ccw_at_aliasing_speeds_look_identical_at_one_fps() {
    // +0.75 rev per sample is −0.25 rev, so a quarter turn clockwise
    let a = generate_rotating_dot(9, 0.75, Direction::Ccw, 4.0, 16, 32).unwrap();
    let b = generate_rotating_dot(9, 0.25, Direction::Cw, 4.0, 16, 32).unwrap();
    for t in [0, 16, 32, 48] {
        let diff = a.frames[t]
            .pixels
            .iter()
            .zip(&b.frames[t].pixels)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f32, f32::max);
        assert!(diff < 1e-4, "frame {t}: {diff}");
    }
}

#[test]
fn feature_file_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.f16t");
    let v = generate_rotating_dot(1, 0.25, Direction::Cw, 1.0, 16, 32).unwrap();
    let enc = EncoderStub::<f32>::new(DEFAULT_ENCODER_SEED, 32, 4, 24).unwrap();
    let feats = encode_video(&v, &enc, 16, DEFAULT_FRAME_CAP).unwrap();
    write_features(&path, &feats).unwrap();
    let back = read_features(&path).unwrap();
    assert_eq!(back.len(), feats.len());
    for (a, b) in feats.iter().zip(&back) {
        assert!(a.z.bit_eq(&b.z));
        assert_eq!(a.frame_index, b.frame_index);
        assert_eq!(a.timestamp_s.to_bits(), b.timestamp_s.to_bits());
    }
}

#[test]
fn empty_feature_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.f16t");
    assert!(matches!(write_features(&path, &[]), Err(Error::Format(_))));
    NamedArchive::new().save(&path).unwrap();
    assert!(matches!(read_features(&path), Err(Error::Format(_))));
}

#[test]
fn encoder_is_linear_in_pixels() {
    let enc = EncoderStub::<f64>::new(DEFAULT_ENCODER_SEED, 32, 4, 24).unwrap();
    let v = generate_rotating_dot(2, 0.5, Direction::Ccw, 1.0, 16, 32).unwrap();
    let a = encode_video::<f64>(&v, &enc, 16, DEFAULT_FRAME_CAP).unwrap();
    let mut doubled = v.clone();
    for f in &mut doubled.frames {
        f.pixels.iter_mut().for_each(|p| *p *= 2.0);
    }
    let b = encode_video::<f64>(&doubled, &enc, 16, DEFAULT_FRAME_CAP).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(x.z.scale(2.0).max_abs_diff(&y.z).unwrap() < 1e-12);
    }
}

proptest! {
    #[test]
    fn sampled_indices_are_bounded_and_increasing(
        total in 1usize..5000, native in 1u32..61, target in 1u32..61, cap in 1usize..2000,
    ) {
        prop_assume!(target <= native);
        let idx = sample_frame_indices(total, native, target, cap).unwrap();
        prop_assert!(!idx.is_empty() && idx.len() <= cap);
        prop_assert!(idx.windows(2).all(|p| p[0] < p[1]));
        prop_assert!(*idx.last().unwrap() < total);
    }

    #[test]
    fn windows_preserve_order_and_pad_with_the_last_frame(n in 1usize..40, w in 1usize..17, seed in any::<u64>()) {
        let seq = random_frames::<f32>(&mut rng(seed), n, 4, 2);
        let windows = partition_windows(&seq, w).unwrap();
        prop_assert_eq!(windows.len(), n.div_ceil(w));
        let flat: Vec<usize> = windows
            .iter()
            .flat_map(|win| win.frames[..win.valid].iter().map(|f| f.frame_index))
            .collect();
        prop_assert_eq!(flat, (0..n).collect::<Vec<_>>());
        for (j, win) in windows.iter().enumerate() {
            prop_assert_eq!(win.window_index, j);
            prop_assert_eq!(win.width(), w);
            let last = &win.frames[win.valid - 1];
            prop_assert!(win.frames[win.valid..].iter().all(|f| f == last));
        }
    }

    #[test]
    fn window_concat_places_frame_k_in_block_k(w in 1usize..6, seed in any::<u64>()) {
        let seq = random_frames::<f64>(&mut rng(seed), w, 4, 3);
        let cat = partition_windows(&seq, w).unwrap()[0].concat().unwrap();
        prop_assert_eq!(cat.dims(), &[4, 3 * w]);
        for (k, f) in seq.iter().enumerate() {
            for r in 0..4 {
                let row = &cat.data()[r * 3 * w + 3 * k..r * 3 * w + 3 * k + 3];
                prop_assert_eq!(row, &f.z.data()[r * 3..r * 3 + 3]);
            }
        }
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), rps in 0.0f64..4.0) {
        let a = generate_rotating_dot(seed, rps, Direction::Cw, 0.5, 16, 16).unwrap();
        let b = generate_rotating_dot(seed, rps, Direction::Cw, 0.5, 16, 16).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.frames.iter().all(|f| f.pixels.iter().all(|p| (0.0..=1.0).contains(p))));
    }
}

#[test]
fn zero_frame_encodes_to_zero() {
    let enc = EncoderStub::<f32>::new(DEFAULT_ENCODER_SEED, 32, 4, 24).unwrap();
    let v = generate_rotating_dot(0, 0.0, Direction::Ccw, 0.0625, 16, 32).unwrap();
    let mut blank = v.clone();
    blank.frames[0].pixels.fill(0.0);
    let f = encode_video(&blank, &enc, 16, DEFAULT_FRAME_CAP).unwrap();
    assert_eq!(f[0].z, Tensor::zeros(vec![16, 24]));
}
