#![allow(dead_code)]

use hfr_core::features::FrameFeatures;
use hfr_core::numerics::{Scalar, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor<T: Scalar>(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> Tensor<T> {
    Tensor::from_fn(dims, |_| T::from_f64(rng.gen_range(-1.0..1.0)))
}

pub fn frame<T: Scalar>(z: Tensor<T>, i: usize) -> FrameFeatures<T> {
    FrameFeatures {
        z,
        frame_index: i,
        timestamp_s: i as f32 / 16.0,
    }
}

pub fn random_frames<T: Scalar>(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: usize,
    d: usize,
) -> Vec<FrameFeatures<T>> {
    (0..n)
        .map(|i| frame(random_tensor(rng, vec![p, d]), i))
        .collect()
}

/// Every window of `w` frames repeats one random frame.
pub fn window_constant_frames<T: Scalar>(
    rng: &mut ChaCha8Rng,
    windows: usize,
    w: usize,
    p: usize,
    d: usize,
) -> Vec<FrameFeatures<T>> {
    let mut out = Vec::new();
    for _ in 0..windows {
        let z: Tensor<T> = random_tensor(rng, vec![p, d]);
        for _ in 0..w {
            let i = out.len();
            out.push(frame(z.clone(), i));
        }
    }
    out
}

/// Plain triple loop, no shortcuts.
pub fn naive_affine(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let (n, a) = (x.dims()[0], x.dims()[1]);
    let m = w.dims()[1];
    Tensor::from_fn(vec![n, m], |idx| {
        let (i, j) = (idx / m, idx % m);
        b.data()[j]
            + (0..a)
                .map(|k| x.data()[i * a + k] * w.data()[k * m + j])
                .sum::<f64>()
    })
}

pub fn mean<T: Scalar>(parts: &[Tensor<T>]) -> Tensor<T> {
    let mut acc = Tensor::zeros(parts[0].dims().to_vec());
    for t in parts {
        acc.axpy(T::one(), t).unwrap();
    }
    acc.scale(T::from_f64(1.0 / parts.len() as f64))
}
