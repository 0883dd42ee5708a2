use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::io::NamedArchive;
use crate::numerics::Tensor;

use super::FrameFeatures;

pub fn features_to_archive(seq: &[FrameFeatures<f32>]) -> Result<NamedArchive> {
    if seq.is_empty() {
        return Err(Error::format("refusing to write an empty feature sequence"));
    }
    let mut archive = NamedArchive::new();
    for (k, f) in seq.iter().enumerate() {
        archive.insert(format!("frame/{k}/z"), f.z.clone());
        let meta = Tensor::new(vec![2], vec![f.frame_index as f32, f.timestamp_s])?;
        archive.insert(format!("frame/{k}/meta"), meta);
    }
    Ok(archive)
}

pub fn features_from_archive(archive: &NamedArchive) -> Result<Vec<FrameFeatures<f32>>> {
    let mut seq = Vec::new();
    while let Some(z) = archive.get(&format!("frame/{}/z", seq.len())) {
        let k = seq.len();
        let meta = archive.require(&format!("frame/{k}/meta"))?;
        if meta.dims() != [2] {
            return Err(Error::format(format!("frame {k} meta must hold 2 values")));
        }
        if z.rank() != 2 {
            return Err(Error::format(format!(
                "frame {k} features must be a matrix"
            )));
        }
        seq.push(FrameFeatures {
            z: z.clone(),
            frame_index: meta.data()[0] as usize,
            timestamp_s: meta.data()[1],
        });
    }
    if seq.is_empty() {
        return Err(Error::format("archive holds no frame features"));
    }
    Ok(seq)
}

pub fn write_features(path: impl AsRef<Path>, seq: &[FrameFeatures<f32>]) -> Result<()> {
    features_to_archive(seq)?.save(path)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FrameFeatures<f32>>> {
    features_from_archive(&NamedArchive::load(path)?)
}
