use std::path::PathBuf;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::store::DataRoot;

use super::Dataset;

/// Random access to the decoded frames of a dataset.
pub trait FrameSource: Sync {
    fn frame_count(&self) -> usize;
    fn load_frame(&self, index: usize) -> Result<RgbImage>;
}

impl FrameSource for [RgbImage] {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn load_frame(&self, index: usize) -> Result<RgbImage> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("frame {index}")))
    }
}

impl FrameSource for Vec<RgbImage> {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn load_frame(&self, index: usize) -> Result<RgbImage> {
        self.as_slice().load_frame(index)
    }
}

/// Frames of an ingested dataset, decoded from its frames directory on demand.
#[derive(Debug, Clone)]
pub struct DirFrames {
    dir: PathBuf,
    files: Vec<String>,
    width: u32,
    height: u32,
}

impl DirFrames {
    pub fn new(root: &DataRoot, dataset: &Dataset) -> Self {
        Self {
            dir: root.frames_dir(&dataset.id),
            files: dataset.frames.iter().map(|f| f.file.clone()).collect(),
            width: dataset.frame_width,
            height: dataset.frame_height,
        }
    }
}

impl FrameSource for DirFrames {
    fn frame_count(&self) -> usize {
        self.files.len()
    }

    fn load_frame(&self, index: usize) -> Result<RgbImage> {
        let file = self
            .files
            .get(index)
            .ok_or_else(|| Error::NotFound(format!("frame {index}")))?;
        let path = self.dir.join(file);
        let img = image::open(&path)
            .map_err(|e| Error::Image {
                path: path.clone(),
                source: e,
            })?
            .into_rgb8();
        if img.dimensions() != (self.width, self.height) {
            return Err(Error::invalid(
                file.clone(),
                format!(
                    "frame is {}x{}, dataset frames are {}x{}",
                    img.width(),
                    img.height(),
                    self.width,
                    self.height
                ),
            ));
        }
        Ok(img)
    }
}
