//! Timelapse datasets and their multi-resolution tile pyramids.
//!
//! A [`Dataset`] is one camera day: frames at a fixed capture interval, all
//! the same size, named after their UTC capture time. [`build_pyramid`]
//! turns it into power-of-two tile levels that a zoomable viewer streams
//! through [`TileStore::get_tile`].

mod dataset;
mod frames;
mod pyramid;
mod segment;

pub use dataset::{
    frame_filename, ingest_frames, parse_frame_filename, Dataset, DatasetId, FrameMeta,
    MissingFrames,
};
pub use frames::{DirFrames, FrameSource};
pub use pyramid::{
    build_pyramid, build_pyramid_from, build_pyramid_with, halve, PyramidGeometry, TileAddress,
    TilePyramid, TileStore,
};
pub use segment::TileClip;

pub const DEFAULT_CAPTURE_INTERVAL_S: u32 = 5;
pub const DEFAULT_TILE_SIZE: u32 = 512;
/// Frames per tile segment file. Not tied to any upstream container format.
pub const DEFAULT_SEGMENT_FRAMES: u32 = 1000;
