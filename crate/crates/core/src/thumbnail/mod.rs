//! Sharable animated thumbnails.
//!
//! A [`ThumbnailSpec`] names a crop box, output size and frame window of a
//! dataset. Its URL form is canonical: every rendered image is addressable,
//! and the access log of those URLs is what usage analytics mines.

mod render;
mod spec;

pub use render::{
    crop_resample, render_frames, render_thumbnail, Animation, MAX_FRAMES, MAX_OUTPUT_EDGE,
};
pub use spec::{Bounds, Origin, OutputFormat, ThumbnailSpec};
