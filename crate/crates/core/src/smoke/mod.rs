//! Smoke detection on daytime frames.
//!
//! Each frame is compared with a per-pixel temporal median of the frames
//! before it. Pixels that moved away from the background and look like
//! white/gray smoke (low saturation, high value) are grouped into
//! 8-connected components; small components are dropped and the rest are
//! counted. Runs of frames with many smoke pixels become [`SmokeEvent`]s,
//! each carrying an algorithm-origin thumbnail.

mod detect;
mod events;
mod params;

pub use detect::{components, detect_frames, mean_luminance, saturation_value, smoke_mask, SmokeFrameResult};
pub use events::{
    event_runs, list_event_thumbnails, load_report, pad_bounds, run_detection, save_report,
    segment_events, SmokeEvent, SmokeReport, EVENT_THUMBNAIL_FPS, EVENT_THUMBNAIL_MAX_FRAMES,
    EVENT_THUMBNAIL_SIZE,
};
pub use params::SmokeParams;
