//! plumewatch: a self-hostable community air-quality monitoring service.
//!
//! The crate is organised by capability:
//!
//! * [`timelapse`]: camera-day datasets and zoomable tile pyramids
//! * [`thumbnail`]: sharable animated crops and their canonical URLs
//! * [`smoke`]: smoke-pixel counting and smoke event segmentation
//! * [`telemetry`]: PM2.5 readings, wind and smell reports
//! * [`usage`]: image-usage analytics mined from access logs
//! * [`survey`]: paired Likert scoring and Wilcoxon signed-rank tests
//! * [`gateway`]: the HTTP service and the `plumewatch` command line
//!
//! [`synth`] generates the synthetic scenes used by the examples and tests.

pub mod error;
pub mod gateway;
pub mod smoke;
pub mod store;
pub mod survey;
pub mod synth;
pub mod telemetry;
pub mod thumbnail;
pub mod timelapse;
pub mod usage;

pub use error::{Error, Result};
pub use store::DataRoot;
