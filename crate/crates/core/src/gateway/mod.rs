//! The HTTP service and the `plumewatch` command line.

mod access;
pub mod cli;
mod config;
mod server;

pub use access::AccessLogWriter;
pub use config::{ServiceConfig, CONFIG_ENV};
pub use server::{
    run_until_interrupted, spawn, system_clock, Clock, DatasetSummary, RunningService, Service,
};
