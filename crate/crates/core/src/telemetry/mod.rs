//! PM2.5 readings, wind and smell reports, with the time-aligned queries
//! behind the dashboard charts and map.

mod import;
mod store;
mod types;

pub use import::{parse_time, read_readings_csv, read_stations_csv, read_wind_csv};
pub use store::{TelemetryStore, SMELL_WINDOW, WIND_WINDOW};
pub use types::{
    validate_severity, ContextSnapshot, SensorReading, SeriesBucket, SmellReport, Station,
    StationSeries, StationSnapshot, WindReading, CITIZEN_CADENCE_S, GOVERNMENT_CADENCE_S,
    MAX_SEVERITY, MIN_SEVERITY,
};
