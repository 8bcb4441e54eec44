use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CITIZEN_CADENCE_S: u32 = 60;
pub const GOVERNMENT_CADENCE_S: u32 = 3600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub station_id: String,
    pub display_name: String,
    pub latitude: f64,
    pub longitude: f64,
    /// Expected seconds between readings.
    pub cadence: u32,
}

impl Station {
    pub fn validate(&self) -> Result<()> {
        if self.station_id.is_empty() || self.station_id.contains(',') {
            return Err(Error::invalid("station_id", "must be non-empty without commas"));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::invalid("latitude", format!("{} outside [-90, 90]", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::invalid("longitude", format!("{} outside [-180, 180]", self.longitude)));
        }
        if self.cadence == 0 {
            return Err(Error::invalid("cadence", "must be positive"));
        }
        Ok(())
    }
}

/// One PM2.5 measurement in µg/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub station_id: String,
    pub t: DateTime<Utc>,
    pub pm25: f64,
}

impl SensorReading {
    pub fn validate(&self) -> Result<()> {
        if !self.pm25.is_finite() || self.pm25 < 0.0 {
            return Err(Error::invalid("pm25", format!("{} is not a finite non-negative value", self.pm25)));
        }
        Ok(())
    }
}

/// Wind at one instant. `direction` is where the wind blows FROM, in
/// degrees clockwise from north.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindReading {
    pub t: DateTime<Utc>,
    pub speed: f64,
    pub direction: f64,
}

impl WindReading {
    pub fn validate(&self) -> Result<()> {
        if !self.speed.is_finite() || self.speed < 0.0 {
            return Err(Error::invalid("speed", format!("{} is not a finite non-negative value", self.speed)));
        }
        if !(0.0..360.0).contains(&self.direction) {
            return Err(Error::invalid("direction", format!("{} outside [0, 360)", self.direction)));
        }
        Ok(())
    }
}

pub const MIN_SEVERITY: u8 = 1;
pub const MAX_SEVERITY: u8 = 5;

/// Crowdsourced odour report; severity 1 (barely noticeable) to 5 (worst).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmellReport {
    pub report_id: u64,
    pub t: DateTime<Utc>,
    pub severity: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reporter_token: Option<String>,
}

pub fn validate_severity(severity: i64) -> Result<u8> {
    if (i64::from(MIN_SEVERITY)..=i64::from(MAX_SEVERITY)).contains(&severity) {
        Ok(severity as u8)
    } else {
        Err(Error::invalid("severity", format!("{severity} outside 1..5")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBucket {
    pub bucket_start: DateTime<Utc>,
    /// Absent for empty buckets.
    pub mean: Option<f64>,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSeries {
    pub station_id: String,
    pub buckets: Vec<SeriesBucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSnapshot {
    pub station: Station,
    /// Latest reading at or before the query time, if recent enough.
    pub latest: Option<SensorReading>,
}

/// Everything the map shows at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub t: DateTime<Utc>,
    pub wind: Option<WindReading>,
    pub smell_reports: Vec<SmellReport>,
    pub stations: Vec<StationSnapshot>,
}
