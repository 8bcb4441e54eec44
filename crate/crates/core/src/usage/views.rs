use std::collections::HashMap;
use std::net::IpAddr;

use chrono::{DateTime, NaiveDate, Utc};
use chrono_tz::Tz;
use ipnet::IpNet;
use serde::{Deserialize, Serialize};

use crate::thumbnail::{Origin, ThumbnailSpec};
use crate::timelapse::DatasetId;

use super::AccessLogEntry;

/// One successful thumbnail view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageView {
    /// Canonical thumbnail URL; identical images share a key.
    pub image_key: String,
    pub origin: Origin,
    pub dataset_id: DatasetId,
    pub dataset_date: NaiveDate,
    pub view_date: NaiveDate,
    /// Whole calendar days from capture to view, never negative.
    pub d: i64,
    pub ip: IpAddr,
}

/// One successful use of the thumbnail tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreationEvent {
    pub ip: IpAddr,
    pub time: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationStats {
    pub candidate_views: u64,
    pub excluded_ip: u64,
    pub undecodable_url: u64,
    pub unknown_dataset: u64,
    /// Views dated before their dataset; dropped as a data-integrity problem.
    pub negative_d: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub views: Vec<ImageView>,
    pub creations: Vec<CreationEvent>,
    pub stats: DerivationStats,
}

pub fn is_excluded(ip: &IpAddr, exclusions: &[IpNet]) -> bool {
    exclusions.iter().any(|net| net.contains(ip))
}

/// Turn log entries into views and creation events.
///
/// Requests from `exclusions` are dropped. View dates are calendar dates in
/// `tz`; dataset dates come from `capture_dates`.
pub fn derive_views(
    entries: &[AccessLogEntry],
    exclusions: &[IpNet],
    capture_dates: &HashMap<DatasetId, NaiveDate>,
    tz: Tz,
) -> Derivation {
    let mut out = Derivation::default();
    for e in entries {
        if e.is_thumbnail_creation() {
            if !is_excluded(&e.ip, exclusions) {
                out.creations.push(CreationEvent {
                    ip: e.ip,
                    time: e.request_time.with_timezone(&Utc),
                });
            }
            continue;
        }
        if !e.is_thumbnail_view() {
            continue;
        }
        out.stats.candidate_views += 1;
        if is_excluded(&e.ip, exclusions) {
            out.stats.excluded_ip += 1;
            continue;
        }
        let Ok(spec) = ThumbnailSpec::decode_url(&e.path_and_query) else {
            out.stats.undecodable_url += 1;
            continue;
        };
        let Some(&dataset_date) = capture_dates.get(&spec.dataset_id) else {
            out.stats.unknown_dataset += 1;
            continue;
        };
        let view_date = e.request_time.with_timezone(&tz).date_naive();
        let d = (view_date - dataset_date).num_days();
        if d < 0 {
            log::warn!(
                "view of {} on {view_date} predates its dataset ({dataset_date})",
                spec.dataset_id
            );
            out.stats.negative_d += 1;
            continue;
        }
        out.views.push(ImageView {
            image_key: spec.encode_url(),
            origin: spec.origin,
            dataset_id: spec.dataset_id,
            dataset_date,
            view_date,
            d,
            ip: e.ip,
        });
    }
    out
}
