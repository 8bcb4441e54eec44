use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use chrono_tz::Tz;
use ipnet::IpNet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::store::write_atomic;
use crate::thumbnail::Origin;
use crate::timelapse::DatasetId;

use super::*;

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub exclusions: Vec<IpNet>,
    pub tz: Tz,
}

pub fn parse_cidrs(list: &str) -> Result<Vec<IpNet>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<IpNet>()
                .or_else(|_| s.parse::<std::net::IpAddr>().map(IpNet::from))
                .map_err(|_| Error::invalid("exclude-cidr", format!("{s:?} is not a CIDR")))
        })
        .collect()
}

pub fn parse_tz(name: &str) -> Result<Tz> {
    name.parse()
        .map_err(|_| Error::invalid("tz", format!("unknown time zone {name:?}")))
}

/// Histograms for one origin filter ("all", "human" or "algorithm").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginHistograms {
    pub filter: String,
    pub d: Histogram,
    pub dataset_date: Histogram,
    pub view_date: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub parse: ParseStats,
    pub derivation: DerivationStats,
    pub summary: UsageSummary,
    /// `None` with fewer than two users.
    pub correlation: Option<CorrelationMatrix>,
    pub histograms: Vec<OriginHistograms>,
    pub users: Vec<UserVector>,
}

/// The whole usage study over already-read log lines.
pub fn analyze_lines<I, S>(
    lines: I,
    capture_dates: &HashMap<DatasetId, NaiveDate>,
    config: &AnalysisConfig,
) -> AnalysisReport
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let (entries, parse) = parse_log(lines);
    let derived = derive_views(&entries, &config.exclusions, capture_dates, config.tz);
    let views = &derived.views;
    let users = user_vectors(views, &derived.creations);
    let histograms = [
        ("all", None),
        ("human", Some(Origin::Human)),
        ("algorithm", Some(Origin::Algorithm)),
    ]
    .into_iter()
    .map(|(name, origin)| OriginHistograms {
        filter: name.to_owned(),
        d: aggregate(views, Axis::D, origin),
        dataset_date: aggregate(views, Axis::DatasetDate, origin),
        view_date: aggregate(views, Axis::ViewDate, origin),
    })
    .collect();
    AnalysisReport {
        parse,
        derivation: derived.stats,
        summary: summarize(views, &derived.creations),
        correlation: correlation_matrix(&users).ok(),
        histograms,
        users,
    }
}

/// Read every file matched by `pattern` (in sorted path order).
pub fn read_log_glob(pattern: &str) -> Result<Vec<String>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::invalid("logs", e.to_string()))?
        .filter_map(std::result::Result::ok)
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid("logs", format!("no files match {pattern:?}")));
    }
    let mut lines = Vec::new();
    for p in paths {
        let f = File::open(&p).at(&p)?;
        for line in BufReader::new(f).lines() {
            lines.push(line.at(&p)?);
        }
    }
    Ok(lines)
}

fn histogram_csv(axis: Axis, h: &Histogram) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{},views", axis.as_str()).expect("in-memory write");
    for (k, n) in h {
        writeln!(out, "{k},{n}").expect("in-memory write");
    }
    out
}

/// Write `summary.json`, `users.csv` and one `<axis>_<filter>.csv` per
/// histogram into `dir`.
pub fn write_report(report: &AnalysisReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    let json = serde_json::json!({
        "parse": report.parse,
        "derivation": report.derivation,
        "summary": report.summary,
        "correlation": report.correlation,
    });
    let bytes = serde_json::to_vec_pretty(&json).map_err(|e| Error::Encode(e.to_string()))?;
    write_atomic(&dir.join("summary.json"), &bytes)?;

    for h in &report.histograms {
        for (axis, hist) in [
            (Axis::D, &h.d),
            (Axis::DatasetDate, &h.dataset_date),
            (Axis::ViewDate, &h.view_date),
        ] {
            let name = format!("{}_{}.csv", axis.as_str(), h.filter);
            write_atomic(&dir.join(name), &histogram_csv(axis, hist))?;
        }
    }

    let mut users = Vec::new();
    writeln!(users, "ip,{}", UserVector::LABELS.join(",")).expect("in-memory write");
    for u in &report.users {
        writeln!(
            users,
            "{},{},{},{},{},{}",
            u.ip, u.n_created_hg, u.n_viewed_hg, u.n_datasets_hg, u.n_viewed_ag, u.n_datasets_ag
        )
        .expect("in-memory write");
    }
    write_atomic(&dir.join("users.csv"), &users)
}
