use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

use super::types::*;

pub const WIND_WINDOW: Duration = Duration::minutes(15);
pub const SMELL_WINDOW: Duration = Duration::minutes(30);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
enum Record {
    Station(Station),
    Readings(Vec<SensorReading>),
    Wind(Vec<WindReading>),
    Smell(SmellReport),
}

#[derive(Debug, Default)]
struct State {
    /// Registration order decides display order.
    stations: Vec<Station>,
    station_index: HashMap<String, usize>,
    readings: HashMap<String, BTreeMap<DateTime<Utc>, f64>>,
    wind: BTreeMap<DateTime<Utc>, WindReading>,
    smell: BTreeMap<(DateTime<Utc>, u64), SmellReport>,
    next_smell_id: u64,
}

impl State {
    fn apply(&mut self, record: Record) {
        match record {
            Record::Station(s) => match self.station_index.get(&s.station_id) {
                Some(&i) => self.stations[i] = s,
                None => {
                    self.station_index.insert(s.station_id.clone(), self.stations.len());
                    self.readings.entry(s.station_id.clone()).or_default();
                    self.stations.push(s);
                }
            },
            Record::Readings(batch) => {
                for r in batch {
                    self.readings.entry(r.station_id).or_default().insert(r.t, r.pm25);
                }
            }
            Record::Wind(batch) => {
                for w in batch {
                    self.wind.insert(w.t, w);
                }
            }
            Record::Smell(report) => {
                self.next_smell_id = self.next_smell_id.max(report.report_id + 1);
                self.smell.insert((report.t, report.report_id), report);
            }
        }
    }

    fn require_station(&self, id: &str) -> Result<&Station> {
        self.station_index
            .get(id)
            .map(|&i| &self.stations[i])
            .ok_or_else(|| Error::NotFound(format!("station {id}")))
    }
}

/// PM2.5, wind and smell-report storage.
///
/// Writes are appended to a JSON-lines journal and synced before they are
/// acknowledged; opening a store replays its journal. Queries run under a
/// read lock and so see one consistent state.
#[derive(Debug)]
pub struct TelemetryStore {
    state: RwLock<State>,
    journal: Option<Mutex<(PathBuf, File)>>,
}

impl Default for TelemetryStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl TelemetryStore {
    pub fn in_memory() -> Self {
        Self {
            state: RwLock::new(State {
                next_smell_id: 1,
                ..State::default()
            }),
            journal: None,
        }
    }

    /// Open (or create) a journal-backed store.
    pub fn open(journal: impl AsRef<Path>) -> Result<Self> {
        let path = journal.as_ref().to_owned();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).at(parent)?;
        }
        let mut state = State {
            next_smell_id: 1,
            ..State::default()
        };
        if path.exists() {
            // A final line without its newline is a torn append that was never
            // acknowledged; cut it off so new records start on a fresh line.
            let bytes = fs::read(&path).at(&path)?;
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            if keep < bytes.len() {
                log::warn!("dropping torn journal tail in {}", path.display());
                let f = OpenOptions::new().write(true).open(&path).at(&path)?;
                f.set_len(keep as u64).at(&path)?;
            }
            let lines: Vec<String> = BufReader::new(&bytes[..keep]).lines().collect::<std::io::Result<_>>().at(&path)?;
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Record>(line) {
                    Ok(rec) => state.apply(rec),
                    Err(e) => {
                        return Err(Error::invalid(
                            format!("{} line {}", path.display(), i + 1),
                            e.to_string(),
                        ))
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).at(&path)?;
        Ok(Self {
            state: RwLock::new(state),
            journal: Some(Mutex::new((path, file))),
        })
    }

    fn commit(&self, state: &mut State, record: Record) -> Result<()> {
        if let Some(journal) = &self.journal {
            let mut line = serde_json::to_vec(&record).map_err(|e| Error::Encode(e.to_string()))?;
            line.push(b'\n');
            let mut guard = journal.lock().unwrap_or_else(|e| e.into_inner());
            let (path, file) = &mut *guard;
            file.write_all(&line).at(&*path)?;
            file.sync_data().at(&*path)?;
        }
        state.apply(record);
        Ok(())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Add or update a station.
    pub fn register_station(&self, station: Station) -> Result<()> {
        station.validate()?;
        let mut state = self.write();
        self.commit(&mut state, Record::Station(station))
    }

    pub fn stations(&self) -> Vec<Station> {
        self.read().stations.clone()
    }

    /// Store one reading; a reading with the same station and time replaces
    /// the earlier one.
    pub fn ingest_reading(&self, reading: SensorReading) -> Result<()> {
        self.ingest_readings(vec![reading]).map(|_| ())
    }

    /// Store a batch atomically: either every reading validates and is
    /// stored, or none is.
    pub fn ingest_readings(&self, batch: Vec<SensorReading>) -> Result<usize> {
        let mut state = self.write();
        for r in &batch {
            state.require_station(&r.station_id)?;
            r.validate()?;
        }
        let n = batch.len();
        if n > 0 {
            self.commit(&mut state, Record::Readings(batch))?;
        }
        Ok(n)
    }

    pub fn ingest_wind(&self, reading: WindReading) -> Result<()> {
        self.ingest_wind_batch(vec![reading]).map(|_| ())
    }

    pub fn ingest_wind_batch(&self, batch: Vec<WindReading>) -> Result<usize> {
        for w in &batch {
            w.validate()?;
        }
        let n = batch.len();
        if n > 0 {
            let mut state = self.write();
            self.commit(&mut state, Record::Wind(batch))?;
        }
        Ok(n)
    }

    pub fn submit_smell_report(
        &self,
        severity: i64,
        t: DateTime<Utc>,
        note: Option<String>,
        reporter_token: Option<String>,
    ) -> Result<SmellReport> {
        let severity = validate_severity(severity)?;
        let mut state = self.write();
        let report = SmellReport {
            report_id: state.next_smell_id,
            t,
            severity,
            note,
            reporter_token,
        };
        self.commit(&mut state, Record::Smell(report.clone()))?;
        Ok(report)
    }

    pub fn reading(&self, station_id: &str, t: DateTime<Utc>) -> Option<f64> {
        self.read().readings.get(station_id)?.get(&t).copied()
    }

    pub fn smell_reports(&self) -> Vec<SmellReport> {
        self.read().smell.values().cloned().collect()
    }

    /// Bucketed means over `[t0, t1)`, bucket `k` covering
    /// `[t0 + k·bucket, t0 + (k+1)·bucket)`. Empty buckets are kept.
    pub fn query_series(
        &self,
        station_ids: &[String],
        t0: DateTime<Utc>,
        t1: DateTime<Utc>,
        bucket_s: i64,
    ) -> Result<Vec<StationSeries>> {
        if t0 >= t1 {
            return Err(Error::invalid("t0", "must be before t1"));
        }
        if bucket_s < 1 {
            return Err(Error::invalid("bucket", "must be at least 1 second"));
        }
        let span_ms = (t1 - t0).num_milliseconds();
        let bucket_ms = bucket_s * 1000;
        let n_buckets = span_ms.div_euclid(bucket_ms) + i64::from(span_ms % bucket_ms != 0);
        if n_buckets > 1_000_000 {
            return Err(Error::invalid("bucket", "range would produce more than 1e6 buckets"));
        }
        let state = self.read();
        station_ids
            .iter()
            .map(|id| {
                state.require_station(id)?;
                let mut sums = vec![(0.0f64, 0u64); n_buckets as usize];
                if let Some(series) = state.readings.get(id) {
                    for (t, v) in series.range(t0..t1) {
                        let k = ((*t - t0).num_milliseconds() / bucket_ms) as usize;
                        sums[k].0 += v;
                        sums[k].1 += 1;
                    }
                }
                let buckets = sums
                    .into_iter()
                    .enumerate()
                    .map(|(k, (sum, n))| SeriesBucket {
                        bucket_start: t0 + Duration::seconds(k as i64 * bucket_s),
                        mean: (n > 0).then(|| sum / n as f64),
                        sample_count: n,
                    })
                    .collect();
                Ok(StationSeries {
                    station_id: id.clone(),
                    buckets,
                })
            })
            .collect()
    }

    /// Wind nearest to `t` (within 15 min, ties to the earlier reading),
    /// smell reports within 30 min, and each station's latest reading no
    /// older than two cadences.
    pub fn query_context(&self, t: DateTime<Utc>) -> ContextSnapshot {
        let state = self.read();
        let before = state.wind.range(t - WIND_WINDOW..=t).next_back().map(|(_, w)| w);
        let after = state.wind.range(t..=t + WIND_WINDOW).next().map(|(_, w)| w);
        let wind = match (before, after) {
            (Some(b), Some(a)) => Some(if a.t - t < t - b.t { a } else { b }),
            (b, a) => b.or(a),
        }
        .cloned();

        let smell_reports = state
            .smell
            .range((t - SMELL_WINDOW, 0)..=(t + SMELL_WINDOW, u64::MAX))
            .map(|(_, r)| r.clone())
            .collect();

        let stations = state
            .stations
            .iter()
            .map(|s| {
                let max_age = Duration::seconds(2 * i64::from(s.cadence));
                let latest = state
                    .readings
                    .get(&s.station_id)
                    .and_then(|series| series.range(..=t).next_back())
                    .filter(|(rt, _)| t - **rt <= max_age)
                    .map(|(rt, v)| SensorReading {
                        station_id: s.station_id.clone(),
                        t: *rt,
                        pm25: *v,
                    });
                StationSnapshot {
                    station: s.clone(),
                    latest,
                }
            })
            .collect();

        ContextSnapshot {
            t,
            wind,
            smell_reports,
            stations,
        }
    }

    /// Number of stored readings for a station in `[t0, t1)`.
    pub fn count_readings(&self, station_id: &str, t0: DateTime<Utc>, t1: DateTime<Utc>) -> usize {
        self.read()
            .readings
            .get(station_id)
            .map(|s| s.range(t0..t1).count())
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2015, 8, 3, h, m, 0).unwrap()
    }

    fn station(id: &str, cadence: u32) -> Station {
        Station {
            station_id: id.into(),
            display_name: id.to_uppercase(),
            latitude: 40.3,
            longitude: -79.9,
            cadence,
        }
    }

    fn reading(id: &str, t: DateTime<Utc>, pm25: f64) -> SensorReading {
        SensorReading {
            station_id: id.into(),
            t,
            pm25,
        }
    }

    #[test]
    fn last_write_wins_and_validation() {
        let s = TelemetryStore::in_memory();
        s.register_station(station("s1", 60)).unwrap();
        s.ingest_reading(reading("s1", at(12, 0), 35.2)).unwrap();
        assert_eq!(s.reading("s1", at(12, 0)), Some(35.2));
        s.ingest_reading(reading("s1", at(12, 0), 36.0)).unwrap();
        assert_eq!(s.reading("s1", at(12, 0)), Some(36.0));
        assert!(matches!(s.ingest_reading(reading("s1", at(12, 1), -1.0)), Err(Error::Invalid { .. })));
        assert!(matches!(s.ingest_reading(reading("s1", at(12, 1), f64::NAN)), Err(Error::Invalid { .. })));
        assert!(matches!(s.ingest_reading(reading("zz", at(12, 1), 1.0)), Err(Error::NotFound(_))));
        // A bad reading rejects the whole batch.
        assert!(s.ingest_readings(vec![reading("s1", at(13, 0), 1.0), reading("s1", at(13, 1), -2.0)]).is_err());
        assert_eq!(s.reading("s1", at(13, 0)), None);
    }

    #[test]
    fn station_validation() {
        let s = TelemetryStore::in_memory();
        let mut bad = station("s", 60);
        bad.latitude = 91.0;
        assert!(s.register_station(bad).is_err());
        let mut bad = station("s", 60);
        bad.longitude = -180.5;
        assert!(s.register_station(bad).is_err());
        assert!(s.register_station(station("s", 0)).is_err());
    }

    #[test]
    fn smell_severity_bounds() {
        let s = TelemetryStore::in_memory();
        let r = s.submit_smell_report(5, at(12, 0), None, None).unwrap();
        assert_eq!(r.severity, 5);
        assert!(s.submit_smell_report(6, at(12, 0), None, None).is_err());
        assert!(s.submit_smell_report(0, at(12, 0), None, None).is_err());
        let note = "  rotten eggs,\n sulfur  ".to_string();
        let r2 = s.submit_smell_report(3, at(12, 1), Some(note.clone()), None).unwrap();
        assert_eq!(r2.note.as_deref(), Some(note.as_str()));
        assert_ne!(r.report_id, r2.report_id);
    }

    #[test]
    fn series_buckets() {
        let s = TelemetryStore::in_memory();
        s.register_station(station("s1", 60)).unwrap();
        for (m, v) in [(0, 10.0), (1, 20.0), (2, 30.0)] {
            s.ingest_reading(reading("s1", at(12, m), v)).unwrap();
        }
        let out = s.query_series(&["s1".into()], at(12, 0), at(13, 0), 3600).unwrap();
        assert_eq!(out[0].buckets.len(), 1);
        assert_eq!(out[0].buckets[0].mean, Some(20.0));
        assert_eq!(out[0].buckets[0].sample_count, 3);

        let empty = s.query_series(&["s1".into()], at(14, 0), at(15, 0), 600).unwrap();
        assert_eq!(empty[0].buckets.len(), 6);
        assert!(empty[0].buckets.iter().all(|b| b.mean.is_none() && b.sample_count == 0));
        assert_eq!(empty[0].buckets[1].bucket_start, at(14, 10));

        assert!(s.query_series(&["nope".into()], at(12, 0), at(13, 0), 60).is_err());
        assert!(s.query_series(&["s1".into()], at(13, 0), at(12, 0), 60).is_err());
        assert!(s.query_series(&["s1".into()], at(12, 0), at(13, 0), 0).is_err());
    }

    #[test]
    fn context_selection() {
        let s = TelemetryStore::in_memory();
        let wind = |t, d| WindReading { t, speed: 3.0, direction: d };
        s.ingest_wind(wind(at(12, 0), 10.0)).unwrap();
        s.ingest_wind(wind(at(12, 10), 20.0)).unwrap();
        assert_eq!(s.query_context(at(12, 4)).wind.unwrap().t, at(12, 0));
        assert_eq!(s.query_context(at(12, 6)).wind.unwrap().t, at(12, 10));
        assert_eq!(s.query_context(at(12, 5)).wind.unwrap().t, at(12, 0));
        assert!(s.query_context(at(12, 26)).wind.is_none());
        assert!(s.query_context(at(11, 44)).wind.is_none());
        assert_eq!(s.query_context(at(11, 45)).wind.unwrap().t, at(12, 0));
        assert!(s.ingest_wind(wind(at(13, 0), 360.0)).is_err());

        s.submit_smell_report(4, at(12, 30), None, None).unwrap();
        assert_eq!(s.query_context(at(12, 0)).smell_reports.len(), 1);
        assert_eq!(s.query_context(at(11, 59)).smell_reports.len(), 0);

        s.register_station(station("cit", 60)).unwrap();
        s.register_station(station("gov", 3600)).unwrap();
        s.ingest_reading(reading("cit", at(12, 0), 5.0)).unwrap();
        s.ingest_reading(reading("gov", at(11, 0), 9.0)).unwrap();
        let ctx = s.query_context(at(12, 2));
        assert_eq!(ctx.stations[0].latest.as_ref().unwrap().pm25, 5.0);
        assert_eq!(ctx.stations[1].latest.as_ref().unwrap().pm25, 9.0);
        let ctx = s.query_context(at(12, 3));
        assert!(ctx.stations[0].latest.is_none());
    }

    #[test]
    fn journal_replays_after_restart() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t").join("journal.jsonl");
        {
            let s = TelemetryStore::open(&path).unwrap();
            s.register_station(station("s1", 60)).unwrap();
            s.ingest_reading(reading("s1", at(12, 0), 1.5)).unwrap();
            s.ingest_reading(reading("s1", at(12, 0), 2.5)).unwrap();
            s.ingest_wind(WindReading { t: at(12, 0), speed: 1.0, direction: 90.0 }).unwrap();
            s.submit_smell_report(2, at(12, 0), Some("x".into()), None).unwrap();
        }
        // Simulate a crash mid-append.
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"kind\":\"readi").unwrap();
        drop(f);
        let s = TelemetryStore::open(&path).unwrap();
        assert_eq!(s.reading("s1", at(12, 0)), Some(2.5));
        assert_eq!(s.stations().len(), 1);
        assert!(s.query_context(at(12, 0)).wind.is_some());
        let r = s.submit_smell_report(1, at(12, 1), None, None).unwrap();
        assert_eq!(r.report_id, 2);
    }
}
