//! Store PM2.5, wind and smell reports, then query a chart and the map.

use chrono::{Duration, TimeZone, Utc};
use plumewatch::telemetry::{SensorReading, Station, TelemetryStore, WindReading, CITIZEN_CADENCE_S};

fn main() -> plumewatch::Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let store = TelemetryStore::open(tmp.path().join("telemetry.jsonl"))?;
    store.register_station(Station {
        station_id: "lincoln".into(),
        display_name: "Lincoln".into(),
        latitude: 40.31,
        longitude: -79.87,
        cadence: CITIZEN_CADENCE_S,
    })?;
    let t0 = Utc.with_ymd_and_hms(2015, 8, 3, 6, 0, 0).unwrap();
    let readings = (0..180)
        .map(|m| SensorReading {
            station_id: "lincoln".into(),
            t: t0 + Duration::minutes(m),
            pm25: 8.0 + (m % 60) as f64 / 4.0,
        })
        .collect();
    println!("stored {} readings", store.ingest_readings(readings)?);
    store.ingest_wind(WindReading { t: t0 + Duration::minutes(65), speed: 2.2, direction: 240.0 })?;
    store.submit_smell_report(4, t0 + Duration::minutes(70), Some("industrial".into()), None)?;

    for s in store.query_series(&["lincoln".into()], t0, t0 + Duration::hours(3), 3600)? {
        for b in s.buckets {
            println!("{} {}: mean {:?} over {}", s.station_id, b.bucket_start, b.mean, b.sample_count);
        }
    }
    let ctx = store.query_context(t0 + Duration::minutes(72));
    println!("wind {:?}, {} smell reports nearby", ctx.wind.map(|w| w.direction), ctx.smell_reports.len());
    Ok(())
}
