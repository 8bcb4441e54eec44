//! Bulk CSV import.
//!
//! * readings: `t_iso,station_id,pm25`
//! * wind: `t_iso,speed_ms,direction_deg`
//! * stations: `station_id,display_name,latitude,longitude,cadence_s`
//!
//! A first row whose leading field is the column name is treated as a header.

use std::io::Read;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};

use super::{SensorReading, Station, WindReading};

fn rows<R: Read>(input: R, header: &str, width: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::invalid(format!("csv line {line}"), e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && rec.get(0) == Some(header) {
            continue;
        }
        if rec.len() != width {
            return Err(Error::invalid(
                format!("csv line {line}"),
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

pub fn parse_time(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| Error::invalid("t_iso", format!("{s:?} is not an RFC 3339 timestamp")))
}

fn field<T: std::str::FromStr>(line: usize, name: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("csv line {line} {name}"), format!("cannot parse {v:?}")))
}

fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Invalid { what, reason } => Error::invalid(format!("csv line {line} {what}"), reason),
        other => other,
    })
}

pub fn read_readings_csv<R: Read>(input: R) -> Result<Vec<SensorReading>> {
    rows(input, "t_iso", 3)?
        .into_iter()
        .map(|(line, f)| {
            let r = SensorReading {
                t: at_line(line, parse_time(&f[0]))?,
                station_id: f[1].clone(),
                pm25: field(line, "pm25", &f[2])?,
            };
            at_line(line, r.validate())?;
            Ok(r)
        })
        .collect()
}

pub fn read_wind_csv<R: Read>(input: R) -> Result<Vec<WindReading>> {
    rows(input, "t_iso", 3)?
        .into_iter()
        .map(|(line, f)| {
            let w = WindReading {
                t: at_line(line, parse_time(&f[0]))?,
                speed: field(line, "speed_ms", &f[1])?,
                direction: field(line, "direction_deg", &f[2])?,
            };
            at_line(line, w.validate())?;
            Ok(w)
        })
        .collect()
}

pub fn read_stations_csv<R: Read>(input: R) -> Result<Vec<Station>> {
    rows(input, "station_id", 5)?
        .into_iter()
        .map(|(line, f)| {
            let s = Station {
                station_id: f[0].clone(),
                display_name: f[1].clone(),
                latitude: field(line, "latitude", &f[2])?,
                longitude: field(line, "longitude", &f[3])?,
                cadence: field(line, "cadence_s", &f[4])?,
            };
            at_line(line, s.validate())?;
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readings_with_and_without_header() {
        let with = "t_iso,station_id,pm25\n2015-08-03T12:00:00Z,s1,35.2\n2015-08-03T08:01:00-04:00,s1,36\n";
        let r = read_readings_csv(with.as_bytes()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].t, parse_time("2015-08-03T12:01:00Z").unwrap());
        let without = "2015-08-03T12:00:00Z,s1,35.2\n";
        assert_eq!(read_readings_csv(without.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "t_iso,station_id,pm25\n2015-08-03T12:00:00Z,s1,-3\n";
        let e = read_readings_csv(bad.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("pm25"), "{e}");
        let bad = "2015-08-03 12:00,1.0,90\n";
        assert!(read_wind_csv(bad.as_bytes()).unwrap_err().to_string().contains("line 1"));
        let bad = "2015-08-03T12:00:00Z,1.0,400\n";
        assert!(read_wind_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn stations() {
        let s = "station_id,display_name,latitude,longitude,cadence_s\ns1,North Braddock,40.40,-79.86,60\n";
        let st = read_stations_csv(s.as_bytes()).unwrap();
        assert_eq!(st[0].display_name, "North Braddock");
        assert_eq!(st[0].cadence, 60);
    }
}
