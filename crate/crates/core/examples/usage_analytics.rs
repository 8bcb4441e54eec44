//! Analyze a small access log: summary, D histogram and user correlations.

use std::collections::HashMap;

use chrono::NaiveDate;
use plumewatch::thumbnail::{Bounds, Origin, OutputFormat, ThumbnailSpec};
use plumewatch::timelapse::DatasetId;
use plumewatch::usage::{analyze_lines, parse_cidrs, parse_tz, AnalysisConfig};

fn main() -> plumewatch::Result<()> {
    let spec = |origin| ThumbnailSpec {
        dataset_id: DatasetId::new("cam1").unwrap(),
        bounds: Bounds::new(0, 0, 400, 300),
        out_width: 200,
        out_height: 150,
        start_frame: 10,
        nframes: 20,
        fps: 10,
        format: OutputFormat::Gif,
        origin,
    };
    let hg = spec(Origin::Human).encode_url();
    let ag = spec(Origin::Algorithm).encode_url();
    let lines = [
        r#"10.0.0.1 - - [03/Aug/2015:15:00:00 +0000] "POST /api/thumbnail HTTP/1.1" 201 40 "-" "-""#.to_owned(),
        format!(r#"10.0.0.1 - - [03/Aug/2015:15:01:00 +0000] "GET {hg} HTTP/1.1" 200 9000 "-" "-""#),
        format!(r#"10.0.0.2 - - [05/Aug/2015:02:00:00 +0000] "GET {hg} HTTP/1.1" 200 9000 "-" "-""#),
        format!(r#"10.0.0.2 - - [06/Aug/2015:12:00:00 +0000] "GET {ag} HTTP/1.1" 200 9000 "-" "-""#),
        format!(r#"128.2.1.1 - - [06/Aug/2015:12:00:00 +0000] "GET {ag} HTTP/1.1" 200 9000 "-" "-""#),
    ];
    let dates = HashMap::from([(DatasetId::new("cam1")?, NaiveDate::from_ymd_opt(2015, 8, 3).unwrap())]);
    let config = AnalysisConfig { exclusions: parse_cidrs("128.2.0.0/16")?, tz: parse_tz("America/New_York")? };
    let report = analyze_lines(&lines, &dates, &config);
    println!("{:#?}", report.summary);
    for (d, n) in &report.histograms[0].d {
        println!("D = {d}: {n} views");
    }
    if let Some(m) = &report.correlation {
        println!("r(n_viewed_hg, n_viewed_ag) = {:?}", m.get(1, 3));
    }
    Ok(())
}
