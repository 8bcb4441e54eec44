//! Start the HTTP service on a synthetic data root and call a few routes.

use std::net::SocketAddr;

use chrono::{TimeZone, Utc};
use plumewatch::gateway::{spawn, Service, ServiceConfig};
use plumewatch::smoke::{run_detection, SmokeParams};
use plumewatch::synth::{write_png_frames, BlobScene};
use plumewatch::timelapse::{build_pyramid, ingest_frames, DatasetId};
use plumewatch::DataRoot;

fn main() -> plumewatch::Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = DataRoot::create(tmp.path().join("data"))?;
    let id = DatasetId::new("plume")?;
    let t0 = Utc.with_ymd_and_hms(2015, 8, 3, 9, 0, 0).unwrap();
    write_png_frames(&tmp.path().join("f"), t0, 5, BlobScene::new(40, 40, 30, 1).frames())?;
    ingest_frames(&root, &id, &tmp.path().join("f"))?;
    build_pyramid(&root, &id, 256)?;
    run_detection(&root, &id, &SmokeParams::default())?;

    let config = ServiceConfig {
        listen: SocketAddr::from(([127, 0, 0, 1], 0)),
        data_root: root.path().to_owned(),
        ..ServiceConfig::default()
    };
    let svc = spawn(Service::new(&config)?, config.listen)?;
    let http = reqwest::blocking::Client::new();
    for path in ["/api/datasets", "/api/smoke/plume", "/api/datasets/plume/frame?t=2015-08-03T09:03:00Z"] {
        let body = http.get(svc.url(path)).send().and_then(|r| r.text()).expect("request");
        println!("GET {path}\n  {}", &body[..body.len().min(300)]);
    }
    svc.stop().expect("clean shutdown");
    print!("{}", std::fs::read_to_string(config.access_log_path()).expect("access log"));
    Ok(())
}
