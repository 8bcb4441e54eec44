//! Detect a drifting plume in a synthetic scene and list the events.

use plumewatch::smoke::{detect_frames, segment_events, SmokeParams};
use plumewatch::synth::BlobScene;
use plumewatch::timelapse::{frame_filename, Dataset, DatasetId};

fn main() -> plumewatch::Result<()> {
    let scene = BlobScene::new(40, 40, 60, 7);
    let frames = scene.frames();
    let params = SmokeParams::default();
    let results = detect_frames(&frames, &params)?;
    for r in results.iter().step_by(10) {
        println!("frame {:3}: {:5} smoke px (truth {})", r.frame_index, r.smoke_pixel_count, scene.truth(r.frame_index));
    }

    let t0 = chrono::DateTime::parse_from_rfc3339("2015-08-03T09:00:00Z").unwrap().to_utc();
    let times = (0..frames.len())
        .map(|k| {
            let t = t0 + chrono::Duration::seconds(5 * k as i64);
            (t, frame_filename(t, "png"))
        })
        .collect();
    let dataset = Dataset::from_timestamps(DatasetId::new("plume")?, scene.width, scene.height, times)?;
    for e in segment_events(&results, &dataset, &params) {
        println!("event frames {}..={} peak {}: {}", e.start_frame, e.end_frame, e.peak_count, e.thumbnail.encode_url());
    }
    Ok(())
}
