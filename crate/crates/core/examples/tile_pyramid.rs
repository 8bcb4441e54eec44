//! Ingest a short synthetic timelapse, tile it and read a tile clip back.

use chrono::{TimeZone, Utc};
use plumewatch::synth::{gradient_frame, write_png_frames};
use plumewatch::timelapse::{build_pyramid_with, ingest_frames, DatasetId, TileAddress, TileStore};
use plumewatch::DataRoot;

fn main() -> plumewatch::Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let src = tmp.path().join("incoming");
    let t0 = Utc.with_ymd_and_hms(2015, 8, 3, 6, 0, 0).unwrap();
    write_png_frames(&src, t0, 5, (0..24).map(|k| gradient_frame(640, 360, k)))?;

    let root = DataRoot::create(tmp.path().join("data"))?;
    let id = DatasetId::new("demo-2015-08-03")?;
    let dataset = ingest_frames(&root, &id, &src)?;
    println!("{}: {} frames of {}x{}", dataset.id, dataset.frame_count(), dataset.frame_width, dataset.frame_height);

    let pyramid = build_pyramid_with(&root, &id, 256, 10)?;
    let g = pyramid.geometry();
    for level in 0..g.num_levels {
        let (w, h) = g.level_dims(level);
        let (cols, rows) = g.grid(level);
        println!("level {level}: {w}x{h}, {cols}x{rows} tiles");
    }

    let store = TileStore::open_dataset(&root, &id)?;
    let clip = store.get_tile(TileAddress { level: g.num_levels - 1, row: 0, col: 1, frame_start: 8, frame_count: 12 })?;
    println!("tile clip: {} frames, {} bytes on the wire", clip.frames.len(), clip.to_bytes().len());
    Ok(())
}
