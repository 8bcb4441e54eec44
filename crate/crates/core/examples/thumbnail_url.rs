//! Build a thumbnail spec, round-trip its URL and render the GIF.

use chrono::{TimeZone, Utc};
use plumewatch::synth::{colour_blocks, write_png_frames};
use plumewatch::thumbnail::{render_thumbnail, Bounds, Origin, OutputFormat, ThumbnailSpec};
use plumewatch::timelapse::{ingest_frames, DatasetId, DirFrames};
use plumewatch::DataRoot;

fn main() -> plumewatch::Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t0 = Utc.with_ymd_and_hms(2015, 8, 3, 12, 0, 0).unwrap();
    write_png_frames(&tmp.path().join("f"), t0, 5, (0..10).map(|k| colour_blocks(320, 240, 20, k)))?;
    let root = DataRoot::create(tmp.path().join("data"))?;
    let id = DatasetId::new("blocks")?;
    let dataset = ingest_frames(&root, &id, &tmp.path().join("f"))?;

    let spec = ThumbnailSpec {
        dataset_id: id,
        bounds: Bounds::new(40, 20, 200, 140),
        out_width: 160,
        out_height: 120,
        start_frame: 2,
        nframes: 6,
        fps: 6,
        format: OutputFormat::Gif,
        origin: Origin::Human,
    };
    let url = spec.encode_url();
    println!("{url}");
    assert_eq!(ThumbnailSpec::decode_url(&url)?, spec);

    let gif = render_thumbnail(&spec, &dataset, &DirFrames::new(&root, &dataset))?;
    let out = tmp.path().join("thumb.gif");
    std::fs::write(&out, &gif).expect("write gif");
    println!("rendered {} bytes ({:.1} s at {} fps)", gif.len(), spec.duration_secs(), spec.fps);
    Ok(())
}
