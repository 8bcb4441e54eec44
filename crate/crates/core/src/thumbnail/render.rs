use image::RgbImage;

use crate::error::{Error, Result};
use crate::timelapse::{Dataset, FrameSource};

use super::{OutputFormat, ThumbnailSpec};

/// Largest output edge the renderer accepts (GIF caps at 65535).
pub const MAX_OUTPUT_EDGE: u32 = 4096;
pub const MAX_FRAMES: u32 = 10_000;

/// Rendered frames before encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Animation {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub frames: Vec<RgbImage>,
}

impl Animation {
    pub fn duration_secs(&self) -> f64 {
        self.frames.len() as f64 / f64::from(self.fps)
    }

    /// Per-frame GIF delay in hundredths of a second, `round(100 / fps)`.
    pub fn gif_delay(&self) -> u16 {
        ((100 + self.fps / 2) / self.fps).min(u32::from(u16::MAX)) as u16
    }

    /// Looping GIF89a. Frames with at most 256 colours keep them exactly.
    pub fn encode_gif(&self) -> Result<Vec<u8>> {
        let w = u16::try_from(self.width).map_err(|_| Error::invalid("width", "too large for GIF"))?;
        let h = u16::try_from(self.height).map_err(|_| Error::invalid("height", "too large for GIF"))?;
        let mut out = Vec::new();
        {
            let mut enc =
                gif::Encoder::new(&mut out, w, h, &[]).map_err(|e| Error::Encode(e.to_string()))?;
            enc.set_repeat(gif::Repeat::Infinite)
                .map_err(|e| Error::Encode(e.to_string()))?;
            let delay = self.gif_delay();
            for frame in &self.frames {
                let mut f = gif::Frame::from_rgb_speed(w, h, frame.as_raw(), 10);
                f.delay = delay;
                enc.write_frame(&f).map_err(|e| Error::Encode(e.to_string()))?;
            }
        }
        Ok(out)
    }
}

/// Sample positions for one output axis: `(i0, i1, weight of i1)`.
fn axis_taps(start: u32, len: u32, out_len: u32) -> Vec<(usize, usize, f64)> {
    let scale = f64::from(len) / f64::from(out_len);
    let last = f64::from(start + len - 1);
    (0..out_len)
        .map(|i| {
            let s = (f64::from(start) + (f64::from(i) + 0.5) * scale - 0.5).clamp(f64::from(start), last);
            let i0 = s.floor();
            let i1 = (i0 + 1.0).min(last);
            (i0 as usize, i1 as usize, s - i0)
        })
        .collect()
}

/// Crop `frame` to the spec's bounds and bilinearly resample to the output
/// size. Samples are pixel-centre aligned and clamped inside the crop, so a
/// crop at its own size is an exact copy.
pub fn crop_resample(frame: &RgbImage, spec: &ThumbnailSpec) -> RgbImage {
    let b = &spec.bounds;
    let xs = axis_taps(b.left, b.width(), spec.out_width);
    let ys = axis_taps(b.top, b.height(), spec.out_height);
    let src = frame.as_raw();
    let stride = frame.width() as usize * 3;
    let mut out = Vec::with_capacity(xs.len() * ys.len() * 3);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| f64::from(src[y * stride + x * 3 + c]);
                let top = p(x0, y0) * (1.0 - tx) + p(x1, y0) * tx;
                let bottom = p(x0, y1) * (1.0 - tx) + p(x1, y1) * tx;
                let v = top * (1.0 - ty) + bottom * ty;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage::from_raw(spec.out_width, spec.out_height, out).expect("buffer sized from dims")
}

/// Render the spec's frames without encoding them.
pub fn render_frames<S: FrameSource + ?Sized>(
    spec: &ThumbnailSpec,
    dataset: &Dataset,
    frames: &S,
) -> Result<Animation> {
    spec.validate_for(dataset)?;
    if spec.out_width > MAX_OUTPUT_EDGE || spec.out_height > MAX_OUTPUT_EDGE {
        return Err(Error::invalid(
            "width",
            format!("output edges are limited to {MAX_OUTPUT_EDGE} px"),
        ));
    }
    if spec.nframes > MAX_FRAMES {
        return Err(Error::invalid("nframes", format!("limited to {MAX_FRAMES}")));
    }
    let rendered = (0..spec.nframes as usize)
        .map(|k| {
            let frame = frames.load_frame(spec.start_frame + k)?;
            Ok(crop_resample(&frame, spec))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Animation {
        width: spec.out_width,
        height: spec.out_height,
        fps: spec.fps,
        frames: rendered,
    })
}

/// Render and encode in the spec's format.
pub fn render_thumbnail<S: FrameSource + ?Sized>(
    spec: &ThumbnailSpec,
    dataset: &Dataset,
    frames: &S,
) -> Result<Vec<u8>> {
    spec.validate()?;
    if spec.format == OutputFormat::Mp4 {
        return Err(Error::Unsupported("mp4 thumbnails".into()));
    }
    render_frames(spec, dataset, frames)?.encode_gif()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thumbnail::{Bounds, Origin};
    use crate::timelapse::{frame_filename, DatasetId};
    use chrono::{TimeZone, Utc};

    fn dataset(w: u32, h: u32, n: usize) -> Dataset {
        let start = Utc.with_ymd_and_hms(2015, 8, 3, 12, 0, 0).unwrap();
        let frames = (0..n)
            .map(|i| {
                let t = start + chrono::Duration::seconds(5 * i as i64);
                (t, frame_filename(t, "png"))
            })
            .collect();
        Dataset::from_timestamps(DatasetId::new("ds").unwrap(), w, h, frames).unwrap()
    }

    fn spec(bounds: Bounds, ow: u32, oh: u32, start: usize, n: u32) -> ThumbnailSpec {
        ThumbnailSpec {
            dataset_id: DatasetId::new("ds").unwrap(),
            bounds,
            out_width: ow,
            out_height: oh,
            start_frame: start,
            nframes: n,
            fps: 6,
            format: OutputFormat::Gif,
            origin: Origin::Human,
        }
    }

    fn gradient(w: u32, h: u32, seed: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([(x * 7 + seed) as u8, (y * 5) as u8, ((x + y) * 3) as u8])
        })
    }

    #[test]
    fn identity_crop_is_exact() {
        let frames = vec![gradient(40, 30, 0)];
        let ds = dataset(40, 30, 1);
        let anim = render_frames(&spec(Bounds::new(0, 0, 40, 30), 40, 30, 0, 1), &ds, &frames).unwrap();
        assert_eq!(anim.frames, frames);
    }

    #[test]
    fn solid_region_stays_solid() {
        let frame = RgbImage::from_fn(64, 48, |x, _| {
            if x < 32 {
                image::Rgb([255, 0, 0])
            } else {
                image::Rgb([0, 0, 255])
            }
        });
        let ds = dataset(64, 48, 1);
        let anim = render_frames(&spec(Bounds::new(3, 5, 29, 40), 17, 91, 0, 1), &ds, &vec![frame]).unwrap();
        assert_eq!(anim.frames.len(), 1);
        assert!(anim.frames[0].pixels().all(|p| *p == image::Rgb([255, 0, 0])));
    }

    #[test]
    fn frame_offsets_and_counts() {
        let frames: Vec<_> = (0..6).map(|s| gradient(20, 20, s * 40)).collect();
        let ds = dataset(20, 20, 6);
        let anim = render_frames(&spec(Bounds::new(0, 0, 20, 20), 20, 20, 2, 3), &ds, &frames).unwrap();
        assert_eq!(anim.frames, frames[2..5].to_vec());
        let s = spec(Bounds::new(0, 0, 20, 20), 20, 20, 4, 3);
        assert!(matches!(render_frames(&s, &ds, &frames), Err(Error::Invalid { .. })));
        let s = spec(Bounds::new(0, 0, 21, 20), 20, 20, 0, 1);
        assert!(matches!(render_frames(&s, &ds, &frames), Err(Error::Invalid { .. })));
    }

    #[test]
    fn gif_timing_and_determinism() {
        let frames: Vec<_> = (0..12).map(|s| gradient(16, 16, s)).collect();
        let ds = dataset(16, 16, 12);
        let s = spec(Bounds::new(0, 0, 16, 16), 8, 8, 0, 12);
        let anim = render_frames(&s, &ds, &frames).unwrap();
        assert_eq!(anim.duration_secs(), 2.0);
        assert_eq!(anim.gif_delay(), 17);
        let a = render_thumbnail(&s, &ds, &frames).unwrap();
        let b = render_thumbnail(&s, &ds, &frames).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[0..6], b"GIF89a");

        let mut decoder = gif::DecodeOptions::new();
        decoder.set_color_output(gif::ColorOutput::RGBA);
        let mut d = decoder.read_info(a.as_slice()).unwrap();
        let mut n = 0;
        while let Some(f) = d.read_next_frame().unwrap() {
            assert_eq!((f.width, f.height, f.delay), (8, 8, 17));
            n += 1;
        }
        assert_eq!(n, 12);
    }

    #[test]
    fn mp4_is_unsupported() {
        let frames = vec![gradient(8, 8, 0)];
        let ds = dataset(8, 8, 1);
        let s = ThumbnailSpec {
            format: OutputFormat::Mp4,
            ..spec(Bounds::new(0, 0, 8, 8), 8, 8, 0, 1)
        };
        assert!(matches!(render_thumbnail(&s, &ds, &frames), Err(Error::Unsupported(_))));
    }
}
