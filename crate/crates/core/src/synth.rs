//! Deterministic synthetic scenes with known ground truth.
//!
//! Textures come from an integer hash of pixel coordinates and a seed, so
//! the same arguments always give the same pixels.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use image::{Rgb, RgbImage};

use crate::error::{Error, IoContext, Result};
use crate::timelapse::{frame_filename, FrameSource};

/// Saturated blue sky: bright enough to count as daytime, too saturated
/// to look like smoke.
pub const SKY: [u8; 3] = [30, 80, 120];
/// Whitish gray plume colour.
pub const PLUME: [u8; 3] = [230, 230, 220];
pub const NIGHT: [u8; 3] = [10, 10, 20];
/// Light gray, smoke-coloured, used for static structures.
pub const CONCRETE: [u8; 3] = [200, 200, 200];

/// 32-bit avalanche hash (the murmur3 finaliser).
fn mix(mut h: u32) -> u32 {
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^ (h >> 16)
}

fn hash3(a: u32, b: u32, c: u32) -> u32 {
    mix(mix(mix(a) ^ b.wrapping_mul(0x9e37_79b9)) ^ c.wrapping_mul(0x7f4a_7c15))
}

/// `c` shifted by a per-pixel offset in `-amp..=amp`.
fn jitter(c: [u8; 3], amp: u8, x: u32, y: u32, seed: u32) -> Rgb<u8> {
    if amp == 0 {
        return Rgb(c);
    }
    let h = hash3(x, y, seed);
    let span = 2 * u32::from(amp) + 1;
    Rgb(std::array::from_fn(|i| {
        let off = ((h >> (i * 8)) & 0xff) % span;
        (i32::from(c[i]) + off as i32 - i32::from(amp)).clamp(0, 255) as u8
    }))
}

pub fn solid(width: u32, height: u32, colour: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(width, height, Rgb(colour))
}

/// Colour of block `(bx, by)` in [`colour_blocks`].
pub fn block_colour(bx: u32, by: u32, seed: u32) -> [u8; 3] {
    let h = hash3(bx, by, seed);
    [h as u8, (h >> 8) as u8, (h >> 16) as u8]
}

/// Uniform `block`-pixel squares of pseudo-random colour.
pub fn colour_blocks(width: u32, height: u32, block: u32, seed: u32) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| Rgb(block_colour(x / block, y / block, seed)))
}

/// Textured frame that changes with `frame`: smooth ramps plus fine noise,
/// so every pyramid level and every frame differs.
pub fn gradient_frame(width: u32, height: u32, frame: u32) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let n = hash3(x, y, frame) & 0x1f;
        Rgb([
            ((x * 255 / width.max(1) + frame * 3 + n) % 256) as u8,
            ((y * 255 / height.max(1) + frame * 7) % 256) as u8,
            ((x / 8 + y / 8 + frame + n) % 256) as u8,
        ])
    })
}

/// [`gradient_frame`]s generated on demand, for datasets too large to hold.
#[derive(Debug, Clone, Copy)]
pub struct GradientFrames {
    pub width: u32,
    pub height: u32,
    pub count: usize,
}

impl FrameSource for GradientFrames {
    fn frame_count(&self) -> usize {
        self.count
    }

    fn load_frame(&self, index: usize) -> Result<RgbImage> {
        if index >= self.count {
            return Err(Error::NotFound(format!("frame {index}")));
        }
        Ok(gradient_frame(self.width, self.height, index as u32))
    }
}

/// A square plume drifting right over a noisy sky.
///
/// The sky-only warm-up lets the temporal background settle before the
/// plume appears. The plume moves `ceil(side / 20)` pixels per frame so no
/// pixel stays covered for more than 20 frames, which keeps it out of a
/// 60-frame median background.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlobScene {
    pub width: u32,
    pub height: u32,
    pub side: u32,
    pub warmup: usize,
    pub plume_frames: usize,
    pub seed: u32,
}

impl BlobScene {
    /// Smallest scene (at least 320x240) that fits the whole drift.
    pub fn new(side: u32, warmup: usize, plume_frames: usize, seed: u32) -> Self {
        let speed = side.div_ceil(20);
        let travel = speed * plume_frames as u32;
        BlobScene {
            width: (side + travel + 40).max(320),
            height: (side + 40).max(240),
            side,
            warmup,
            plume_frames,
            seed,
        }
    }

    pub fn speed(&self) -> u32 {
        self.side.div_ceil(20)
    }

    pub fn frame_count(&self) -> usize {
        self.warmup + self.plume_frames
    }

    /// Plume rectangle in frame `k` as `(left, top)`, if present.
    pub fn plume_origin(&self, k: usize) -> Option<(u32, u32)> {
        let j = k.checked_sub(self.warmup)?;
        if j >= self.plume_frames {
            return None;
        }
        Some((20 + self.speed() * j as u32, (self.height - self.side) / 2))
    }

    /// Ground-truth smoke pixels in frame `k`.
    pub fn truth(&self, k: usize) -> u64 {
        if self.plume_origin(k).is_some() {
            u64::from(self.side) * u64::from(self.side)
        } else {
            0
        }
    }

    pub fn frame(&self, k: usize) -> RgbImage {
        let plume = self.plume_origin(k);
        let side = self.side;
        let seed = self.seed ^ k as u32;
        RgbImage::from_fn(self.width, self.height, |x, y| match plume {
            Some((l, t)) if x >= l && x < l + side && y >= t && y < t + side => {
                jitter(PLUME, 4, x, y, seed)
            }
            _ => jitter(SKY, 4, x, y, seed),
        })
    }

    pub fn frames(&self) -> Vec<RgbImage> {
        (0..self.frame_count()).map(|k| self.frame(k)).collect()
    }
}

/// Sky with a fixed light-gray building: smoke-coloured but never moving.
pub fn static_scene(width: u32, height: u32, frames: usize, seed: u32) -> Vec<RgbImage> {
    (0..frames)
        .map(|k| {
            let seed = seed ^ k as u32;
            RgbImage::from_fn(width, height, |x, y| {
                if x > width / 4 && x < width / 2 && y > height / 3 {
                    jitter(CONCRETE, 4, x, y, seed)
                } else {
                    jitter(SKY, 4, x, y, seed)
                }
            })
        })
        .collect()
}

/// Dark frames with a plume-coloured blob flickering in every other frame;
/// every frame should fail the daylight gate.
pub fn night_scene(width: u32, height: u32, frames: usize, seed: u32) -> Vec<RgbImage> {
    (0..frames)
        .map(|k| {
            let seed = seed ^ k as u32;
            RgbImage::from_fn(width, height, |x, y| {
                if k % 2 == 1 && x < 40 && y < 40 {
                    jitter(PLUME, 4, x, y, seed)
                } else {
                    jitter(NIGHT, 4, x, y, seed)
                }
            })
        })
        .collect()
}

/// Write frames as PNGs named by capture time, `interval_s` apart.
pub fn write_png_frames<I>(dir: &Path, start: DateTime<Utc>, interval_s: u32, frames: I) -> Result<Vec<PathBuf>>
where
    I: IntoIterator<Item = RgbImage>,
{
    fs::create_dir_all(dir).at(dir)?;
    let mut paths = Vec::new();
    for (k, frame) in frames.into_iter().enumerate() {
        let t = start + Duration::seconds(i64::from(interval_s) * k as i64);
        let path = dir.join(frame_filename(t, "png"));
        frame.save(&path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}
