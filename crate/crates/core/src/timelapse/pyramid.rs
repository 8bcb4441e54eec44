use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::store::{write_atomic, DataRoot};

use super::frames::{DirFrames, FrameSource};
use super::segment::{compress_tile, SegmentReader, SegmentWriter, TileClip};
use super::{DatasetId, DEFAULT_SEGMENT_FRAMES};

/// Shape of a power-of-two tile pyramid over frames of one size.
///
/// Level `num_levels - 1` is native resolution; every level below halves
/// the one above it with a 2x2 box filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyramidGeometry {
    pub frame_width: u32,
    pub frame_height: u32,
    pub tile_size: u32,
    pub num_levels: u32,
}

impl PyramidGeometry {
    pub fn new(frame_width: u32, frame_height: u32, tile_size: u32) -> Result<Self> {
        if frame_width == 0 || frame_height == 0 {
            return Err(Error::invalid("frame size", "width and height must be positive"));
        }
        if tile_size == 0 {
            return Err(Error::invalid("tile_size", "must be positive"));
        }
        let longest = u64::from(frame_width.max(frame_height));
        let mut num_levels = 1u32;
        while longest > u64::from(tile_size) << (num_levels - 1) {
            num_levels += 1;
        }
        Ok(Self {
            frame_width,
            frame_height,
            tile_size,
            num_levels,
        })
    }

    /// Number of halvings between native resolution and `level`.
    pub fn halvings(&self, level: u32) -> u32 {
        self.num_levels - 1 - level
    }

    /// Downscale factor of `level` relative to native resolution.
    pub fn scale(&self, level: u32) -> u32 {
        1 << self.halvings(level)
    }

    pub fn level_dims(&self, level: u32) -> (u32, u32) {
        let s = self.scale(level);
        (self.frame_width.div_ceil(s), self.frame_height.div_ceil(s))
    }

    /// `(cols, rows)` of the tile grid at `level`.
    pub fn grid(&self, level: u32) -> (u32, u32) {
        let span = self.tile_size * self.scale(level);
        (self.frame_width.div_ceil(span), self.frame_height.div_ceil(span))
    }

    pub fn contains(&self, level: u32, row: u32, col: u32) -> bool {
        if level >= self.num_levels {
            return false;
        }
        let (cols, rows) = self.grid(level);
        row < rows && col < cols
    }

    /// All `(level, row, col)` triples, level-major.
    pub fn tiles(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        (0..self.num_levels).flat_map(move |level| {
            let (cols, rows) = self.grid(level);
            (0..rows).flat_map(move |row| (0..cols).map(move |col| (level, row, col)))
        })
    }

    /// Every level of one frame, index = level. The native frame is moved in
    /// as the last entry.
    pub fn levels(&self, frame: RgbImage) -> Vec<RgbImage> {
        let mut levels = Vec::with_capacity(self.num_levels as usize);
        levels.push(frame);
        for _ in 1..self.num_levels {
            let next = halve(levels.last().expect("non-empty"));
            levels.push(next);
        }
        levels.reverse();
        levels
    }

    /// Cut tile `(row, col)` out of a level image, padding with black.
    pub fn cut_tile(&self, level_image: &RgbImage, row: u32, col: u32) -> RgbImage {
        let ts = self.tile_size;
        let mut tile = RgbImage::new(ts, ts);
        let x0 = col * ts;
        let y0 = row * ts;
        let w = level_image.width().saturating_sub(x0).min(ts) as usize;
        let h = level_image.height().saturating_sub(y0).min(ts);
        if w == 0 {
            return tile;
        }
        let src_stride = level_image.width() as usize * 3;
        let dst_stride = ts as usize * 3;
        let src = level_image.as_raw();
        let dst: &mut [u8] = &mut tile;
        for y in 0..h {
            let s = (y0 + y) as usize * src_stride + x0 as usize * 3;
            let d = y as usize * dst_stride;
            dst[d..d + w * 3].copy_from_slice(&src[s..s + w * 3]);
        }
        tile
    }

    /// Reassemble a level image from its tiles (inverse of `cut_tile`).
    pub fn mosaic(&self, level: u32, tile: impl Fn(u32, u32) -> RgbImage) -> RgbImage {
        let (lw, lh) = self.level_dims(level);
        let (cols, rows) = self.grid(level);
        let ts = self.tile_size;
        let mut out = RgbImage::new(lw, lh);
        for row in 0..rows {
            for col in 0..cols {
                let t = tile(row, col);
                let x0 = col * ts;
                let y0 = row * ts;
                let w = (lw - x0).min(ts);
                let h = (lh - y0).min(ts);
                for y in 0..h {
                    for x in 0..w {
                        out.put_pixel(x0 + x, y0 + y, *t.get_pixel(x, y));
                    }
                }
            }
        }
        out
    }
}

/// 2x2 box-filter downscale to `ceil(w/2) x ceil(h/2)`.
///
/// Each output pixel is the rounded mean of the source pixels of its 2x2
/// block that lie inside the image (1, 2 or 4 of them).
pub fn halve(img: &RgbImage) -> RgbImage {
    let (w, h) = img.dimensions();
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let src = img.as_raw();
    let stride = w as usize * 3;
    let mut out = vec![0u8; ow as usize * oh as usize * 3];
    out.par_chunks_mut(ow as usize * 3)
        .enumerate()
        .for_each(|(oy, line)| {
            let y0 = oy * 2;
            let y1 = (y0 + 1).min(h as usize - 1);
            let ny = if y1 == y0 { 1 } else { 2 };
            for ox in 0..ow as usize {
                let x0 = ox * 2;
                let x1 = (x0 + 1).min(w as usize - 1);
                let nx = if x1 == x0 { 1 } else { 2 };
                let n = (nx * ny) as u32;
                for c in 0..3 {
                    let mut sum = u32::from(src[y0 * stride + x0 * 3 + c]);
                    if nx == 2 {
                        sum += u32::from(src[y0 * stride + x1 * 3 + c]);
                    }
                    if ny == 2 {
                        sum += u32::from(src[y1 * stride + x0 * 3 + c]);
                        if nx == 2 {
                            sum += u32::from(src[y1 * stride + x1 * 3 + c]);
                        }
                    }
                    line[ox * 3 + c] = ((sum + n / 2) / n) as u8;
                }
            }
        });
    RgbImage::from_raw(ow, oh, out).expect("buffer sized from dims")
}

/// Manifest of a built pyramid, stored as `tiles/pyramid.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePyramid {
    pub dataset_id: DatasetId,
    pub tile_size: u32,
    pub num_levels: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    pub frame_count: usize,
    /// Frames per segment file.
    pub segment_frames: u32,
}

impl TilePyramid {
    pub fn geometry(&self) -> PyramidGeometry {
        PyramidGeometry {
            frame_width: self.frame_width,
            frame_height: self.frame_height,
            tile_size: self.tile_size,
            num_levels: self.num_levels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileAddress {
    pub level: u32,
    pub row: u32,
    pub col: u32,
    pub frame_start: usize,
    pub frame_count: usize,
}

fn segment_path(tiles_dir: &Path, level: u32, row: u32, col: u32, segment: usize) -> PathBuf {
    tiles_dir
        .join(level.to_string())
        .join(format!("{row}_{col}"))
        .join(format!("{segment}.bin"))
}

/// Build the pyramid of an ingested dataset into its `tiles/` directory.
pub fn build_pyramid(root: &DataRoot, id: &DatasetId, tile_size: u32) -> Result<TilePyramid> {
    build_pyramid_with(root, id, tile_size, DEFAULT_SEGMENT_FRAMES)
}

pub fn build_pyramid_with(
    root: &DataRoot,
    id: &DatasetId,
    tile_size: u32,
    segment_frames: u32,
) -> Result<TilePyramid> {
    let _guard = crate::store::lock_dataset(root, id);
    let dataset = root.load_dataset(id)?;
    let geometry = PyramidGeometry::new(dataset.frame_width, dataset.frame_height, tile_size)?;
    let frames = DirFrames::new(root, &dataset);
    build_pyramid_from(&frames, id, geometry, segment_frames, &root.tiles_dir(id))
}

/// Build a pyramid from any frame source into `tiles_dir`.
///
/// Frames are processed in parallel batches; segment files are written in
/// frame order so output bytes do not depend on scheduling.
pub fn build_pyramid_from<S: FrameSource + ?Sized>(
    frames: &S,
    id: &DatasetId,
    geometry: PyramidGeometry,
    segment_frames: u32,
    tiles_dir: &Path,
) -> Result<TilePyramid> {
    if segment_frames == 0 {
        return Err(Error::invalid("segment_frames", "must be positive"));
    }
    let frame_count = frames.frame_count();
    if frame_count == 0 {
        return Err(Error::invalid("frames", "dataset has no frames"));
    }
    if tiles_dir.exists() {
        fs::remove_dir_all(tiles_dir).at(tiles_dir)?;
    }
    let addresses: Vec<(u32, u32, u32)> = geometry.tiles().collect();
    let seg_len = segment_frames as usize;
    let batch = rayon::current_num_threads().max(1) * 2;

    let mut writers: BTreeMap<(u32, u32, u32), SegmentWriter> = BTreeMap::new();
    let mut start = 0;
    while start < frame_count {
        let end = (start + batch).min(frame_count);
        let chunks: Vec<Vec<Vec<u8>>> = (start..end)
            .into_par_iter()
            .map(|index| -> Result<Vec<Vec<u8>>> {
                let frame = frames.load_frame(index)?;
                if frame.dimensions() != (geometry.frame_width, geometry.frame_height) {
                    return Err(Error::invalid(
                        format!("frame {index}"),
                        "dimensions differ from dataset",
                    ));
                }
                let levels = geometry.levels(frame);
                Ok(addresses
                    .iter()
                    .map(|&(level, row, col)| {
                        compress_tile(&geometry.cut_tile(&levels[level as usize], row, col))
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;

        for (offset, tiles) in chunks.into_iter().enumerate() {
            let index = start + offset;
            let segment = index / seg_len;
            if index % seg_len == 0 {
                for (_, w) in std::mem::take(&mut writers) {
                    w.finish()?;
                }
                for &(level, row, col) in &addresses {
                    let path = segment_path(tiles_dir, level, row, col, segment);
                    writers.insert(
                        (level, row, col),
                        SegmentWriter::create(&path, geometry.tile_size, index)?,
                    );
                }
            }
            for (addr, chunk) in addresses.iter().zip(tiles) {
                writers
                    .get_mut(addr)
                    .expect("writer opened at segment start")
                    .push(&chunk)?;
            }
        }
        start = end;
    }
    for (_, w) in writers {
        w.finish()?;
    }

    let pyramid = TilePyramid {
        dataset_id: id.clone(),
        tile_size: geometry.tile_size,
        num_levels: geometry.num_levels,
        frame_width: geometry.frame_width,
        frame_height: geometry.frame_height,
        frame_count,
        segment_frames,
    };
    let json = serde_json::to_vec_pretty(&pyramid).map_err(|e| Error::Encode(e.to_string()))?;
    write_atomic(&tiles_dir.join("pyramid.json"), &json)?;
    Ok(pyramid)
}

/// Read access to a built pyramid.
#[derive(Debug, Clone)]
pub struct TileStore {
    dir: PathBuf,
    pyramid: TilePyramid,
}

impl TileStore {
    pub fn open(tiles_dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = tiles_dir.into();
        let manifest = dir.join("pyramid.json");
        let bytes = match fs::read(&manifest) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(format!("pyramid at {}", dir.display())))
            }
            Err(e) => return Err(Error::io(manifest, e)),
        };
        let pyramid = serde_json::from_slice(&bytes)
            .map_err(|e| Error::invalid(manifest.display().to_string(), e.to_string()))?;
        Ok(Self { dir, pyramid })
    }

    pub fn open_dataset(root: &DataRoot, id: &DatasetId) -> Result<Self> {
        Self::open(root.tiles_dir(id))
    }

    pub fn pyramid(&self) -> &TilePyramid {
        &self.pyramid
    }

    /// Frames `[frame_start, frame_start + frame_count)` of one tile.
    pub fn get_tile(&self, address: TileAddress) -> Result<TileClip> {
        let p = &self.pyramid;
        let geometry = p.geometry();
        let TileAddress {
            level,
            row,
            col,
            frame_start,
            frame_count,
        } = address;
        if !geometry.contains(level, row, col) {
            return Err(Error::NotFound(format!("tile {level}/{row}/{col}")));
        }
        let end = frame_start.checked_add(frame_count);
        if frame_count == 0 || end.is_none_or(|e| e > p.frame_count) {
            return Err(Error::NotFound(format!(
                "frames {frame_start}..+{frame_count} of {}",
                p.frame_count
            )));
        }
        let end = frame_start + frame_count;
        let seg_len = p.segment_frames as usize;
        let mut frames = Vec::with_capacity(frame_count);
        let mut index = frame_start;
        while index < end {
            let segment = index / seg_len;
            let path = segment_path(&self.dir, level, row, col, segment);
            let mut reader = SegmentReader::open(&path)?;
            let seg_end = ((segment + 1) * seg_len).min(end);
            for i in index..seg_end {
                frames.push(reader.read_frame(i)?);
            }
            index = seg_end;
        }
        Ok(TileClip {
            tile_size: p.tile_size,
            frame_start,
            frames,
        })
    }
}
