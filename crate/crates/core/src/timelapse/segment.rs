//! Binary tile encodings.
//!
//! # Segment file (`tiles/<level>/<row>_<col>/<segment>.bin`)
//!
//! All integers little-endian.
//!
//! | offset | size | field                                            |
//! |--------|------|--------------------------------------------------|
//! | 0      | 4    | magic `PWTS`                                     |
//! | 4      | 2    | version (1)                                      |
//! | 6      | 2    | reserved (0)                                     |
//! | 8      | 4    | tile_size                                        |
//! | 12     | 4    | first frame index                                |
//! | 16     | 4    | frame count `n`                                  |
//! | 20     | 4    | reserved (0)                                     |
//! | 24     | 8    | offset of the chunk index                        |
//! | 32     | ...  | `n` zlib chunks, each a `tile_size² · 3` RGB raster |
//! | index  | 12·n | per frame: u64 chunk offset, u32 chunk length     |
//!
//! # Tile clip (HTTP body of `GET /tiles/...`)
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `PWTC`                           |
//! | 4      | 2    | version (1)                            |
//! | 6      | 2    | reserved (0)                           |
//! | 8      | 4    | tile_size                              |
//! | 12     | 4    | first frame index                      |
//! | 16     | 4    | frame count `n`                        |
//! | 20     | ...  | one zlib stream of `n` RGB rasters     |

use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use image::RgbImage;

use crate::error::{Error, IoContext, Result};

const SEGMENT_MAGIC: &[u8; 4] = b"PWTS";
const CLIP_MAGIC: &[u8; 4] = b"PWTC";
const VERSION: u16 = 1;
const SEGMENT_HEADER_LEN: u64 = 32;
const CLIP_HEADER_LEN: usize = 20;

pub(crate) fn compress_tile(tile: &RgbImage) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::fast());
    enc.write_all(tile.as_raw()).expect("in-memory write");
    enc.finish().expect("in-memory write")
}

fn inflate_exact(bytes: &[u8], expected: usize, what: &Path) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(expected);
    ZlibDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| Error::io(what, e))?;
    if out.len() != expected {
        return Err(Error::invalid(
            what.display().to_string(),
            format!("chunk inflates to {} bytes, expected {expected}", out.len()),
        ));
    }
    Ok(out)
}

pub(crate) struct SegmentWriter {
    path: PathBuf,
    out: BufWriter<File>,
    tile_size: u32,
    frame_start: usize,
    index: Vec<(u64, u32)>,
    pos: u64,
}

impl SegmentWriter {
    pub(crate) fn create(path: &Path, tile_size: u32, frame_start: usize) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).at(parent)?;
        }
        let file = File::create(path).at(path)?;
        let mut out = BufWriter::new(file);
        out.write_all(&[0u8; SEGMENT_HEADER_LEN as usize]).at(path)?;
        Ok(Self {
            path: path.to_owned(),
            out,
            tile_size,
            frame_start,
            index: Vec::new(),
            pos: SEGMENT_HEADER_LEN,
        })
    }

    pub(crate) fn push(&mut self, chunk: &[u8]) -> Result<()> {
        self.out.write_all(chunk).at(&self.path)?;
        self.index.push((self.pos, chunk.len() as u32));
        self.pos += chunk.len() as u64;
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        let path = self.path.clone();
        let index_offset = self.pos;
        for (off, len) in &self.index {
            self.out.write_all(&off.to_le_bytes()).at(&path)?;
            self.out.write_all(&len.to_le_bytes()).at(&path)?;
        }
        let mut header = Vec::with_capacity(SEGMENT_HEADER_LEN as usize);
        header.extend_from_slice(SEGMENT_MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&0u16.to_le_bytes());
        header.extend_from_slice(&self.tile_size.to_le_bytes());
        header.extend_from_slice(&(self.frame_start as u32).to_le_bytes());
        header.extend_from_slice(&(self.index.len() as u32).to_le_bytes());
        header.extend_from_slice(&0u32.to_le_bytes());
        header.extend_from_slice(&index_offset.to_le_bytes());
        self.out.seek(SeekFrom::Start(0)).at(&path)?;
        self.out.write_all(&header).at(&path)?;
        let file = self.out.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        file.sync_data().at(&path)
    }
}

pub(crate) struct SegmentReader {
    path: PathBuf,
    file: File,
    tile_size: u32,
    frame_start: usize,
    index: Vec<(u64, u32)>,
}

impl SegmentReader {
    pub(crate) fn open(path: &Path) -> Result<Self> {
        let mut file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(format!("segment {}", path.display())))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut header = [0u8; SEGMENT_HEADER_LEN as usize];
        file.read_exact(&mut header).at(path)?;
        if &header[0..4] != SEGMENT_MAGIC {
            return Err(Error::invalid(path.display().to_string(), "bad segment magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().expect("4 bytes"));
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(Error::Unsupported(format!("segment version {version}")));
        }
        let tile_size = u32_at(8);
        let frame_start = u32_at(12) as usize;
        let count = u32_at(16) as usize;
        let index_offset = u64::from_le_bytes(header[24..32].try_into().expect("8 bytes"));
        file.seek(SeekFrom::Start(index_offset)).at(path)?;
        let mut raw = vec![0u8; count * 12];
        file.read_exact(&mut raw).at(path)?;
        let index = raw
            .chunks_exact(12)
            .map(|c| {
                (
                    u64::from_le_bytes(c[0..8].try_into().expect("8 bytes")),
                    u32::from_le_bytes(c[8..12].try_into().expect("4 bytes")),
                )
            })
            .collect();
        Ok(Self {
            path: path.to_owned(),
            file,
            tile_size,
            frame_start,
            index,
        })
    }

    pub(crate) fn read_frame(&mut self, frame_index: usize) -> Result<RgbImage> {
        let slot = frame_index
            .checked_sub(self.frame_start)
            .and_then(|i| self.index.get(i).copied())
            .ok_or_else(|| {
                Error::NotFound(format!("frame {frame_index} in {}", self.path.display()))
            })?;
        let (offset, len) = slot;
        self.file.seek(SeekFrom::Start(offset)).at(&self.path)?;
        let mut chunk = vec![0u8; len as usize];
        self.file.read_exact(&mut chunk).at(&self.path)?;
        let ts = self.tile_size;
        let raw = inflate_exact(&chunk, (ts * ts * 3) as usize, &self.path)?;
        Ok(RgbImage::from_raw(ts, ts, raw).expect("length checked"))
    }
}

/// Consecutive frames of one tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileClip {
    pub tile_size: u32,
    pub frame_start: usize,
    pub frames: Vec<RgbImage>,
}

impl TileClip {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CLIP_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.tile_size.to_le_bytes());
        out.extend_from_slice(&(self.frame_start as u32).to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        let mut enc = ZlibEncoder::new(out, Compression::fast());
        for f in &self.frames {
            enc.write_all(f.as_raw()).expect("in-memory write");
        }
        enc.finish().expect("in-memory write")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |why: &str| Error::invalid("tile clip", why.to_owned());
        if bytes.len() < CLIP_HEADER_LEN || &bytes[0..4] != CLIP_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        if u16::from_le_bytes([bytes[4], bytes[5]]) != VERSION {
            return Err(bad("unsupported version"));
        }
        let tile_size = u32_at(8);
        let frame_start = u32_at(12) as usize;
        let count = u32_at(16) as usize;
        let frame_len = (tile_size as usize).pow(2) * 3;
        let raw = inflate_exact(&bytes[CLIP_HEADER_LEN..], frame_len * count, Path::new("tile clip"))?;
        let frames = raw
            .chunks_exact(frame_len.max(1))
            .take(count)
            .map(|c| RgbImage::from_raw(tile_size, tile_size, c.to_vec()).expect("length checked"))
            .collect();
        Ok(Self {
            tile_size,
            frame_start,
            frames,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile(seed: u8) -> RgbImage {
        RgbImage::from_fn(8, 8, |x, y| image::Rgb([seed, x as u8, y as u8]))
    }

    #[test]
    fn segment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("0").join("0_0").join("3.bin");
        let mut w = SegmentWriter::create(&path, 8, 30).unwrap();
        for s in 0..5 {
            w.push(&compress_tile(&tile(s))).unwrap();
        }
        w.finish().unwrap();
        let mut r = SegmentReader::open(&path).unwrap();
        assert_eq!(r.read_frame(32).unwrap(), tile(2));
        assert_eq!(r.read_frame(30).unwrap(), tile(0));
        assert!(matches!(r.read_frame(35), Err(Error::NotFound(_))));
        assert!(matches!(r.read_frame(29), Err(Error::NotFound(_))));
    }

    #[test]
    fn clip_round_trip() {
        let clip = TileClip {
            tile_size: 8,
            frame_start: 4,
            frames: vec![tile(1), tile(9)],
        };
        let bytes = clip.to_bytes();
        assert_eq!(&bytes[0..4], b"PWTC");
        assert_eq!(TileClip::from_bytes(&bytes).unwrap(), clip);
        assert!(TileClip::from_bytes(b"nope").is_err());
    }
}
