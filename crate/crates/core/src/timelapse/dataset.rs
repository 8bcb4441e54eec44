use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::store::DataRoot;

/// Identifier of a dataset. Restricted to `[A-Za-z0-9._-]` so it can appear
/// in URLs and paths without escaping.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DatasetId(String);

impl DatasetId {
    pub fn new(id: &str) -> Result<Self> {
        let ok = !id.is_empty()
            && id.len() <= 128
            && id != "."
            && id != ".."
            && id
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
        if ok {
            Ok(Self(id.to_owned()))
        } else {
            Err(Error::invalid("dataset id", format!("{id:?} is not a [A-Za-z0-9._-] token")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for DatasetId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::new(&s)
    }
}

impl From<DatasetId> for String {
    fn from(id: DatasetId) -> String {
        id.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub index: usize,
    pub capture_time: DateTime<Utc>,
    /// File name inside the dataset's frames directory.
    pub file: String,
}

/// A gap in capture longer than the inferred interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingFrames {
    /// Index of the last frame before the gap.
    pub after_index: usize,
    pub gap_s: i64,
    pub estimated_missing: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: DatasetId,
    pub capture_interval_s: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    pub frames: Vec<FrameMeta>,
    /// UTC calendar date of the first frame.
    pub capture_date: NaiveDate,
    #[serde(default)]
    pub missing: Vec<MissingFrames>,
}

const FILENAME_TIME_FORMAT: &str = "%Y%m%dT%H%M%SZ";

/// Parse a frame filename `<YYYYMMDDTHHMMSSZ>.jpg` (or `.jpeg`/`.png`).
pub fn parse_frame_filename(name: &str) -> Option<DateTime<Utc>> {
    let (stem, ext) = name.rsplit_once('.')?;
    if !matches!(ext.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png") {
        return None;
    }
    if stem.len() != 16 {
        return None;
    }
    NaiveDateTime::parse_from_str(stem, FILENAME_TIME_FORMAT)
        .ok()
        .map(|t| t.and_utc())
}

pub fn frame_filename(t: DateTime<Utc>, ext: &str) -> String {
    format!("{}.{ext}", t.format(FILENAME_TIME_FORMAT))
}

impl Dataset {
    /// Build and validate a dataset from timestamped frames of known size.
    ///
    /// `frames` must already be sorted by time. Gaps longer than the median
    /// interval (+1 s jitter) are recorded in `missing`; shorter gaps reject.
    pub fn from_timestamps(
        id: DatasetId,
        frame_width: u32,
        frame_height: u32,
        frames: Vec<(DateTime<Utc>, String)>,
    ) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("frames", "dataset has no frames"));
        };
        if frame_width == 0 || frame_height == 0 {
            return Err(Error::invalid("frame size", "width and height must be positive"));
        }
        let capture_date = first.0.date_naive();

        let mut gaps: Vec<i64> = Vec::with_capacity(frames.len().saturating_sub(1));
        for pair in frames.windows(2) {
            let gap = (pair[1].0 - pair[0].0).num_seconds();
            if gap <= 0 {
                return Err(Error::invalid(
                    pair[1].1.clone(),
                    "duplicate or out-of-order capture time",
                ));
            }
            gaps.push(gap);
        }
        let interval = if gaps.is_empty() {
            super::DEFAULT_CAPTURE_INTERVAL_S as i64
        } else {
            let mut sorted = gaps.clone();
            sorted.sort_unstable();
            sorted[(sorted.len() - 1) / 2]
        };

        let mut missing = Vec::new();
        for (i, &gap) in gaps.iter().enumerate() {
            if gap < interval - 1 {
                return Err(Error::invalid(
                    frames[i + 1].1.clone(),
                    format!("capture gap {gap} s is shorter than the {interval} s interval"),
                ));
            }
            if gap > interval + 1 {
                let ratio = (gap as f64 / interval as f64).round() as i64;
                missing.push(MissingFrames {
                    after_index: i,
                    gap_s: gap,
                    estimated_missing: (ratio - 1).max(1) as u32,
                });
            }
        }

        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(index, (capture_time, file))| FrameMeta {
                index,
                capture_time,
                file,
            })
            .collect();

        Ok(Self {
            id,
            capture_interval_s: interval as u32,
            frame_width,
            frame_height,
            frames,
            capture_date,
            missing,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Index of the last frame captured at or before `t`; 0 when `t`
    /// precedes the dataset.
    pub fn frame_index_at(&self, t: DateTime<Utc>) -> usize {
        let after = self.frames.partition_point(|f| f.capture_time <= t);
        after.saturating_sub(1)
    }

    pub fn start_time(&self) -> Option<DateTime<Utc>> {
        self.frames.first().map(|f| f.capture_time)
    }
}

/// Ingest a directory of timestamped frames into `root` as dataset `id`.
///
/// Every regular, non-hidden file in `source` must be a frame named after its
/// UTC capture time. Frames are copied into the dataset's frames directory
/// unless `source` already is that directory.
pub fn ingest_frames(root: &DataRoot, id: &DatasetId, source: &Path) -> Result<Dataset> {
    let _guard = crate::store::lock_dataset(root, id);
    let mut files: Vec<(DateTime<Utc>, String)> = Vec::new();
    let entries = fs::read_dir(source).at(source)?;
    for entry in entries {
        let entry = entry.at(source)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || !entry.file_type().at(entry.path())?.is_file() {
            continue;
        }
        let t = parse_frame_filename(&name).ok_or_else(|| {
            Error::invalid(name.clone(), "filename is not <YYYYMMDDTHHMMSSZ>.jpg|.png")
        })?;
        files.push((t, name));
    }
    if files.is_empty() {
        return Err(Error::invalid(
            source.display().to_string(),
            "directory contains no frames",
        ));
    }
    files.sort();

    let mut dims = Vec::with_capacity(files.len());
    for (_, name) in &files {
        let path = source.join(name);
        let d = image::image_dimensions(&path).map_err(|e| Error::Image {
            path: path.clone(),
            source: e,
        })?;
        dims.push(d);
    }
    let mut tally: HashMap<(u32, u32), usize> = HashMap::new();
    for d in &dims {
        *tally.entry(*d).or_default() += 1;
    }
    // Majority size wins; the first frame that disagrees is the one reported.
    let (&(width, height), _) = tally
        .iter()
        .max_by_key(|(d, n)| (**n, std::cmp::Reverse(**d)))
        .expect("non-empty");
    if let Some(i) = dims.iter().position(|&d| d != (width, height)) {
        let (w, h) = dims[i];
        return Err(Error::invalid(
            files[i].1.clone(),
            format!("frame is {w}x{h}, dataset frames are {width}x{height}"),
        ));
    }

    let dataset = Dataset::from_timestamps(id.clone(), width, height, files)?;

    let frames_dir = root.frames_dir(id);
    fs::create_dir_all(&frames_dir).at(&frames_dir)?;
    let same_dir = match (fs::canonicalize(source), fs::canonicalize(&frames_dir)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if !same_dir {
        for f in &dataset.frames {
            let dst = frames_dir.join(&f.file);
            fs::copy(source.join(&f.file), &dst).at(&dst)?;
        }
    }
    root.save_dataset(&dataset)?;
    Ok(dataset)
}
