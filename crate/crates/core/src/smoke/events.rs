use std::fs;
use std::io::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::store::{write_atomic, DataRoot};
use crate::thumbnail::{Bounds, Origin, OutputFormat, ThumbnailSpec};
use crate::timelapse::{Dataset, DatasetId, DirFrames};

use super::{detect_frames, SmokeFrameResult, SmokeParams};

pub const EVENT_THUMBNAIL_MAX_FRAMES: usize = 240;
pub const EVENT_THUMBNAIL_FPS: u32 = 12;
pub const EVENT_THUMBNAIL_SIZE: (u32, u32) = (320, 240);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmokeEvent {
    pub start_frame: usize,
    /// Inclusive.
    pub end_frame: usize,
    pub peak_count: u64,
    pub bounds: Bounds,
    pub thumbnail: ThumbnailSpec,
}

impl SmokeEvent {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Inclusive frame ranges of smoke events in a count sequence: maximal runs
/// at or above `threshold`, merged across gaps shorter than `merge_gap`,
/// then filtered to at least `min_frames` frames.
pub fn event_runs(counts: &[u64], threshold: u64, min_frames: usize, merge_gap: usize) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < counts.len() {
        if counts[i] < threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < counts.len() && counts[i] >= threshold {
            i += 1;
        }
        let end = i - 1;
        match runs.last_mut() {
            Some(prev) if start - prev.1 - 1 < merge_gap => prev.1 = end,
            _ => runs.push((start, end)),
        }
    }
    runs.retain(|(s, e)| e - s + 1 >= min_frames);
    runs
}

fn union(a: Option<Bounds>, b: &Bounds) -> Bounds {
    match a {
        None => *b,
        Some(a) => Bounds::new(
            a.left.min(b.left),
            a.top.min(b.top),
            a.right.max(b.right),
            a.bottom.max(b.bottom),
        ),
    }
}

/// Grow `b` by 10% of its size on every side, clamped to the frame.
pub fn pad_bounds(b: Bounds, frame_width: u32, frame_height: u32) -> Bounds {
    let px = b.width().div_ceil(10);
    let py = b.height().div_ceil(10);
    Bounds::new(
        b.left.saturating_sub(px),
        b.top.saturating_sub(py),
        (b.right + px).min(frame_width),
        (b.bottom + py).min(frame_height),
    )
}

/// Group per-frame results into smoke events, each with an
/// algorithm-origin thumbnail.
pub fn segment_events(results: &[SmokeFrameResult], dataset: &Dataset, params: &SmokeParams) -> Vec<SmokeEvent> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    let base = first.frame_index;
    debug_assert!(results.iter().enumerate().all(|(i, r)| r.frame_index == base + i));
    let counts: Vec<u64> = results.iter().map(|r| r.smoke_pixel_count).collect();
    let full = Bounds::new(0, 0, dataset.frame_width, dataset.frame_height);
    event_runs(&counts, params.event_threshold, params.min_event_frames, params.merge_gap)
        .into_iter()
        .map(|(s, e)| {
            let members = &results[s..=e];
            let peak_count = members.iter().map(|r| r.smoke_pixel_count).max().unwrap_or(0);
            let boxed = members
                .iter()
                .flat_map(|r| &r.component_boxes)
                .fold(None, |acc, b| Some(union(acc, b)));
            let bounds = match boxed {
                Some(b) => pad_bounds(b, dataset.frame_width, dataset.frame_height),
                None => full,
            };
            let start_frame = base + s;
            let len = e - s + 1;
            let nframes = len.min(EVENT_THUMBNAIL_MAX_FRAMES) as u32;
            SmokeEvent {
                start_frame,
                end_frame: base + e,
                peak_count,
                bounds,
                thumbnail: ThumbnailSpec {
                    dataset_id: dataset.id.clone(),
                    bounds,
                    out_width: EVENT_THUMBNAIL_SIZE.0,
                    out_height: EVENT_THUMBNAIL_SIZE.1,
                    start_frame,
                    nframes,
                    fps: EVENT_THUMBNAIL_FPS,
                    format: OutputFormat::Gif,
                    origin: Origin::Algorithm,
                },
            }
        })
        .collect()
}

/// Output of one detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmokeReport {
    pub params: SmokeParams,
    pub frames: Vec<SmokeFrameResult>,
    pub events: Vec<SmokeEvent>,
}

const FRAMES_CSV: &str = "frames.csv";
const EVENTS_JSON: &str = "events.json";

/// Detect, segment and persist results for an ingested dataset.
pub fn run_detection(root: &DataRoot, id: &DatasetId, params: &SmokeParams) -> Result<SmokeReport> {
    let _guard = crate::store::lock_dataset(root, id);
    let dataset = root.load_dataset(id)?;
    let frames = detect_frames(&DirFrames::new(root, &dataset), params)?;
    let events = segment_events(&frames, &dataset, params);
    let report = SmokeReport {
        params: params.clone(),
        frames,
        events,
    };
    save_report(root, id, &report)?;
    Ok(report)
}

pub fn save_report(root: &DataRoot, id: &DatasetId, report: &SmokeReport) -> Result<()> {
    let dir = root.smoke_dir(id);
    fs::create_dir_all(&dir).at(&dir)?;
    let mut csv = Vec::new();
    writeln!(csv, "frame_index,smoke_pixel_count,is_daytime").expect("in-memory write");
    for r in &report.frames {
        writeln!(csv, "{},{},{}", r.frame_index, r.smoke_pixel_count, r.is_daytime).expect("in-memory write");
    }
    write_atomic(&dir.join(FRAMES_CSV), &csv)?;
    let json = serde_json::to_vec_pretty(report).map_err(|e| Error::Encode(e.to_string()))?;
    write_atomic(&dir.join(EVENTS_JSON), &json)
}

/// The last persisted detection run, if any.
pub fn load_report(root: &DataRoot, id: &DatasetId) -> Result<Option<SmokeReport>> {
    let path = root.smoke_dir(id).join(EVENTS_JSON);
    match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| Error::invalid(path.display().to_string(), e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// `(url, event)` for every detected event in start order; empty when
/// detection never ran.
pub fn list_event_thumbnails(root: &DataRoot, id: &DatasetId) -> Result<Vec<(String, SmokeEvent)>> {
    let mut events = load_report(root, id)?.map(|r| r.events).unwrap_or_default();
    events.sort_by_key(|e| e.start_frame);
    Ok(events
        .into_iter()
        .map(|e| (e.thumbnail.encode_url(), e))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_event_example() {
        assert_eq!(event_runs(&[0, 0, 600, 700, 650, 0, 0], 500, 3, 1), vec![(2, 4)]);
    }

    #[test]
    fn short_runs_dropped() {
        assert!(event_runs(&[600, 600], 500, 3, 12).is_empty());
    }

    #[test]
    fn gap_merging() {
        let mut counts = vec![600u64; 4];
        counts.extend([0; 5]);
        counts.extend([600; 4]);
        assert_eq!(event_runs(&counts, 500, 3, 12), vec![(0, 12)]);
        // A gap equal to merge_gap keeps the runs apart.
        assert_eq!(event_runs(&counts, 500, 3, 5), vec![(0, 3), (9, 12)]);
        // Merged length can satisfy the minimum that the parts cannot.
        assert_eq!(event_runs(&[600, 0, 600], 500, 3, 2), vec![(0, 2)]);
    }

    #[test]
    fn padding_clamps() {
        assert_eq!(pad_bounds(Bounds::new(10, 10, 30, 20), 100, 100), Bounds::new(8, 9, 32, 21));
        assert_eq!(pad_bounds(Bounds::new(0, 0, 100, 50), 100, 50), Bounds::new(0, 0, 100, 50));
    }
}
