use std::collections::VecDeque;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thumbnail::Bounds;
use crate::timelapse::FrameSource;

use super::SmokeParams;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmokeFrameResult {
    pub frame_index: usize,
    pub smoke_pixel_count: u64,
    pub is_daytime: bool,
    pub component_boxes: Vec<Bounds>,
}

/// Mean Rec. 601 luma of a frame, 0–255.
pub fn mean_luminance(frame: &RgbImage) -> f64 {
    let n = u64::from(frame.width()) * u64::from(frame.height());
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = frame
        .as_raw()
        .par_chunks(3 * 4096)
        .map(|c| {
            c.chunks_exact(3)
                .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
                .sum::<f64>()
        })
        .sum();
    sum / n as f64
}

/// HSV saturation and value of an RGB pixel, both in [0, 1].
pub fn saturation_value(p: [u8; 3]) -> (f64, f64) {
    let max = p[0].max(p[1]).max(p[2]);
    let min = p[0].min(p[1]).min(p[2]);
    let v = f64::from(max) / 255.0;
    let s = if max == 0 {
        0.0
    } else {
        f64::from(max - min) / f64::from(max)
    };
    (s, v)
}

/// Smoke mask of `frame` against the per-pixel temporal median of `window`.
///
/// The median is the lower median of the window's values for each channel.
/// It is only evaluated where the pixel already passes the colour test, which
/// gives the same mask as evaluating it everywhere.
pub fn smoke_mask(frame: &RgbImage, window: &[&RgbImage], params: &SmokeParams) -> Vec<bool> {
    let (w, h) = frame.dimensions();
    let row_len = w as usize * 3;
    let src = frame.as_raw();
    let mut mask = vec![false; w as usize * h as usize];
    mask.par_chunks_mut(w as usize)
        .enumerate()
        .for_each(|(y, line)| {
            let mut samples = vec![0u8; window.len()];
            for (x, out) in line.iter_mut().enumerate() {
                let o = y * row_len + x * 3;
                let p = [src[o], src[o + 1], src[o + 2]];
                let (s, v) = saturation_value(p);
                if !(s < params.max_saturation && v > params.min_value) {
                    continue;
                }
                let mut diff = 0u8;
                for (c, value) in p.iter().enumerate() {
                    for (slot, bg) in samples.iter_mut().zip(window) {
                        *slot = bg.as_raw()[o + c];
                    }
                    let mid = (samples.len() - 1) / 2;
                    let (_, median, _) = samples.select_nth_unstable(mid);
                    diff = diff.max(value.abs_diff(*median));
                }
                *out = diff > params.diff_threshold;
            }
        });
    mask
}

/// 8-connected components of `mask` with at least `min_area` pixels, as
/// `(area, bounding box)`, in scan order of their first pixel.
pub fn components(mask: &[bool], width: u32, height: u32, min_area: usize) -> Vec<(u64, Bounds)> {
    let (w, h) = (width as usize, height as usize);
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut area = 0u64;
        let (mut l, mut t, mut r, mut b) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            l = l.min(x);
            t = t.min(y);
            r = r.max(x);
            b = b.max(y);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if area as usize >= min_area {
            out.push((
                area,
                Bounds::new(l as u32, t as u32, r as u32 + 1, b as u32 + 1),
            ));
        }
    }
    out
}

/// Per-frame smoke-pixel counts over a whole dataset.
///
/// Frame `k` is compared with the median of the `bg_window` frames before it
/// (fewer near the start; frame 0 is its own background). Night frames are
/// reported with zero smoke but still feed later backgrounds.
pub fn detect_frames<S: FrameSource + ?Sized>(
    frames: &S,
    params: &SmokeParams,
) -> Result<Vec<SmokeFrameResult>> {
    params.validate()?;
    let n = frames.frame_count();
    if n == 0 {
        return Err(Error::invalid("dataset", "no frames to detect on"));
    }
    let mut history: VecDeque<RgbImage> = VecDeque::with_capacity(params.bg_window + 1);
    let mut results = Vec::with_capacity(n);
    for index in 0..n {
        let frame = frames.load_frame(index)?;
        if let Some(first) = history.front() {
            if first.dimensions() != frame.dimensions() {
                return Err(Error::invalid(format!("frame {index}"), "dimensions differ from dataset"));
            }
        }
        let is_daytime = mean_luminance(&frame) > params.daytime_luminance;
        let result = if is_daytime {
            let window: Vec<&RgbImage> = if history.is_empty() {
                vec![&frame]
            } else {
                history.iter().collect()
            };
            let mask = smoke_mask(&frame, &window, params);
            let comps = components(&mask, frame.width(), frame.height(), params.min_component_area);
            SmokeFrameResult {
                frame_index: index,
                smoke_pixel_count: comps.iter().map(|(a, _)| a).sum(),
                is_daytime,
                component_boxes: comps.into_iter().map(|(_, b)| b).collect(),
            }
        } else {
            SmokeFrameResult {
                frame_index: index,
                smoke_pixel_count: 0,
                is_daytime,
                component_boxes: Vec::new(),
            }
        };
        results.push(result);
        if history.len() == params.bg_window {
            history.pop_front();
        }
        history.push_back(frame);
    }
    Ok(results)
}
