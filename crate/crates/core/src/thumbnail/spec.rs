use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timelapse::{Dataset, DatasetId};

/// Who asked for a thumbnail: a person using the thumbnail tool, or the
/// smoke detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Human,
    Algorithm,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Human => "human",
            Origin::Algorithm => "algorithm",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Origin::Human),
            "algorithm" => Ok(Origin::Algorithm),
            other => Err(Error::invalid("origin", format!("unknown origin {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Gif,
    /// Accepted in URLs; rendering is not implemented.
    Mp4,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Gif => "gif",
            OutputFormat::Mp4 => "mp4",
        }
    }

    pub fn mime(self) -> &'static str {
        match self {
            OutputFormat::Gif => "image/gif",
            OutputFormat::Mp4 => "video/mp4",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gif" => Ok(OutputFormat::Gif),
            "mp4" => Ok(OutputFormat::Mp4),
            other => Err(Error::invalid("format", format!("unknown format {other:?}"))),
        }
    }
}

/// Crop box in native-resolution pixels, right/bottom exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl Bounds {
    pub fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> u32 {
        self.right.saturating_sub(self.left)
    }

    pub fn height(&self) -> u32 {
        self.bottom.saturating_sub(self.top)
    }
}

/// Everything needed to render one sharable animated image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThumbnailSpec {
    pub dataset_id: DatasetId,
    pub bounds: Bounds,
    pub out_width: u32,
    pub out_height: u32,
    pub start_frame: usize,
    pub nframes: u32,
    pub fps: u32,
    pub format: OutputFormat,
    pub origin: Origin,
}

impl ThumbnailSpec {
    /// Checks that need no dataset.
    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if b.left >= b.right {
            return Err(Error::invalid("boundsLTRB", "left ≥ right"));
        }
        if b.top >= b.bottom {
            return Err(Error::invalid("boundsLTRB", "top ≥ bottom"));
        }
        if self.out_width == 0 {
            return Err(Error::invalid("width", "must be positive"));
        }
        if self.out_height == 0 {
            return Err(Error::invalid("height", "must be positive"));
        }
        if self.nframes == 0 {
            return Err(Error::invalid("nframes", "must be at least 1"));
        }
        if self.fps == 0 {
            return Err(Error::invalid("fps", "must be positive"));
        }
        Ok(())
    }

    /// Full check against the dataset the spec points at.
    pub fn validate_for(&self, dataset: &Dataset) -> Result<()> {
        self.validate()?;
        if self.dataset_id != dataset.id {
            return Err(Error::invalid("root", "spec is for a different dataset"));
        }
        if self.bounds.right > dataset.frame_width {
            return Err(Error::invalid(
                "boundsLTRB",
                format!("right {} exceeds frame width {}", self.bounds.right, dataset.frame_width),
            ));
        }
        if self.bounds.bottom > dataset.frame_height {
            return Err(Error::invalid(
                "boundsLTRB",
                format!(
                    "bottom {} exceeds frame height {}",
                    self.bounds.bottom, dataset.frame_height
                ),
            ));
        }
        if self.start_frame + self.nframes as usize > dataset.frame_count() {
            return Err(Error::invalid(
                "nframes",
                format!(
                    "startFrame + nframes = {} exceeds {} frames",
                    self.start_frame + self.nframes as usize,
                    dataset.frame_count()
                ),
            ));
        }
        Ok(())
    }

    /// Playback length in seconds.
    pub fn duration_secs(&self) -> f64 {
        f64::from(self.nframes) / f64::from(self.fps)
    }

    /// The canonical URL. Parameter order and formatting are fixed so that
    /// the same spec always logs the same string.
    pub fn encode_url(&self) -> String {
        let b = &self.bounds;
        format!(
            "/thumbnail?root={}&boundsLTRB={},{},{},{}&width={}&height={}&startFrame={}&nframes={}&fps={}&format={}&origin={}",
            self.dataset_id,
            b.left,
            b.top,
            b.right,
            b.bottom,
            self.out_width,
            self.out_height,
            self.start_frame,
            self.nframes,
            self.fps,
            self.format.as_str(),
            self.origin.as_str(),
        )
    }

    /// Parse a thumbnail URL (absolute, path+query, or bare query).
    ///
    /// Unknown parameters are ignored and a missing `origin` means human.
    pub fn decode_url(url: &str) -> Result<Self> {
        let query = match url.split_once('?') {
            Some((_, q)) => q,
            None => url,
        };
        let query = query.split('#').next().unwrap_or_default();
        let mut params: Vec<(String, String)> = Vec::new();
        for (k, v) in url::form_urlencoded::parse(query.as_bytes()) {
            if !params.iter().any(|(seen, _)| *seen == k) {
                params.push((k.into_owned(), v.into_owned()));
            }
        }
        let get = |name: &str| -> Result<&str> {
            params
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::invalid(name, "missing required parameter"))
        };

        let dataset_id = DatasetId::new(get("root")?).map_err(|_| Error::invalid("root", "not a dataset id"))?;
        let raw_bounds = get("boundsLTRB")?;
        let parts: Vec<&str> = raw_bounds.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::invalid("boundsLTRB", "expected four comma-separated integers"));
        }
        let mut ltrb = [0u32; 4];
        for (slot, part) in ltrb.iter_mut().zip(&parts) {
            *slot = parse_uint(part).ok_or_else(|| Error::invalid("boundsLTRB", format!("{part:?} is not a non-negative integer")))?;
        }
        let uint = |name: &str| -> Result<u32> {
            let v = get(name)?;
            parse_uint(v).ok_or_else(|| Error::invalid(name, format!("{v:?} is not a non-negative integer")))
        };
        let origin = match params.iter().find(|(k, _)| k == "origin") {
            Some((_, v)) => v.parse()?,
            None => Origin::Human,
        };
        let spec = Self {
            dataset_id,
            bounds: Bounds::new(ltrb[0], ltrb[1], ltrb[2], ltrb[3]),
            out_width: uint("width")?,
            out_height: uint("height")?,
            start_frame: uint("startFrame")? as usize,
            nframes: uint("nframes")?,
            fps: uint("fps")?,
            format: get("format")?.parse()?,
            origin,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_uint(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}
