use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning knobs of the smoke detector. Defaults fit small synthetic scenes;
/// real sites need their own values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmokeParams {
    /// Frames in the trailing median background.
    pub bg_window: usize,
    /// Max-channel difference from background that counts as foreground.
    pub diff_threshold: u8,
    /// Smoke pixels have HSV saturation below this.
    pub max_saturation: f64,
    /// Smoke pixels have HSV value above this.
    pub min_value: f64,
    /// Components smaller than this many pixels are discarded.
    pub min_component_area: usize,
    /// Frames whose mean luminance is at or below this are night frames.
    pub daytime_luminance: f64,
    /// Smoke-pixel count at which a frame is part of an event.
    pub event_threshold: u64,
    pub min_event_frames: usize,
    /// Runs separated by fewer below-threshold frames than this are merged.
    pub merge_gap: usize,
}

impl Default for SmokeParams {
    fn default() -> Self {
        Self {
            bg_window: 60,
            diff_threshold: 20,
            max_saturation: 0.25,
            min_value: 0.5,
            min_component_area: 64,
            daytime_luminance: 50.0,
            event_threshold: 500,
            min_event_frames: 3,
            merge_gap: 12,
        }
    }
}

impl SmokeParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bg_window", self.bg_window > 0),
            ("diff_threshold", self.diff_threshold > 0),
            ("min_component_area", self.min_component_area > 0),
            ("event_threshold", self.event_threshold > 0),
            ("min_event_frames", self.min_event_frames > 0),
            ("merge_gap", self.merge_gap > 0),
            (
                "daytime_luminance",
                self.daytime_luminance > 0.0 && self.daytime_luminance <= 255.0,
            ),
        ];
        for (name, ok) in positive {
            if !ok {
                return Err(Error::invalid(name, "must be positive and in range"));
            }
        }
        for (name, v) in [("max_saturation", self.max_saturation), ("min_value", self.min_value)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, "must be in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Parse a flat `key = value` file. `#` starts a comment; keys not
    /// present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("params line {}", lineno + 1), "expected key=value")
            })?;
            let key = key.trim();
            let value = value.trim();
            fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
                v.parse()
                    .map_err(|_| Error::invalid(key, format!("cannot parse {v:?}")))
            }
            match key {
                "bg_window" => p.bg_window = num(key, value)?,
                "diff_threshold" => p.diff_threshold = num(key, value)?,
                "max_saturation" => p.max_saturation = num(key, value)?,
                "min_value" => p.min_value = num(key, value)?,
                "min_component_area" => p.min_component_area = num(key, value)?,
                "daytime_luminance" => p.daytime_luminance = num(key, value)?,
                "event_threshold" => p.event_threshold = num(key, value)?,
                "min_event_frames" => p.min_event_frames = num(key, value)?,
                "merge_gap" => p.merge_gap = num(key, value)?,
                other => return Err(Error::invalid(other, "unknown smoke parameter")),
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bg_window={}", self.bg_window);
        let _ = writeln!(s, "diff_threshold={}", self.diff_threshold);
        let _ = writeln!(s, "max_saturation={}", self.max_saturation);
        let _ = writeln!(s, "min_value={}", self.min_value);
        let _ = writeln!(s, "min_component_area={}", self.min_component_area);
        let _ = writeln!(s, "daytime_luminance={}", self.daytime_luminance);
        let _ = writeln!(s, "event_threshold={}", self.event_threshold);
        let _ = writeln!(s, "min_event_frames={}", self.min_event_frames);
        let _ = writeln!(s, "merge_gap={}", self.merge_gap);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overrides_and_round_trips() {
        let p = SmokeParams::parse("# site A\nbg_window = 30\nmax_saturation=0.2  # tighter\n\n").unwrap();
        assert_eq!(p.bg_window, 30);
        assert_eq!(p.max_saturation, 0.2);
        assert_eq!(p.merge_gap, 12);
        assert_eq!(SmokeParams::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(SmokeParams::parse("bogus=1").is_err());
        assert!(SmokeParams::parse("bg_window").is_err());
        assert!(SmokeParams::parse("diff_threshold=256").is_err());
        assert!(SmokeParams::parse("min_value=1.5").is_err());
        assert!(SmokeParams::parse("bg_window=0").is_err());
    }
}
