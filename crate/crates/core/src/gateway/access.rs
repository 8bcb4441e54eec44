use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{IoContext, Result};
use crate::usage::AccessLogEntry;

/// Append-only combined-format access log. Each entry goes out in a single
/// write of one whole line, so concurrent requests never interleave.
pub struct AccessLogWriter {
    path: PathBuf,
    file: Mutex<File>,
}

impl AccessLogWriter {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).at(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).at(path)?;
        Ok(AccessLogWriter {
            path: path.to_owned(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &AccessLogEntry) -> Result<()> {
        let mut line = entry.to_line();
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes()).at(&self.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{FixedOffset, TimeZone};

    #[test]
    fn lines_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logs/access.log");
        let log = AccessLogWriter::open(&path).unwrap();
        let entry = AccessLogEntry {
            ip: "10.0.0.7".parse().unwrap(),
            request_time: FixedOffset::east_opt(0).unwrap().with_ymd_and_hms(2015, 8, 3, 12, 0, 0).unwrap(),
            method: "GET".into(),
            path_and_query: "/thumbnail?root=a&width=1".into(),
            status: 200,
            bytes: Some(10),
            referer: None,
            user_agent: Some("test \"agent\"".into()),
        };
        log.append(&entry).unwrap();
        log.append(&entry).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(AccessLogEntry::parse(lines[1]).unwrap(), entry);
    }
}
