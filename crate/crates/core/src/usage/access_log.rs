use std::net::IpAddr;
use std::sync::LazyLock;

use chrono::{DateTime, FixedOffset};
use regex::Regex;
use serde::{Deserialize, Serialize};

/// One request from an NCSA common/combined format access log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLogEntry {
    pub ip: IpAddr,
    pub request_time: DateTime<FixedOffset>,
    pub method: String,
    pub path_and_query: String,
    pub status: u16,
    pub bytes: Option<u64>,
    pub referer: Option<String>,
    pub user_agent: Option<String>,
}

pub const LOG_TIME_FORMAT: &str = "%d/%b/%Y:%H:%M:%S %z";

static LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"^(\S+) \S+ \S+ \[([^\]]+)\] "([A-Z]+) (\S+)(?: [^"]*)?" (\d{3}) (\d+|-)(?: "((?:[^"\\]|\\.)*)" "((?:[^"\\]|\\.)*)")?\s*$"#,
    )
    .expect("static regex")
});

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn quoted(s: Option<&str>) -> String {
    match s {
        None => "-".into(),
        Some(v) => v.replace('\\', "\\\\").replace('"', "\\\""),
    }
}

impl AccessLogEntry {
    /// Parse one log line; `None` for anything malformed.
    pub fn parse(line: &str) -> Option<Self> {
        let c = LINE.captures(line)?;
        let ip = c[1].parse().ok()?;
        let request_time = DateTime::parse_from_str(&c[2], LOG_TIME_FORMAT).ok()?;
        let dash_none = |s: String| (s != "-").then_some(s);
        Some(Self {
            ip,
            request_time,
            method: c[3].to_owned(),
            path_and_query: c[4].to_owned(),
            status: c[5].parse().ok()?,
            bytes: c[6].parse().ok(),
            referer: c.get(7).map(|m| unescape(m.as_str())).and_then(dash_none),
            user_agent: c.get(8).map(|m| unescape(m.as_str())).and_then(dash_none),
        })
    }

    /// Render as a combined-format line (no trailing newline).
    pub fn to_line(&self) -> String {
        format!(
            "{} - - [{}] \"{} {} HTTP/1.1\" {} {} \"{}\" \"{}\"",
            self.ip,
            self.request_time.format(LOG_TIME_FORMAT),
            self.method,
            self.path_and_query,
            self.status,
            self.bytes.map_or_else(|| "-".to_owned(), |b| b.to_string()),
            quoted(self.referer.as_deref()),
            quoted(self.user_agent.as_deref()),
        )
    }

    pub fn path(&self) -> &str {
        self.path_and_query.split('?').next().unwrap_or_default()
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// A successful GET of a rendered thumbnail.
    pub fn is_thumbnail_view(&self) -> bool {
        self.method == "GET" && self.is_success() && self.path() == "/thumbnail"
    }

    /// A successful thumbnail creation through the tool endpoint.
    pub fn is_thumbnail_creation(&self) -> bool {
        self.method == "POST" && self.is_success() && self.path() == "/api/thumbnail"
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub lines: u64,
    pub entries: u64,
    pub malformed: u64,
}

/// Parse log lines, skipping (and counting) malformed ones. Blank lines are
/// ignored entirely.
pub fn parse_log<I, S>(lines: I) -> (Vec<AccessLogEntry>, ParseStats)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut stats = ParseStats::default();
    let mut out = Vec::new();
    for line in lines {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        match AccessLogEntry::parse(line) {
            Some(e) => {
                stats.entries += 1;
                out.push(e);
            }
            None => stats.malformed += 1,
        }
    }
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE_OK: &str = r#"203.0.113.7 - - [10/Aug/2015:13:55:36 -0400] "GET /thumbnail?root=d1&boundsLTRB=0,0,10,10&width=10&height=10&startFrame=0&nframes=1&fps=12&format=gif&origin=human HTTP/1.1" 200 2326 "http://example.org/" "Mozilla/5.0 (X11; \"quoted\")""#;

    #[test]
    fn parses_combined_line() {
        let (entries, stats) = parse_log([LINE_OK]);
        assert_eq!(stats, ParseStats { lines: 1, entries: 1, malformed: 0 });
        let e = &entries[0];
        assert_eq!(e.ip.to_string(), "203.0.113.7");
        assert_eq!(e.status, 200);
        assert_eq!(e.bytes, Some(2326));
        assert_eq!(e.user_agent.as_deref(), Some(r#"Mozilla/5.0 (X11; "quoted")"#));
        assert_eq!(e.request_time.to_rfc3339(), "2015-08-10T13:55:36-04:00");
        assert!(e.is_thumbnail_view());
        assert_eq!(AccessLogEntry::parse(&e.to_line()).unwrap(), *e);
    }

    #[test]
    fn garbage_is_counted() {
        let (entries, stats) = parse_log(["not a log line", "", "1.2.3.4 - - [bad time] \"GET / HTTP/1.1\" 200 1"]);
        assert!(entries.is_empty());
        assert_eq!(stats.malformed, 2);
        assert_eq!(stats.lines, 2);
    }

    #[test]
    fn not_found_is_entry_but_not_view() {
        let line = LINE_OK.replace("\" 200 2326", "\" 404 12");
        let (entries, _) = parse_log([line]);
        assert_eq!(entries.len(), 1);
        assert!(!entries[0].is_thumbnail_view());
    }

    #[test]
    fn common_format_and_ipv6() {
        let line = r#"2001:db8::1 - - [03/Aug/2015:00:00:00 +0000] "POST /api/thumbnail HTTP/1.0" 201 -"#;
        let e = AccessLogEntry::parse(line).unwrap();
        assert!(e.is_thumbnail_creation());
        assert_eq!(e.bytes, None);
        assert_eq!(e.user_agent, None);
    }
}
