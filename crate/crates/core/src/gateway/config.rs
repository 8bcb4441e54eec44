use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono_tz::Tz;
use ipnet::IpNet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::usage::{parse_cidrs, parse_tz};

/// Environment variable naming a config file to use when none is given.
pub const CONFIG_ENV: &str = "PLUMEWATCH_CONFIG";

/// Service settings, read from a flat TOML file.
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// data_root = "/srv/plumewatch"
/// timezone = "America/New_York"
/// exclude_cidrs = ["128.2.0.0/16"]
/// thumbnail_rate_limit = 5.0
/// log_path = "/var/log/plumewatch/access.log"
/// admin_token = "change-me"
/// trust_forwarded_for = false
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_root: PathBuf,
    /// Study time zone, used for view dates in usage analytics.
    pub timezone: String,
    pub exclude_cidrs: Vec<String>,
    /// Thumbnail renders per second per client IP; 0 disables the limit.
    pub thumbnail_rate_limit: f64,
    /// Access log; defaults to `<data_root>/logs/access.log`.
    pub log_path: Option<PathBuf>,
    /// Bearer token required on the telemetry write routes when set.
    pub admin_token: Option<String>,
    /// Take the client IP from `X-Forwarded-For` (behind a reverse proxy).
    pub trust_forwarded_for: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_root: PathBuf::from("data"),
            timezone: "UTC".into(),
            exclude_cidrs: Vec::new(),
            thumbnail_rate_limit: 5.0,
            log_path: None,
            admin_token: None,
            trust_forwarded_for: false,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Invalid { reason, .. } => Error::invalid(format!("config {}", path.display()), reason),
            other => other,
        })
    }

    /// `explicit`, else the file named by `PLUMEWATCH_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn tz(&self) -> Result<Tz> {
        parse_tz(&self.timezone)
    }

    pub fn exclusions(&self) -> Result<Vec<IpNet>> {
        parse_cidrs(&self.exclude_cidrs.join(","))
    }

    pub fn access_log_path(&self) -> PathBuf {
        self.log_path
            .clone()
            .unwrap_or_else(|| self.data_root.join("logs").join("access.log"))
    }

    /// Checks needed before serving.
    pub fn validate(&self) -> Result<()> {
        if !self.data_root.is_dir() {
            return Err(Error::invalid(
                "data_root",
                format!("{} is not a directory", self.data_root.display()),
            ));
        }
        self.tz()?;
        self.exclusions()?;
        if !self.thumbnail_rate_limit.is_finite() || self.thumbnail_rate_limit < 0.0 {
            return Err(Error::invalid("thumbnail_rate_limit", "must be a non-negative number"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_toml() {
        let c = ServiceConfig::from_toml(
            "listen = \"0.0.0.0:9000\"\ndata_root = \"/tmp/x\"\ntimezone = \"America/New_York\"\nexclude_cidrs = [\"128.2.0.0/16\"]\n",
        )
        .unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.tz().unwrap(), chrono_tz::America::New_York);
        assert_eq!(c.exclusions().unwrap().len(), 1);
        assert_eq!(c.thumbnail_rate_limit, 5.0);
        assert_eq!(c.access_log_path(), PathBuf::from("/tmp/x/logs/access.log"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ServiceConfig::from_toml("colour = 1").is_err());
        let c = ServiceConfig::from_toml("timezone = \"Nowhere/Land\"").unwrap();
        assert!(c.tz().is_err());
        let dir = tempfile::tempdir().unwrap();
        let c = ServiceConfig {
            data_root: dir.path().into(),
            ..ServiceConfig::default()
        };
        assert!(c.validate().is_ok());
        let c = ServiceConfig {
            data_root: dir.path().join("missing"),
            ..ServiceConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
