//! On-disk layout of a plumewatch data root.
//!
//! ```text
//! <root>/
//!   datasets/<id>/dataset.json                 dataset manifest
//!   datasets/<id>/frames/<YYYYMMDDTHHMMSSZ>.jpg
//!   datasets/<id>/tiles/pyramid.json           written last, marks a complete build
//!   datasets/<id>/tiles/<level>/<row>_<col>/<segment>.bin
//!   datasets/<id>/smoke/frames.csv             per-frame smoke counts
//!   datasets/<id>/smoke/events.json
//!   telemetry/journal.jsonl
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, IoContext, Result};
use crate::timelapse::{Dataset, DatasetId};

#[derive(Debug, Clone)]
pub struct DataRoot {
    root: PathBuf,
}

impl DataRoot {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// Create the root directory if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("datasets")).at(&root)?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn dataset_dir(&self, id: &DatasetId) -> PathBuf {
        self.root.join("datasets").join(id.as_str())
    }

    pub fn frames_dir(&self, id: &DatasetId) -> PathBuf {
        self.dataset_dir(id).join("frames")
    }

    pub fn tiles_dir(&self, id: &DatasetId) -> PathBuf {
        self.dataset_dir(id).join("tiles")
    }

    pub fn smoke_dir(&self, id: &DatasetId) -> PathBuf {
        self.dataset_dir(id).join("smoke")
    }

    pub fn telemetry_journal(&self) -> PathBuf {
        self.root.join("telemetry").join("journal.jsonl")
    }

    fn manifest_path(&self, id: &DatasetId) -> PathBuf {
        self.dataset_dir(id).join("dataset.json")
    }

    pub fn save_dataset(&self, dataset: &Dataset) -> Result<()> {
        let path = self.manifest_path(&dataset.id);
        let json = serde_json::to_vec_pretty(dataset).map_err(|e| Error::Encode(e.to_string()))?;
        write_atomic(&path, &json)
    }

    pub fn load_dataset(&self, id: &DatasetId) -> Result<Dataset> {
        let path = self.manifest_path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(format!("dataset {id}")))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        serde_json::from_slice(&bytes).map_err(|e| Error::invalid(path.display().to_string(), e.to_string()))
    }

    /// All ingested datasets, sorted by id.
    pub fn list_datasets(&self) -> Result<Vec<Dataset>> {
        let dir = self.root.join("datasets");
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(dir, e)),
        };
        let mut out = Vec::new();
        for entry in entries {
            let entry = entry.at(&dir)?;
            let Some(name) = entry.file_name().to_str().map(str::to_owned) else {
                continue;
            };
            let Ok(id) = DatasetId::new(&name) else { continue };
            if entry.path().join("dataset.json").is_file() {
                out.push(self.load_dataset(&id)?);
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }
}

/// Write via a sibling temp file and rename, so readers never see a torn file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).at(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

struct BusySet {
    busy: std::sync::Mutex<std::collections::HashSet<(PathBuf, DatasetId)>>,
    freed: std::sync::Condvar,
}

static DATASET_LOCKS: std::sync::LazyLock<BusySet> = std::sync::LazyLock::new(|| BusySet {
    busy: Default::default(),
    freed: std::sync::Condvar::new(),
});

/// Process-wide exclusive lock for writers of one dataset (ingest, tiling,
/// detection). Readers do not take it.
pub struct DatasetGuard {
    key: (PathBuf, DatasetId),
}

pub fn lock_dataset(root: &DataRoot, id: &DatasetId) -> DatasetGuard {
    let key = (root.root.clone(), id.clone());
    let mut busy = DATASET_LOCKS.busy.lock().unwrap_or_else(|e| e.into_inner());
    while busy.contains(&key) {
        busy = DATASET_LOCKS.freed.wait(busy).unwrap_or_else(|e| e.into_inner());
    }
    busy.insert(key.clone());
    DatasetGuard { key }
}

impl Drop for DatasetGuard {
    fn drop(&mut self) {
        let mut busy = DATASET_LOCKS.busy.lock().unwrap_or_else(|e| e.into_inner());
        busy.remove(&self.key);
        DATASET_LOCKS.freed.notify_all();
    }
}
