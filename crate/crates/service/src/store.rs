//! Append-only per-study log files: `<data_dir>/<study_id>.jsonl`, one
//! event record per line, in the same format as the export endpoint.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::ServiceError;
use crate::events::EventRecord;

#[derive(Debug, Clone)]
pub struct LogStore {
    dir: Option<PathBuf>,
}

fn storage<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> ServiceError + '_ {
    move |e| ServiceError::Storage(format!("{}: {e}", path.display()))
}

impl LogStore {
    /// Without a directory events live only in memory.
    pub fn new(dir: Option<PathBuf>) -> Result<Self, ServiceError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(storage(d))?;
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, study_id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{study_id}.jsonl")))
    }

    /// Appends and flushes one record before the caller applies it.
    pub fn append(&self, rec: &EventRecord) -> Result<(), ServiceError> {
        let Some(path) = self.path(&rec.study_id) else { return Ok(()) };
        let mut line = serde_json::to_vec(rec).map_err(storage(&path))?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(storage(&path))?;
        f.write_all(&line).map_err(storage(&path))?;
        f.sync_data().map_err(storage(&path))
    }

    /// Every study log in the directory, sorted by file name.
    pub fn load_all(&self) -> Result<Vec<Vec<EventRecord>>, ServiceError> {
        let Some(dir) = &self.dir else { return Ok(Vec::new()) };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(storage(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let f = File::open(p).map_err(storage(p))?;
                crb_core::jsonl::read_records(BufReader::new(f), &p.display().to_string())
                    .map_err(|e| ServiceError::Corrupt(e.to_string()))
            })
            .collect()
    }
}
