//! Append-only JSON Lines store of raw task responses, keyed by
//! (input, task id). Later lines override earlier ones on reload.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AnnotateError;

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    concept: String,
    task: String,
    response: String,
    timestamp: u64,
}

#[derive(Debug)]
pub struct AnnotationCache {
    path: PathBuf,
    entries: HashMap<(String, String), String>,
}

impl AnnotationCache {
    /// Opens (or creates) a cache file and loads its entries. Corrupt
    /// lines are skipped with a warning.
    pub fn open(path: &Path) -> Result<AnnotationCache, AnnotateError> {
        let mut entries = HashMap::new();
        match File::open(path) {
            Ok(file) => {
                for (lineno, line) in BufReader::new(file).lines().enumerate() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<CacheRecord>(&line) {
                        Ok(rec) => {
                            entries.insert((rec.concept, rec.task), rec.response);
                        }
                        Err(e) => {
                            log::warn!(
                                "cache {} line {}: skipped corrupt entry: {e}",
                                path.display(),
                                lineno + 1
                            );
                        }
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        Ok(AnnotationCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, input: &str, task_id: &str) -> Option<&str> {
        self.entries
            .get(&(input.to_string(), task_id.to_string()))
            .map(String::as_str)
    }

    /// Appends one record and updates the in-memory view.
    pub fn put(&mut self, input: &str, task_id: &str, response: &str) -> Result<(), AnnotateError> {
        let record = CacheRecord {
            concept: input.to_string(),
            task: task_id.to_string(),
            response: response.to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(file, "{line}")?;
        self.entries
            .insert((record.concept, record.task), record.response);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
