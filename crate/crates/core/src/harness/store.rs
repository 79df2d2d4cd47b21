//! Append-only line-delimited record files, resumable by key.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use tracing::warn;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Decode {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Something stored under a unique, totally ordered key.
pub trait Keyed {
    type Key: Ord + Clone + Send;
    fn key(&self) -> Self::Key;
}

/// Records already on disk are loaded on open; [`RecordStore::insert`]
/// appends (and flushes) one line per new record; a duplicate key is a
/// no-op, which makes retries idempotent. [`RecordStore::finalize`]
/// rewrites the file sorted by key so identical runs give identical bytes.
pub struct RecordStore<T: Keyed> {
    path: PathBuf,
    inner: Mutex<Inner<T>>,
}

struct Inner<T: Keyed> {
    records: BTreeMap<T::Key, T>,
    file: File,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl<T: Keyed + Serialize + DeserializeOwned + Clone> RecordStore<T> {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let records = if path.exists() { load(&path)? } else { BTreeMap::new() };
        // Rewriting drops any torn tail so later appends start on a fresh line.
        if path.exists() && !std::fs::read(&path).map_err(io_err(&path))?.ends_with(b"\n") {
            write_sorted(&path, records.values())?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        Ok(RecordStore {
            path,
            inner: Mutex::new(Inner { records, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &T::Key) -> Option<T> {
        self.lock().records.get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Append `record` unless its key is already present. Returns whether
    /// it was written.
    pub fn insert(&self, record: T) -> Result<bool, StoreError> {
        let mut g = self.lock();
        let key = record.key();
        if g.records.contains_key(&key) {
            return Ok(false);
        }
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        g.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        g.file.flush().map_err(io_err(&self.path))?;
        g.records.insert(key, record);
        Ok(true)
    }

    pub fn records(&self) -> Vec<T> {
        self.lock().records.values().cloned().collect()
    }

    /// Rewrite the file in key order.
    pub fn finalize(&self) -> Result<(), StoreError> {
        let mut g = self.lock();
        write_sorted(&self.path, g.records.values())?;
        g.file = OpenOptions::new().append(true).open(&self.path).map_err(io_err(&self.path))?;
        Ok(())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner<T>> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Read every record of a file. A torn final line (from an interrupted
/// write) is dropped with a warning; any other bad line is an error.
pub fn load<T: Keyed + DeserializeOwned>(path: &Path) -> Result<BTreeMap<T::Key, T>, StoreError> {
    let f = File::open(path).map_err(io_err(path))?;
    let lines: Vec<String> = BufReader::new(f).lines().collect::<Result<_, _>>().map_err(io_err(path))?;
    let mut out = BTreeMap::new();
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    for (i, l) in lines.iter().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(l) {
            Ok(r) => {
                out.insert(r.key(), r);
            }
            Err(e) if Some(i) == last && e.is_eof() => warn!(path = %path.display(), line = i + 1, "dropping torn record"),
            Err(source) => {
                return Err(StoreError::Decode {
                    path: path.to_path_buf(),
                    line: i + 1,
                    source,
                })
            }
        }
    }
    Ok(out)
}

/// Read records in file order without keying them.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, l) in BufReader::new(f).lines().enumerate() {
        let l = l.map_err(io_err(path))?;
        if l.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&l).map_err(|source| StoreError::Decode {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Write records one per line through a temporary file and rename.
pub fn write_sorted<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<(), StoreError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(tmp, "{line}").map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| StoreError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct R {
        k: u32,
        v: String,
    }

    impl Keyed for R {
        type Key = u32;
        fn key(&self) -> u32 {
            self.k
        }
    }

    #[test]
    fn resume_dedup_and_sort() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/r.jsonl");
        let s = RecordStore::<R>::open(&p).unwrap();
        assert!(s.insert(R { k: 2, v: "b".into() }).unwrap());
        assert!(s.insert(R { k: 1, v: "a".into() }).unwrap());
        drop(s);
        // Simulate an interrupted append.
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(b"{\"k\": 3, \"v\"").unwrap();
        drop(f);
        let s = RecordStore::<R>::open(&p).unwrap();
        assert_eq!(s.len(), 2);
        assert!(!s.insert(R { k: 2, v: "other".into() }).unwrap());
        assert_eq!(s.get(&2).unwrap().v, "b");
        s.finalize().unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "{\"k\":1,\"v\":\"a\"}\n{\"k\":2,\"v\":\"b\"}\n");
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        std::fs::write(&p, "{\"k\":1,\"v\":\"a\"}\nnot json\n{\"k\":2,\"v\":\"b\"}\n").unwrap();
        assert!(matches!(RecordStore::<R>::open(&p), Err(StoreError::Decode { line: 2, .. })));
    }
}
