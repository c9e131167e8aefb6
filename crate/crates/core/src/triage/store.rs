//! Patient records persisted as a single JSON array, replaced atomically on
//! every write.
//!
//! Writers are serialised; readers see the last committed snapshot and never
//! block on a write in progress.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, TimeDelta, Utc};
use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use tempfile::NamedTempFile;

use super::{PatientRecord, TriageError};

type Snapshot = Arc<BTreeMap<String, PatientRecord>>;

#[derive(Debug)]
pub struct PatientStore {
    path: PathBuf,
    snapshot: RwLock<Snapshot>,
    /// Held for the whole of a write; stores the last issued timestamp.
    writer: Mutex<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpsertOutcome {
    pub record: PatientRecord,
    pub created: bool,
}

impl PatientStore {
    /// Opens the store at `path`; a missing file is an empty store.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, TriageError> {
        let path = path.into();
        let records: Vec<PatientRecord> = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut map = BTreeMap::new();
        let mut last = DateTime::UNIX_EPOCH;
        for r in records {
            r.validate()?;
            last = last.max(r.updated_at);
            if map.contains_key(&r.id) {
                return Err(TriageError::DuplicateId(r.id));
            }
            map.insert(r.id.clone(), r);
        }
        Ok(Self {
            path,
            snapshot: RwLock::new(Arc::new(map)),
            writer: Mutex::new(last),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn snapshot(&self) -> Snapshot {
        Arc::clone(&self.snapshot.read())
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot().is_empty()
    }

    pub fn get(&self, id: &str) -> Option<PatientRecord> {
        self.snapshot().get(id).cloned()
    }

    /// Every record, in id order.
    pub fn all(&self) -> Vec<PatientRecord> {
        self.snapshot().values().cloned().collect()
    }

    /// Inserts or replaces by id. A replacement keeps the original
    /// `created_at`; a new record without one gets the current time.
    /// `updated_at` always advances.
    pub fn upsert(&self, mut record: PatientRecord) -> Result<UpsertOutcome, TriageError> {
        record.validate()?;
        let mut last = self.writer.lock();
        let now = next_stamp(*last);
        let current = self.snapshot();
        let created = match current.get(&record.id) {
            Some(existing) => {
                record.created_at = existing.created_at;
                false
            }
            None => {
                if record.created_at == DateTime::UNIX_EPOCH {
                    record.created_at = now;
                }
                true
            }
        };
        record.updated_at = now;

        let mut next = (*current).clone();
        next.insert(record.id.clone(), record.clone());
        self.commit(next)?;
        *last = now;
        Ok(UpsertOutcome { record, created })
    }

    pub fn delete(&self, id: &str) -> Result<PatientRecord, TriageError> {
        let _guard = self.writer.lock();
        let current = self.snapshot();
        let mut next = (*current).clone();
        let removed = next
            .remove(id)
            .ok_or_else(|| TriageError::NotFound(id.to_string()))?;
        self.commit(next)?;
        Ok(removed)
    }

    /// Case-insensitive name substring and/or exact age, newest update first.
    pub fn search(
        &self,
        name: Option<&str>,
        age: Option<u32>,
    ) -> Result<Vec<PatientRecord>, TriageError> {
        let name = name.map(str::trim).filter(|n| !n.is_empty());
        if name.is_none() && age.is_none() {
            return Err(TriageError::MissingCriteria);
        }
        let needle = name.map(str::to_lowercase);
        let mut hits: Vec<PatientRecord> = self
            .snapshot()
            .values()
            .filter(|r| {
                needle
                    .as_deref()
                    .is_none_or(|n| r.name.to_lowercase().contains(n))
                    && age.is_none_or(|a| r.age == a)
            })
            .cloned()
            .collect();
        hits.sort_by(|a, b| {
            b.updated_at
                .cmp(&a.updated_at)
                .then_with(|| a.id.cmp(&b.id))
        });
        Ok(hits)
    }

    fn commit(&self, next: BTreeMap<String, PatientRecord>) -> Result<(), TriageError> {
        let records: Vec<&PatientRecord> = next.values().collect();
        let bytes = serde_json::to_vec_pretty(&records)?;
        let dir = match self.path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        fs::create_dir_all(dir)?;
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.path).map_err(|e| e.error)?;
        *self.snapshot.write() = Arc::new(next);
        Ok(())
    }
}

fn next_stamp(last: DateTime<Utc>) -> DateTime<Utc> {
    let now = Utc::now();
    if now > last {
        now
    } else {
        last + TimeDelta::microseconds(1)
    }
}
