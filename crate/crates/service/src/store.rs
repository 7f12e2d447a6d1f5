//! File-backed campaign and trace store.
//!
//! ```text
//! {root}/campaigns/{id}/log.ndjson     append-only CampaignEvent lines
//! {root}/campaigns/{id}/snapshot.json  state after the last logged event
//! {root}/traces/{sha256}/force.csv
//! {root}/traces/{sha256}/kin.csv
//! ```
//!
//! The log is the source of truth. A mutation appends and syncs its event
//! before the snapshot is atomically replaced, so a crash between the two
//! steps is repaired on the next [`Store::open`] by replaying the log.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use droptest::campaign::{CampaignConfig, CampaignEvent, CampaignState, Height, PartSpec, TrialInput, TrialRecord};
use droptest::trace::{
    force_trace_to_csv, ingest_force_trace, ingest_kin_trace, kin_trace_to_csv, ForceTrace,
    KinTrace, TrialAnalysis,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ServiceError};

const LOG: &str = "log.ndjson";
const SNAPSHOT: &str = "snapshot.json";

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

/// Result of recording a trial. `replayed` is set when the idempotency key
/// matched an earlier trial and nothing was written.
#[derive(Debug, Clone, PartialEq)]
pub struct Recorded {
    pub record: TrialRecord,
    pub replayed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrace {
    pub trace_id: String,
    pub force_csv: String,
    pub kin_csv: String,
}

pub fn validate_campaign_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ServiceError::Invalid(format!(
            "campaign id {id:?} must be 1-64 characters of letters, digits, '-' or '_'"
        )))
    }
}

fn is_trace_id(id: &str) -> bool {
    id.len() == 64 && id.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase())
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // A panic while holding the lock leaves no partial state behind: every
    // write is either a complete synced append or an atomic rename.
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // Make the rename itself durable.
        File::open(dir)?.sync_all()?;
    }
    Ok(())
}

impl Store {
    /// Opens (creating if needed) a store and repairs any campaign whose
    /// snapshot lags its log.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("campaigns"))?;
        fs::create_dir_all(root.join("traces"))?;
        let store = Self {
            root,
            locks: Mutex::new(HashMap::new()),
        };
        for id in store.campaign_ids()? {
            store.recover(&id)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn campaign_dir(&self, id: &str) -> PathBuf {
        self.root.join("campaigns").join(id)
    }

    fn trace_dir(&self, id: &str) -> PathBuf {
        self.root.join("traces").join(id)
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        lock(&self.locks).entry(id.to_owned()).or_default().clone()
    }

    pub fn campaign_ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("campaigns"))? {
            let entry = entry?;
            if entry.path().join(LOG).exists() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Reads the event log. A final line without its newline is a write that
    /// was never acknowledged and is skipped.
    pub fn events(&self, id: &str) -> Result<Vec<CampaignEvent>> {
        validate_campaign_id(id)?;
        let path = self.campaign_dir(id).join(LOG);
        let file = File::open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ServiceError::NotFound(format!("campaign {id}")),
            _ => e.into(),
        })?;
        let mut events = Vec::new();
        let mut reader = BufReader::new(file);
        let mut line = String::new();
        let mut n = 0;
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            n += 1;
            if !line.ends_with('\n') {
                break;
            }
            let event = serde_json::from_str(line.trim_end())
                .map_err(|e| ServiceError::Corrupt(format!("{}: line {n}: {e}", path.display())))?;
            events.push(event);
        }
        Ok(events)
    }

    fn replay(&self, id: &str) -> Result<CampaignState> {
        let events = self.events(id)?;
        CampaignState::replay(&events).map_err(|e| ServiceError::Corrupt(format!("campaign {id}: {e}")))
    }

    fn recover(&self, id: &str) -> Result<()> {
        let guard = self.lock_for(id);
        let _held = lock(&guard);
        let dir = self.campaign_dir(id);
        // Drop a torn tail so the next append starts on a fresh line.
        let log_path = dir.join(LOG);
        let bytes = fs::read(&log_path)?;
        if let Some(last_newline) = bytes.iter().rposition(|&b| b == b'\n') {
            if last_newline + 1 != bytes.len() {
                let f = OpenOptions::new().write(true).open(&log_path)?;
                f.set_len(last_newline as u64 + 1)?;
                f.sync_all()?;
            }
        } else if !bytes.is_empty() {
            OpenOptions::new().write(true).open(&log_path)?.set_len(0)?;
        }
        let state = self.replay(id)?;
        let stored = fs::read(dir.join(SNAPSHOT)).ok();
        let fresh = serde_json::to_vec_pretty(&state).expect("state serializes");
        if stored.as_deref() != Some(fresh.as_slice()) {
            write_atomic(&dir.join(SNAPSHOT), &fresh)?;
        }
        Ok(())
    }

    fn append(&self, id: &str, event: &CampaignEvent) -> Result<()> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.campaign_dir(id).join(LOG))?;
        f.write_all(line.as_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    fn write_snapshot(&self, id: &str, state: &CampaignState) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(state).expect("state serializes");
        write_atomic(&self.campaign_dir(id).join(SNAPSHOT), &bytes)
    }

    /// Creates a campaign. Re-creating an existing id with the same part and
    /// config returns the stored campaign with `created = false`; a different
    /// body is a conflict.
    pub fn create_campaign(
        &self,
        id: Option<&str>,
        part: PartSpec,
        config: CampaignConfig,
    ) -> Result<(String, CampaignState, bool)> {
        let id = match id {
            Some(id) => id.to_owned(),
            None => uuid::Uuid::new_v4().simple().to_string(),
        };
        validate_campaign_id(&id)?;
        let state = CampaignState::new(part.clone(), config.clone())?;
        let guard = self.lock_for(&id);
        let _held = lock(&guard);
        let dir = self.campaign_dir(&id);
        if dir.join(LOG).exists() {
            let existing = self.replay(&id)?;
            if existing.part == part && existing.config == config {
                return Ok((id, existing, false));
            }
            return Err(ServiceError::Conflict(format!(
                "campaign {id} already exists with a different part or config"
            )));
        }
        fs::create_dir_all(&dir)?;
        self.append(&id, &CampaignEvent::Created { part, config })?;
        self.write_snapshot(&id, &state)?;
        Ok((id, state, true))
    }

    /// Current state as of the last acknowledged write.
    pub fn campaign(&self, id: &str) -> Result<CampaignState> {
        validate_campaign_id(id)?;
        let path = self.campaign_dir(id).join(SNAPSHOT);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ServiceError::NotFound(format!("campaign {id}")),
            _ => e.into(),
        })?;
        serde_json::from_slice(&bytes)
            .map_err(|e| ServiceError::Corrupt(format!("{}: {e}", path.display())))
    }

    pub fn record_trial(&self, id: &str, input: &TrialInput) -> Result<Recorded> {
        validate_campaign_id(id)?;
        if let Some(trace) = input.trace_id.as_deref() {
            if !self.has_trace(trace) {
                return Err(ServiceError::Invalid(format!("trace {trace} has not been uploaded")));
            }
        }
        let guard = self.lock_for(id);
        let _held = lock(&guard);
        let state = self.replay(id)?;
        if let Some(key) = input.idempotency_key.as_deref() {
            if let Some(record) = state.find_trial_by_key(key) {
                let same = Height::from_cm(input.height_cm).ok() == Some(record.height_cm)
                    && input.outcome == record.outcome
                    && input.peak_force_n == record.peak_force_n
                    && input.trace_id == record.trace_id;
                if !same {
                    return Err(ServiceError::Conflict(format!(
                        "idempotency key {key:?} was already used for a different trial"
                    )));
                }
                return Ok(Recorded {
                    record: record.clone(),
                    replayed: true,
                });
            }
        }
        let next = state.record_trial(input)?;
        self.append(id, &CampaignEvent::TrialRecorded(input.clone()))?;
        self.write_snapshot(id, &next)?;
        Ok(Recorded {
            record: next.trials.last().expect("a trial was just recorded").clone(),
            replayed: false,
        })
    }

    pub fn attach_analysis(
        &self,
        id: &str,
        seq: u64,
        analysis: Option<TrialAnalysis>,
        error: Option<String>,
    ) -> Result<CampaignState> {
        validate_campaign_id(id)?;
        let guard = self.lock_for(id);
        let _held = lock(&guard);
        let state = self.replay(id)?;
        let next = state.attach_analysis(seq, analysis, error.clone())?;
        self.append(id, &CampaignEvent::AnalysisAttached { seq, analysis, error })?;
        self.write_snapshot(id, &next)?;
        Ok(next)
    }

    /// Stores a force/kinematics pair under the hash of its canonical CSV.
    /// Returns the id and whether it was newly written.
    pub fn put_trace(&self, force_csv: &str, kin_csv: &str) -> Result<(String, bool)> {
        let force = ingest_force_trace(force_csv.as_bytes())?;
        let kin = ingest_kin_trace(kin_csv.as_bytes())?;
        let force_csv = force_trace_to_csv(&force);
        let kin_csv = kin_trace_to_csv(&kin);
        let mut hasher = Sha256::new();
        for part in [&force_csv, &kin_csv] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        let id = hex::encode(hasher.finalize());
        let dir = self.trace_dir(&id);
        if dir.join("kin.csv").exists() {
            return Ok((id, false));
        }
        let guard = self.lock_for(&format!("trace:{id}"));
        let _held = lock(&guard);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("force.csv"), force_csv.as_bytes())?;
        write_atomic(&dir.join("kin.csv"), kin_csv.as_bytes())?;
        Ok((id, true))
    }

    pub fn has_trace(&self, id: &str) -> bool {
        is_trace_id(id) && self.trace_dir(id).join("kin.csv").exists()
    }

    pub fn trace(&self, id: &str) -> Result<StoredTrace> {
        if !self.has_trace(id) {
            return Err(ServiceError::NotFound(format!("trace {id}")));
        }
        let dir = self.trace_dir(id);
        Ok(StoredTrace {
            trace_id: id.to_owned(),
            force_csv: fs::read_to_string(dir.join("force.csv"))?,
            kin_csv: fs::read_to_string(dir.join("kin.csv"))?,
        })
    }

    pub fn load_trace(&self, id: &str) -> Result<(ForceTrace, KinTrace)> {
        let t = self.trace(id)?;
        let force = ingest_force_trace(t.force_csv.as_bytes())
            .map_err(|e| ServiceError::Corrupt(format!("trace {id}: {e}")))?;
        let kin = ingest_kin_trace(t.kin_csv.as_bytes())
            .map_err(|e| ServiceError::Corrupt(format!("trace {id}: {e}")))?;
        Ok((force, kin))
    }
}
