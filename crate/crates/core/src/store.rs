//! Durable belief store.
//!
//! One writer, many readers. Readers take an `Arc<StoreView>` and see one
//! complete generation; the writer builds the next view copy-on-write and
//! swaps it in after the log append succeeds. Nothing is ever deleted.
//!
//! On disk a store is a directory holding `log.ndjson` (header line, then one
//! record per committed generation carrying the full post-state of every
//! touched belief and conflict) and an optional `snapshot.json`. Recovery
//! loads the snapshot and replays the log suffix. A torn final log line is
//! cut; any other damage refuses to open.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::index::PostingIndex;
use crate::model::{Belief, BeliefId, ChangeEvent, ChangeKind, EpistemicStatus, Timestamp, Violations};
use crate::retrieval::{self, HardFilters, RetrievalConfig, RetrievalContext};

pub const LOG_FILE: &str = "log.ndjson";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
const LOG_FORMAT: &str = "belief-store-log";
const SNAPSHOT_FORMAT: &str = "belief-store-snapshot";
const FORMAT_VERSION: u32 = 1;

pub trait Clock: Send + Sync + fmt::Debug {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::now()
    }
}

/// Test clock. Each reading returns the current instant and then advances
/// it by `step` milliseconds.
#[derive(Debug)]
pub struct ManualClock {
    millis: AtomicI64,
    step: i64,
}

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        Self::with_step(start, 0)
    }

    pub fn with_step(start: Timestamp, step_millis: i64) -> Self {
        Self {
            millis: AtomicI64::new(start.millis()),
            step: step_millis,
        }
    }

    pub fn advance(&self, millis: i64) {
        self.millis.fetch_add(millis, Ordering::SeqCst);
    }

    pub fn set(&self, at: Timestamp) {
        self.millis.store(at.millis(), Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_millis(self.millis.fetch_add(self.step, Ordering::SeqCst))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("belief {0} not found")]
    NotFound(BeliefId),
    #[error("belief {0} already exists with different content")]
    DuplicateMismatch(BeliefId),
    #[error("belief {id} is invalid: {violations}")]
    Invalid { id: BeliefId, violations: Violations },
    #[error("belief {0} is already superseded")]
    AlreadySuperseded(BeliefId),
    #[error("superseding {old} with {new} would form a cycle")]
    Cycle { old: BeliefId, new: BeliefId },
    #[error("belief {0} is not active")]
    NotActive(BeliefId),
    #[error("change log of {0} was rewritten; history is append-only")]
    HistoryRewritten(BeliefId),
    #[error("belief {id} is superseded by unknown belief {target}")]
    DanglingSupersession { id: BeliefId, target: BeliefId },
    #[error("conflict {0} not found")]
    ConflictNotFound(String),
    #[error("conflict {0} is already resolved")]
    ConflictAlreadyResolved(String),
    #[error("belief {0} is at the alias ceiling and has no evictable alias")]
    AliasCeiling(BeliefId),
    #[error("alias is empty")]
    EmptyAlias,
    #[error("corrupt store file {path} at line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl StoreError {
    /// Validation-class errors are caller mistakes, not store failures.
    pub fn violations(&self) -> Option<&Violations> {
        match self {
            Self::Invalid { violations, .. } => Some(violations),
            _ => None,
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictStatus {
    Pending,
    ResolvedKeepExisting,
    ResolvedAcceptIncoming,
    ResolvedManual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub id: String,
    pub user_id: String,
    pub existing_id: BeliefId,
    pub incoming: Belief,
    pub queued_at: Timestamp,
    pub status: ConflictStatus,
    #[serde(default)]
    pub resolved_at: Option<Timestamp>,
}

impl ConflictRecord {
    pub fn is_pending(&self) -> bool {
        self.status == ConflictStatus::Pending
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Resolution {
    KeepExisting,
    AcceptIncoming,
    /// The user-edited replacement supersedes the existing belief.
    Manual { belief: Box<Belief> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PutOutcome {
    Inserted,
    Unchanged,
}

/// One complete, immutable store generation.
#[derive(Debug, Clone, Default)]
pub struct StoreView {
    generation: u64,
    beliefs: BTreeMap<BeliefId, Arc<Belief>>,
    conflicts: BTreeMap<String, Arc<ConflictRecord>>,
    index: PostingIndex,
}

impl StoreView {
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn get(&self, id: &BeliefId) -> Option<&Belief> {
        self.beliefs.get(id).map(Arc::as_ref)
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// All beliefs in id order, superseded ones included.
    pub fn beliefs(&self) -> impl Iterator<Item = &Belief> {
        self.beliefs.values().map(Arc::as_ref)
    }

    pub fn beliefs_of<'a>(&'a self, user_id: &'a str) -> impl Iterator<Item = &'a Belief> + 'a {
        self.beliefs().filter(move |b| b.user_id == user_id)
    }

    pub fn conflicts(&self) -> impl Iterator<Item = &ConflictRecord> {
        self.conflicts.values().map(Arc::as_ref)
    }

    pub fn conflict(&self, id: &str) -> Option<&ConflictRecord> {
        self.conflicts.get(id).map(Arc::as_ref)
    }

    pub fn index(&self) -> &PostingIndex {
        &self.index
    }

    pub fn retrieve(&self, query: &str, filters: &HardFilters, max_beliefs: usize, config: &RetrievalConfig) -> RetrievalContext {
        retrieval::retrieve(self, query, filters, max_beliefs, config)
    }

    fn apply(&mut self, record: &LogRecord) {
        for b in &record.beliefs {
            self.index.upsert(b);
            self.beliefs.insert(b.id.clone(), Arc::new(b.clone()));
        }
        for c in &record.conflicts {
            self.conflicts.insert(c.id.clone(), Arc::new(c.clone()));
        }
        self.generation = record.generation;
        self.index.set_generation(record.generation);
    }
}

/// Staged mutations for one generation. Reads see staged state first.
pub struct WriteTx<'a> {
    base: &'a StoreView,
    beliefs: BTreeMap<BeliefId, Belief>,
    conflicts: BTreeMap<String, ConflictRecord>,
    now: Timestamp,
    conflict_seq: usize,
}

impl<'a> WriteTx<'a> {
    fn new(base: &'a StoreView, now: Timestamp) -> Self {
        Self {
            base,
            beliefs: BTreeMap::new(),
            conflicts: BTreeMap::new(),
            now,
            conflict_seq: 0,
        }
    }

    /// Clock reading taken once when the transaction began.
    pub fn now(&self) -> Timestamp {
        self.now
    }

    /// Generation this transaction commits as.
    pub fn generation(&self) -> u64 {
        self.base.generation + 1
    }

    pub fn get(&self, id: &BeliefId) -> Option<&Belief> {
        self.beliefs.get(id).or_else(|| self.base.get(id))
    }

    pub fn contains(&self, id: &BeliefId) -> bool {
        self.get(id).is_some()
    }

    /// Staged view of every belief, in id order.
    pub fn beliefs(&self) -> Vec<&Belief> {
        let mut out: BTreeMap<&BeliefId, &Belief> = self.base.beliefs.iter().map(|(k, v)| (k, v.as_ref())).collect();
        for (k, v) in &self.beliefs {
            out.insert(k, v);
        }
        out.into_values().collect()
    }

    pub fn insert(&mut self, belief: Belief) -> Result<()> {
        if self.contains(&belief.id) {
            return Err(StoreError::DuplicateMismatch(belief.id));
        }
        self.beliefs.insert(belief.id.clone(), belief);
        Ok(())
    }

    /// Mutates a stored belief in place. History must only grow.
    pub fn update<R>(&mut self, id: &BeliefId, f: impl FnOnce(&mut Belief) -> R) -> Result<R> {
        let mut b = self
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.clone()))?;
        let r = f(&mut b);
        self.beliefs.insert(id.clone(), b);
        Ok(r)
    }

    pub fn supersede(&mut self, old: &BeliefId, new: &BeliefId) -> Result<()> {
        let old_b = self.get(old).ok_or_else(|| StoreError::NotFound(old.clone()))?;
        if !self.contains(new) {
            return Err(StoreError::NotFound(new.clone()));
        }
        if old == new {
            return Err(StoreError::Cycle {
                old: old.clone(),
                new: new.clone(),
            });
        }
        if old_b.superseded_by.is_some() {
            return Err(StoreError::AlreadySuperseded(old.clone()));
        }
        let mut cursor = self.get(new).and_then(|b| b.superseded_by.clone());
        while let Some(next) = cursor {
            if &next == old {
                return Err(StoreError::Cycle {
                    old: old.clone(),
                    new: new.clone(),
                });
            }
            cursor = self.get(&next).and_then(|b| b.superseded_by.clone());
        }
        let now = self.now;
        self.update(old, |b| {
            b.epistemic_status = EpistemicStatus::Superseded;
            b.superseded_by = Some(new.clone());
            b.record(ChangeKind::Superseded, format!("superseded by {new}"), now);
        })
    }

    pub fn conflict(&self, id: &str) -> Option<&ConflictRecord> {
        self.conflicts.get(id).or_else(|| self.base.conflict(id))
    }

    /// Staged view of every conflict, in id order.
    pub fn conflicts(&self) -> Vec<&ConflictRecord> {
        let mut out: BTreeMap<&String, &ConflictRecord> = self.base.conflicts.iter().map(|(k, v)| (k, v.as_ref())).collect();
        for (k, v) in &self.conflicts {
            out.insert(k, v);
        }
        out.into_values().collect()
    }

    /// Records a pending conflict. Neither belief is modified.
    pub fn queue_conflict(&mut self, existing: &BeliefId, incoming: Belief) -> Result<ConflictRecord> {
        let ex = self
            .get(existing)
            .ok_or_else(|| StoreError::NotFound(existing.clone()))?;
        incoming.validate().map_err(|violations| StoreError::Invalid {
            id: incoming.id.clone(),
            violations,
        })?;
        let user_id = ex.user_id.clone();
        let id = if self.conflict_seq == 0 {
            format!("c-{}", self.generation())
        } else {
            format!("c-{}-{}", self.generation(), self.conflict_seq)
        };
        self.conflict_seq += 1;
        let record = ConflictRecord {
            id: id.clone(),
            user_id,
            existing_id: existing.clone(),
            incoming,
            queued_at: self.now,
            status: ConflictStatus::Pending,
            resolved_at: None,
        };
        self.conflicts.insert(id, record.clone());
        Ok(record)
    }

    pub fn resolve_conflict(&mut self, conflict_id: &str, resolution: Resolution) -> Result<ConflictRecord> {
        let mut record = self
            .conflict(conflict_id)
            .cloned()
            .ok_or_else(|| StoreError::ConflictNotFound(conflict_id.to_string()))?;
        if !record.is_pending() {
            return Err(StoreError::ConflictAlreadyResolved(conflict_id.to_string()));
        }
        let now = self.now;
        let existing = record.existing_id.clone();
        let status = match resolution {
            Resolution::KeepExisting => {
                let detail = format!("{conflict_id}: kept existing, incoming {} archived", record.incoming.id);
                self.update(&existing, |b| b.record(ChangeKind::ConflictResolved, detail, now))?;
                ConflictStatus::ResolvedKeepExisting
            }
            Resolution::AcceptIncoming => {
                let incoming = record.incoming.clone();
                let new_id = incoming.id.clone();
                self.insert(incoming)?;
                self.supersede(&existing, &new_id)?;
                ConflictStatus::ResolvedAcceptIncoming
            }
            Resolution::Manual { mut belief } => {
                belief.user_edited = true;
                let new_id = belief.id.clone();
                self.insert(*belief)?;
                self.supersede(&existing, &new_id)?;
                ConflictStatus::ResolvedManual
            }
        };
        record.status = status;
        record.resolved_at = Some(now);
        self.conflicts.insert(record.id.clone(), record.clone());
        Ok(record)
    }

    fn is_empty(&self) -> bool {
        self.beliefs.is_empty() && self.conflicts.is_empty()
    }

    fn check(&self) -> Result<()> {
        for b in self.beliefs.values() {
            b.validate().map_err(|violations| StoreError::Invalid {
                id: b.id.clone(),
                violations,
            })?;
            if let Some(old) = self.base.get(&b.id) {
                if !b.change_log.starts_with(&old.change_log) {
                    return Err(StoreError::HistoryRewritten(b.id.clone()));
                }
            }
            if let Some(target) = &b.superseded_by {
                if !self.contains(target) {
                    return Err(StoreError::DanglingSupersession {
                        id: b.id.clone(),
                        target: target.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn into_record(self) -> LogRecord {
        LogRecord {
            generation: self.base.generation + 1,
            at: self.now,
            beliefs: self.beliefs.into_values().collect(),
            conflicts: self.conflicts.into_values().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generation: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogRecord {
    generation: u64,
    at: Timestamp,
    beliefs: Vec<Belief>,
    conflicts: Vec<ConflictRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    header: FileHeader,
    beliefs: Vec<Belief>,
    conflicts: Vec<ConflictRecord>,
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    pub clock: Arc<dyn Clock>,
    /// fsync the log after every commit.
    pub sync: bool,
    pub retrieval: RetrievalConfig,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            clock: Arc::new(SystemClock),
            sync: false,
            retrieval: RetrievalConfig::default(),
        }
    }
}

impl StoreOptions {
    pub fn with_clock(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            ..Self::default()
        }
    }
}

struct Writer {
    root: Option<PathBuf>,
    log: Option<File>,
}

pub struct Store {
    current: RwLock<Arc<StoreView>>,
    writer: Mutex<Writer>,
    options: StoreOptions,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("generation", &self.view().generation())
            .field("root", &self.writer.lock().root)
            .finish()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Self::in_memory_with(StoreOptions::default())
    }

    pub fn in_memory_with(options: StoreOptions) -> Self {
        Self {
            current: RwLock::new(Arc::new(StoreView::default())),
            writer: Mutex::new(Writer { root: None, log: None }),
            options,
        }
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(root, StoreOptions::default())
    }

    /// Opens or creates a store directory and recovers its latest generation.
    pub fn open_with(root: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let mut view = StoreView::default();

        let snap_path = root.join(SNAPSHOT_FILE);
        if snap_path.exists() {
            let text = fs::read_to_string(&snap_path)?;
            let snap: Snapshot = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: snap_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            check_header(&snap.header, SNAPSHOT_FORMAT, &snap_path)?;
            let record = LogRecord {
                generation: snap.header.generation.unwrap_or(0),
                at: Timestamp::from_millis(0),
                beliefs: snap.beliefs,
                conflicts: snap.conflicts,
            };
            validate_record(&record, &snap_path, 1)?;
            view.apply(&record);
        }

        let log_path = root.join(LOG_FILE);
        let log = recover_log(&log_path, &mut view)?;
        check_pointers(&view, &log_path)?;

        Ok(Self {
            current: RwLock::new(Arc::new(view)),
            writer: Mutex::new(Writer {
                root: Some(root),
                log: Some(log),
            }),
            options,
        })
    }

    pub fn options(&self) -> &StoreOptions {
        &self.options
    }

    pub fn now(&self) -> Timestamp {
        self.options.clock.now()
    }

    pub fn root(&self) -> Option<PathBuf> {
        self.writer.lock().root.clone()
    }

    /// Current generation. The returned view never changes.
    pub fn view(&self) -> Arc<StoreView> {
        self.current.read().clone()
    }

    pub fn generation(&self) -> u64 {
        self.view().generation()
    }

    pub fn get(&self, id: &BeliefId) -> Option<Belief> {
        self.view().get(id).cloned()
    }

    /// Runs `f` as one atomic generation. Nothing is written if `f` fails or
    /// stages no change.
    pub fn write<R>(&self, f: impl FnOnce(&mut WriteTx<'_>) -> Result<R>) -> Result<R> {
        let mut writer = self.writer.lock();
        let base = self.view();
        let mut tx = WriteTx::new(&base, self.options.clock.now());
        let out = f(&mut tx)?;
        if tx.is_empty() {
            return Ok(out);
        }
        tx.check()?;
        let record = tx.into_record();
        if let Some(log) = writer.log.as_mut() {
            let mut line = serde_json::to_string(&record).expect("log record serializes");
            line.push('\n');
            log.write_all(line.as_bytes())?;
            log.flush()?;
            if self.options.sync {
                log.sync_data()?;
            }
        }
        let mut next = StoreView::clone(&base);
        next.apply(&record);
        *self.current.write() = Arc::new(next);
        Ok(out)
    }

    /// Inserts a new belief. Re-putting an identical belief is a no-op.
    pub fn put(&self, belief: Belief) -> Result<PutOutcome> {
        self.write(|tx| match tx.get(&belief.id) {
            Some(existing) if *existing == belief => Ok(PutOutcome::Unchanged),
            Some(_) => Err(StoreError::DuplicateMismatch(belief.id.clone())),
            None => {
                tx.insert(belief)?;
                Ok(PutOutcome::Inserted)
            }
        })
    }

    pub fn supersede(&self, old: &BeliefId, new: &BeliefId) -> Result<u64> {
        self.write(|tx| {
            tx.supersede(old, new)?;
            Ok(tx.generation())
        })
    }

    /// Marks an open question resolved; it stays stored for audit.
    pub fn resolve_question(&self, id: &BeliefId, note: &str) -> Result<u64> {
        self.write(|tx| {
            let b = tx.get(id).ok_or_else(|| StoreError::NotFound(id.clone()))?;
            if !b.is_active() {
                return Err(StoreError::NotActive(id.clone()));
            }
            let now = tx.now();
            tx.update(id, |b| {
                b.resolved_at = Some(now);
                b.record(ChangeKind::Resolved, note, now);
            })?;
            Ok(tx.generation())
        })
    }

    pub fn queue_conflict(&self, existing: &BeliefId, incoming: Belief) -> Result<ConflictRecord> {
        self.write(|tx| tx.queue_conflict(existing, incoming))
    }

    pub fn resolve_conflict(&self, conflict_id: &str, resolution: Resolution) -> Result<ConflictRecord> {
        self.write(|tx| tx.resolve_conflict(conflict_id, resolution))
    }

    pub fn conflicts(&self) -> Vec<ConflictRecord> {
        self.view().conflicts().cloned().collect()
    }

    pub fn pending_conflicts(&self, user_id: Option<&str>) -> Vec<ConflictRecord> {
        self.view()
            .conflicts()
            .filter(|c| c.is_pending() && user_id.is_none_or(|u| c.user_id == u))
            .cloned()
            .collect()
    }

    pub fn list_audit(&self, id: &BeliefId) -> Result<Vec<ChangeEvent>> {
        self.view()
            .get(id)
            .map(|b| b.change_log.clone())
            .ok_or_else(|| StoreError::NotFound(id.clone()))
    }

    pub fn retrieve(&self, query: &str, filters: &HardFilters, max_beliefs: usize) -> RetrievalContext {
        self.view()
            .retrieve(query, filters, max_beliefs, &self.options.retrieval)
    }

    pub fn prelude(&self, user_id: &str) -> String {
        retrieval::build_prelude(&self.view(), user_id)
    }

    /// Writes a full snapshot of the current generation. The log is kept.
    pub fn snapshot(&self) -> Result<Option<PathBuf>> {
        let writer = self.writer.lock();
        let Some(root) = writer.root.clone() else {
            return Ok(None);
        };
        let view = self.view();
        let snap = Snapshot {
            header: FileHeader {
                format: SNAPSHOT_FORMAT.into(),
                version: FORMAT_VERSION,
                generation: Some(view.generation()),
            },
            beliefs: view.beliefs().cloned().collect(),
            conflicts: view.conflicts().cloned().collect(),
        };
        let path = root.join(SNAPSHOT_FILE);
        let tmp = root.join(format!("{SNAPSHOT_FILE}.tmp"));
        let mut f = File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, &snap).expect("snapshot serializes");
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(Some(path))
    }
}

fn check_header(h: &FileHeader, format: &str, path: &Path) -> Result<()> {
    if h.format != format || h.version != FORMAT_VERSION {
        return Err(StoreError::Corrupt {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected {format} version {FORMAT_VERSION}, found {} version {}",
                h.format, h.version
            ),
        });
    }
    Ok(())
}

fn validate_record(record: &LogRecord, path: &Path, line: usize) -> Result<()> {
    for b in &record.beliefs {
        if let Err(v) = b.validate() {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                line,
                message: format!("belief {}: {v}", b.id),
            });
        }
    }
    Ok(())
}

fn check_pointers(view: &StoreView, path: &Path) -> Result<()> {
    for b in view.beliefs() {
        if let Some(t) = &b.superseded_by {
            if view.get(t).is_none() {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!("belief {} is superseded by unknown {t}", b.id),
                });
            }
        }
    }
    Ok(())
}

/// Replays the log into `view` and returns the file opened for appending.
fn recover_log(path: &Path, view: &mut StoreView) -> Result<File> {
    let mut file = OpenOptions::new()
        .read(true)
        .append(true)
        .create(true)
        .open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;

    if bytes.is_empty() {
        let header = FileHeader {
            format: LOG_FORMAT.into(),
            version: FORMAT_VERSION,
            generation: None,
        };
        let mut line = serde_json::to_string(&header).expect("header serializes");
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.flush()?;
        return Ok(file);
    }

    let corrupt = |line: usize, message: String| StoreError::Corrupt {
        path: path.to_path_buf(),
        line,
        message,
    };

    // (start offset, line bytes, newline-terminated)
    let mut lines = Vec::new();
    let mut start = 0;
    while start < bytes.len() {
        match bytes[start..].iter().position(|&c| c == b'\n') {
            Some(n) => {
                lines.push((start, &bytes[start..start + n], true));
                start += n + 1;
            }
            None => {
                lines.push((start, &bytes[start..], false));
                start = bytes.len();
            }
        }
    }

    let header: FileHeader =
        serde_json::from_slice(lines[0].1).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
    check_header(&header, LOG_FORMAT, path)?;

    let last = lines.len() - 1;
    let mut truncate_at = None;
    let mut needs_newline = !lines[0].2;
    for (i, (offset, raw, terminated)) in lines.iter().enumerate().skip(1) {
        let line_no = i + 1;
        let record: LogRecord = match serde_json::from_slice(raw) {
            Ok(r) => r,
            Err(e) if i == last => {
                log::warn!("dropping torn final log line {line_no} in {}: {e}", path.display());
                truncate_at = Some(*offset as u64);
                break;
            }
            Err(e) => return Err(corrupt(line_no, e.to_string())),
        };
        needs_newline = !terminated;
        if record.generation <= view.generation {
            continue;
        }
        if record.generation != view.generation + 1 {
            return Err(corrupt(
                line_no,
                format!("generation {} follows {}", record.generation, view.generation),
            ));
        }
        validate_record(&record, path, line_no)?;
        view.apply(&record);
    }

    if let Some(len) = truncate_at {
        file.set_len(len)?;
    } else if needs_newline {
        file.write_all(b"\n")?;
    }
    Ok(file)
}
