//! On-disk store: one data directory holding the record log, periodic
//! snapshots and a lock file that keeps out a second writer.
//!
//! ```text
//! <data_dir>/LOCK
//! <data_dir>/catalog.log
//! <data_dir>/catalog.snap.<seq>
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;
use w5cat_core::log::{decode_log, LogRecord, TornTail};
use w5cat_core::{
    load_snapshot, replay, snapshot, Catalog, CatalogConfig, CatalogError, CatalogState, Clock, LogError, RecordSink,
};

pub const LOG_FILE: &str = "catalog.log";
pub const LOCK_FILE: &str = "LOCK";
pub const SNAPSHOT_PREFIX: &str = "catalog.snap.";
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 10_000;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("data directory {0} is in use by another process")]
    Locked(PathBuf),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    pub audit_reads: bool,
    /// Write a snapshot after this many records; 0 disables snapshots.
    pub snapshot_every: u64,
}

impl StoreConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { data_dir: data_dir.into(), audit_reads: true, snapshot_every: DEFAULT_SNAPSHOT_EVERY }
    }
}

/// Appends frames to the log file and syncs each one before returning.
#[derive(Debug)]
pub struct FileSink {
    file: File,
}

impl RecordSink for FileSink {
    type Error = io::Error;

    fn append(&mut self, frame: &[u8]) -> Result<(), io::Error> {
        self.file.write_all(frame)?;
        self.file.sync_data()
    }
}

/// Wall clock in nanoseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&mut self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0)
    }
}

pub type FileCatalog = Catalog<FileSink, SystemClock>;

/// What `Store::open` found on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recovery {
    pub snapshot_seq: Option<u64>,
    pub last_seq: u64,
    pub torn_tail: Option<TornTail>,
    /// Problems that recovery worked around, one line each.
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    catalog: FileCatalog,
    snapshot_every: u64,
    snapshot_seq: u64,
    recovery: Recovery,
    _lock: File,
}

impl Store {
    /// Open (creating if needed) the store in `config.data_dir`, take the
    /// lock, and recover state. An incomplete final log record is cut off.
    pub fn open(config: &StoreConfig) -> Result<Store, StoreError> {
        let dir = config.data_dir.clone();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;

        let lock_path = dir.join(LOCK_FILE);
        let lock =
            OpenOptions::new().create(true).truncate(false).write(true).open(&lock_path).map_err(io_err(&lock_path))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(dir)),
            Err(fs::TryLockError::Error(e)) => return Err(io_err(&lock_path)(e)),
        }

        let log_path = dir.join(LOG_FILE);
        let log = match fs::read(&log_path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&log_path)(e)),
        };

        let mut warnings = Vec::new();
        let mut snapshot_seq = None;
        let mut recovered = None;
        for (seq, path) in list_snapshots(&dir)?.into_iter().rev() {
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            match load_snapshot(&bytes, &log) {
                Ok(r) => {
                    snapshot_seq = Some(seq);
                    recovered = Some(r);
                    break;
                }
                Err(e) => warnings.push(format!("ignoring snapshot {}: {e}", path.display())),
            }
        }
        let recovered = match recovered {
            Some(r) => r,
            None => replay(&log)?,
        };

        if let Some(torn) = &recovered.torn_tail {
            warnings.push(format!(
                "{}: dropped {} bytes of an incomplete record at offset {} ({})",
                log_path.display(),
                torn.discarded_bytes,
                torn.offset,
                torn.reason
            ));
        }
        let file = OpenOptions::new().create(true).append(true).open(&log_path).map_err(io_err(&log_path))?;
        if recovered.valid_len < log.len() {
            file.set_len(recovered.valid_len as u64).map_err(io_err(&log_path))?;
            file.sync_all().map_err(io_err(&log_path))?;
        }

        let recovery =
            Recovery { snapshot_seq, last_seq: recovered.state.last_seq(), torn_tail: recovered.torn_tail, warnings };
        let catalog = Catalog::with_state(
            recovered.state,
            FileSink { file },
            SystemClock,
            CatalogConfig { audit_reads: config.audit_reads },
        );
        Ok(Store {
            dir,
            catalog,
            snapshot_every: config.snapshot_every,
            snapshot_seq: snapshot_seq.unwrap_or(0),
            recovery,
            _lock: lock,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn recovery(&self) -> &Recovery {
        &self.recovery
    }

    pub fn catalog(&self) -> &FileCatalog {
        &self.catalog
    }

    pub fn state(&self) -> &CatalogState {
        self.catalog.state()
    }

    /// Run an operation that may append records, then snapshot if due.
    /// A failed snapshot is reported on stderr only; the log is already
    /// durable.
    pub fn write<T>(
        &mut self,
        op: impl FnOnce(&mut FileCatalog) -> Result<T, CatalogError>,
    ) -> Result<T, CatalogError> {
        let out = op(&mut self.catalog)?;
        let last = self.catalog.state().last_seq();
        if self.snapshot_every > 0 && last - self.snapshot_seq >= self.snapshot_every {
            if let Err(e) = self.snapshot() {
                eprintln!("warning: snapshot failed: {e}");
            }
        }
        Ok(out)
    }

    /// Write `catalog.snap.<last_seq>` atomically (temp file + rename).
    pub fn snapshot(&mut self) -> Result<PathBuf, StoreError> {
        let seq = self.catalog.state().last_seq();
        let path = self.dir.join(format!("{SNAPSHOT_PREFIX}{seq}"));
        let tmp = self.dir.join(format!("{SNAPSHOT_PREFIX}{seq}.tmp"));
        let bytes = snapshot(self.catalog.state());
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(&bytes).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        self.snapshot_seq = seq;
        Ok(path)
    }

    /// The intact records of the log, in order.
    pub fn log_records(&self) -> Result<Vec<LogRecord>, StoreError> {
        read_log_records(&self.dir.join(LOG_FILE))
    }
}

pub fn read_log_records(path: &Path) -> Result<Vec<LogRecord>, StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_err(path)(e)),
    };
    Ok(decode_log(&bytes)?.records)
}

/// Snapshot files in `dir` sorted by sequence number.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(u64, PathBuf)>, StoreError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        let Some(seq) = name.to_str().and_then(|n| n.strip_prefix(SNAPSHOT_PREFIX)).and_then(|s| s.parse().ok()) else {
            continue;
        };
        out.push((seq, entry.path()));
    }
    out.sort();
    Ok(out)
}

/// Export format: one canonical JSON log record per line.
pub fn export_jsonl(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_canonical_json());
        out.push('\n');
    }
    out
}
