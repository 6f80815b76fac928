//! Line-oriented files under a data directory.
//!
//! Logs are opened in append mode and each acknowledged append ends with a
//! newline and an fsync. A crash can only leave a partial final line; it is
//! dropped on open and truncated away before the next append. Whole-file
//! artefacts (taxonomies, committees, document texts) are replaced by writing
//! a temporary file and renaming it over the old one.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use thiserror::Error;

use crate::classifier::TrainingRecord;
use crate::error::{field, split_fields, ParseError};
use crate::ids::{
    format_date, format_timestamp, parse_date, parse_timestamp, DocId, Group, Timestamp, UserId,
};
use crate::profiler::FeedbackEvent;
use crate::recommender::{ClassifiedPaper, RecommendationRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("record cannot be stored: {0}")]
    InvalidRecord(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// A value stored as one line of a collection file.
pub trait Record: Clone + PartialEq + Sized {
    fn to_line(&self) -> String;
    fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError>;
}

macro_rules! impl_record {
    ($($ty:ty),* $(,)?) => {$(
        impl Record for $ty {
            fn to_line(&self) -> String {
                <$ty>::to_line(self)
            }
            fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
                <$ty>::parse_line(line, line_no)
            }
        }
    )*};
}

impl_record!(
    FeedbackEvent,
    TrainingRecord,
    ClassifiedPaper,
    RecommendationRecord,
    UserAccount,
    DocumentRecord,
    BrowseRecord,
    ServedRecord,
    JobRecord,
    TopicRecord,
);

/// Whether appends are flushed to disk before they are acknowledged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Durability {
    /// fsync after every append batch.
    Sync,
    /// Leave flushing to the OS; for simulations and tests.
    Buffered,
}

/// An append-only collection with an in-memory copy of its records.
#[derive(Debug)]
pub struct AppendLog<R> {
    path: PathBuf,
    file: File,
    len: u64,
    durability: Durability,
    records: Arc<Vec<R>>,
}

/// Splits file contents into complete lines, returning the byte length of
/// the complete part. Anything after the last newline is a torn write.
fn complete_lines(bytes: &[u8]) -> (&[u8], u64) {
    match bytes.iter().rposition(|&b| b == b'\n') {
        Some(i) => (&bytes[..=i], (i + 1) as u64),
        None => (&[][..], 0),
    }
}

/// Parses complete lines, skipping blank and `#` comment lines.
pub fn parse_records<R: Record>(text: &str) -> Result<Vec<R>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(R::parse_line(line, i + 1)?);
    }
    Ok(out)
}

impl<R: Record> AppendLog<R> {
    /// Opens or creates the log and loads every complete record.
    pub fn open(path: impl Into<PathBuf>, durability: Durability) -> Result<Self, StoreError> {
        let path = path.into();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let (complete, len) = complete_lines(&bytes);
        let text = std::str::from_utf8(complete).map_err(|e| StoreError::Corrupt {
            path: path.clone(),
            source: ParseError::new(0, format!("invalid UTF-8: {e}")),
        })?;
        let records = parse_records(text).map_err(|source| StoreError::Corrupt {
            path: path.clone(),
            source,
        })?;
        if len < bytes.len() as u64 {
            tracing::warn!(path = %path.display(), dropped = bytes.len() as u64 - len, "dropping torn final line");
            file.set_len(len).map_err(io_err(&path))?;
            file.flush().map_err(io_err(&path))?;
        }
        Ok(Self {
            path,
            file,
            len,
            durability,
            records: Arc::new(records),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// A point-in-time view; later appends are not visible through it.
    pub fn snapshot(&self) -> Arc<Vec<R>> {
        Arc::clone(&self.records)
    }

    pub fn append(&mut self, record: R) -> Result<(), StoreError> {
        self.append_all(vec![record])
    }

    /// Appends a batch with a single write. Every record is serialized and
    /// re-parsed first, so a record that would not round-trip is rejected
    /// before anything reaches the file.
    pub fn append_all(&mut self, records: Vec<R>) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for r in &records {
            let line = r.to_line();
            if line.contains(['\n', '\r']) || line.starts_with('#') || line.is_empty() {
                return Err(StoreError::InvalidRecord(format!("unsafe line {line:?}")));
            }
            match R::parse_line(&line, 0) {
                Ok(back) if back == *r => {}
                Ok(_) => {
                    return Err(StoreError::InvalidRecord(format!(
                        "{line:?} does not round-trip"
                    )))
                }
                Err(e) => return Err(StoreError::InvalidRecord(format!("{line:?}: {e}"))),
            }
            buf.push_str(&line);
            buf.push('\n');
        }
        if let Err(e) = self.write_bytes(buf.as_bytes()) {
            // Best effort: cut back to the last acknowledged record.
            let _ = self.file.set_len(self.len);
            return Err(e);
        }
        self.len += buf.len() as u64;
        Arc::make_mut(&mut self.records).extend(records);
        Ok(())
    }

    fn write_bytes(&mut self, bytes: &[u8]) -> Result<(), StoreError> {
        self.file.write_all(bytes).map_err(io_err(&self.path))?;
        if self.durability == Durability::Sync {
            self.file.sync_data().map_err(io_err(&self.path))?;
        }
        Ok(())
    }
}

/// Replaces `path` with `contents`: write a sibling temp file, fsync it,
/// rename it into place.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), StoreError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))?;
    if let Some(dir) = path.parent() {
        // Persist the rename itself; not every platform allows this.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

/// A registered user: `<user>\t<group>\t<created_at>` in `users.tsv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserAccount {
    pub user: UserId,
    pub group: Group,
    pub created_at: Timestamp,
}

impl UserAccount {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.user, self.group, format_timestamp(&self.created_at))
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [user, group, at] = split_fields::<3>(line, line_no)?;
        Ok(Self {
            user: field(line_no, "user", user.parse())?,
            group: field(line_no, "group", group.parse())?,
            created_at: field(line_no, "timestamp", parse_timestamp(at))?,
        })
    }
}

/// A known paper: `<doc_id>\t<url>\t<date>` in `documents.tsv`. The text
/// lives in `docs/<doc_id>.txt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentRecord {
    pub doc_id: DocId,
    pub url: String,
    pub fetched_at: NaiveDate,
}

impl DocumentRecord {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.doc_id, self.url, format_date(&self.fetched_at))
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [doc, url, date] = split_fields::<3>(line, line_no)?;
        if url.is_empty() {
            return Err(ParseError::new(line_no, "url: empty field"));
        }
        Ok(Self {
            doc_id: field(line_no, "doc_id", doc.parse())?,
            url: url.to_owned(),
            fetched_at: field(line_no, "date", parse_date(date))?,
        })
    }
}

/// An accepted browse: `<timestamp>\t<user>\t<doc_id>` in `browse.log`.
/// It becomes a browsed event once the paper is classified for the user's
/// group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BrowseRecord {
    pub at: Timestamp,
    pub user: UserId,
    pub doc_id: DocId,
}

impl BrowseRecord {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", format_timestamp(&self.at), self.user, self.doc_id)
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [at, user, doc] = split_fields::<3>(line, line_no)?;
        Ok(Self {
            at: field(line_no, "timestamp", parse_timestamp(at))?,
            user: field(line_no, "user", user.parse())?,
            doc_id: field(line_no, "doc_id", doc.parse())?,
        })
    }
}

/// First serve of a recommendation set: `<timestamp>\t<user>\t<set date>`
/// in `served.log`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServedRecord {
    pub at: Timestamp,
    pub user: UserId,
    pub set_date: NaiveDate,
}

impl ServedRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}",
            format_timestamp(&self.at),
            self.user,
            format_date(&self.set_date)
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [at, user, date] = split_fields::<3>(line, line_no)?;
        Ok(Self {
            at: field(line_no, "timestamp", parse_timestamp(at))?,
            user: field(line_no, "user", user.parse())?,
            set_date: field(line_no, "date", parse_date(date))?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Nightly,
    Daily,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Nightly => "nightly",
            Phase::Daily => "daily",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = crate::error::FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nightly" => Ok(Phase::Nightly),
            "daily" => Ok(Phase::Daily),
            other => Err(crate::error::FieldError::Unknown {
                what: "phase",
                value: other.to_owned(),
            }),
        }
    }
}

/// A completed job: `<as_of date>\t<phase>\t<finished timestamp>` in `jobs.log`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JobRecord {
    pub as_of: NaiveDate,
    pub phase: Phase,
    pub finished_at: Timestamp,
}

impl JobRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}",
            format_date(&self.as_of),
            self.phase,
            format_timestamp(&self.finished_at)
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [date, phase, at] = split_fields::<3>(line, line_no)?;
        Ok(Self {
            as_of: field(line_no, "date", parse_date(date))?,
            phase: field(line_no, "phase", phase.parse())?,
            finished_at: field(line_no, "timestamp", parse_timestamp(at))?,
        })
    }
}

/// History of runtime topic additions:
/// `<timestamp>\t<group>\t<topic_id>\t<label>\t<parent>` in `topics.log`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopicRecord {
    pub at: Timestamp,
    pub group: Group,
    pub topic: crate::ids::TopicId,
    pub label: String,
    pub parent: crate::ids::TopicId,
}

impl TopicRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            format_timestamp(&self.at),
            self.group,
            self.topic,
            self.label,
            self.parent
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let [at, group, topic, label, parent] = split_fields::<5>(line, line_no)?;
        Ok(Self {
            at: field(line_no, "timestamp", parse_timestamp(at))?,
            group: field(line_no, "group", group.parse())?,
            topic: field(line_no, "topic", topic.parse())?,
            label: field(line_no, "label", crate::ids::check_field(label).map(|_| label.to_owned()))?,
            parent: field(line_no, "parent", parent.parse())?,
        })
    }
}

/// Paths of every collection under a data directory.
#[derive(Clone, Debug)]
pub struct DataRoot {
    dir: PathBuf,
    durability: Durability,
}

impl DataRoot {
    /// Uses `dir` as a data root, creating it and `docs/` if needed.
    pub fn open(dir: impl Into<PathBuf>, durability: Durability) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("docs")).map_err(io_err(&dir))?;
        Ok(Self { dir, durability })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn durability(&self) -> Durability {
        self.durability
    }

    pub fn taxonomy_path(&self, group: Group) -> PathBuf {
        self.dir.join(format!("taxonomy.{group}.tsv"))
    }

    pub fn training_path(&self, group: Group) -> PathBuf {
        self.dir.join(format!("training.{group}.tsv"))
    }

    pub fn committee_path(&self, group: Group) -> PathBuf {
        self.dir.join(format!("committee.{group}.txt"))
    }

    pub fn doc_path(&self, doc: &DocId) -> PathBuf {
        self.dir.join("docs").join(format!("{doc}.txt"))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn log<R: Record>(&self, name: &str) -> Result<AppendLog<R>, StoreError> {
        AppendLog::open(self.path(name), self.durability)
    }

    pub fn training_log(&self, group: Group) -> Result<AppendLog<TrainingRecord>, StoreError> {
        AppendLog::open(self.training_path(group), self.durability)
    }

    pub fn write_doc(&self, doc: &DocId, text: &str) -> Result<(), StoreError> {
        atomic_write(&self.doc_path(doc), text.as_bytes())
    }

    pub fn read_doc(&self, doc: &DocId) -> Result<String, StoreError> {
        let path = self.doc_path(doc);
        fs::read_to_string(&path).map_err(io_err(&path))
    }

    /// Reads a whole-file artefact; `None` when it does not exist.
    pub fn read_optional(&self, path: &Path) -> Result<Option<String>, StoreError> {
        match fs::read_to_string(path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(path)(e)),
        }
    }
}

pub const USERS: &str = "users.tsv";
pub const DOCUMENTS: &str = "documents.tsv";
pub const EVENTS: &str = "events.log";
pub const CLASSIFIED: &str = "classified.tsv";
pub const RECOMMENDATIONS: &str = "recommendations.log";
pub const BROWSE: &str = "browse.log";
pub const SERVED: &str = "served.log";
pub const JOBS: &str = "jobs.log";
pub const TOPICS: &str = "topics.log";
