use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::rank::Ranking;
use super::review::{AnnotationRecord, Candidate, ConsensusInput, DecisionInput, ReviewQueue};
use crate::dataset::Message;
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const SNAPSHOT_FILE: &str = "queue.jsonl";

/// File-backed [`ReviewQueue`].
///
/// Two append-only logs are the source of truth: `candidates.jsonl` (one
/// candidate per line, as created) and `decisions.jsonl` (one
/// [`AnnotationRecord`] per accepted write). Opening a store replays both.
/// `queue.jsonl` is a snapshot of current candidate state rewritten after
/// every write, for inspection and external tools.
#[derive(Debug)]
pub struct ReviewStore {
    dir: PathBuf,
    queue: ReviewQueue,
}

fn read_log<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            // a write interrupted mid-line leaves an unterminated tail
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("{}: ignoring truncated final line", path.display());
            }
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn append<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = String::new();
    for it in items {
        buf.push_str(&serde_json::to_string(it)?);
        buf.push('\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

impl ReviewStore {
    pub fn open(dir: impl AsRef<Path>, schema: LabelSchema) -> Result<Self> {
        let dir = dir.as_ref().to_owned();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut queue = ReviewQueue::new(schema);
        for c in read_log::<Candidate>(&dir.join(CANDIDATES_FILE))? {
            queue.insert(c)?;
        }
        let decisions: Vec<AnnotationRecord> = read_log(&dir.join(DECISIONS_FILE))?;
        let n = decisions.len();
        for rec in decisions {
            queue.apply(rec)?;
        }
        if n > 0 || !queue.candidates().is_empty() {
            log::info!(
                "replayed {} candidates and {n} decisions from {}",
                queue.candidates().len(),
                dir.display()
            );
        }
        let store = ReviewStore { dir, queue };
        store.snapshot()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn queue(&self) -> &ReviewQueue {
        &self.queue
    }

    fn snapshot(&self) -> Result<()> {
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let body = crate::io::to_jsonl(self.queue.candidates())?;
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    pub fn add_round(&mut self, ranking: &Ranking, corpus: &[Message]) -> Result<u32> {
        let cands = self.queue.prepare_round(ranking, corpus)?;
        append(&self.dir.join(CANDIDATES_FILE), &cands)?;
        for c in cands {
            self.queue.insert(c)?;
        }
        self.snapshot()?;
        Ok(self.queue.current_round())
    }

    fn commit(&mut self, rec: AnnotationRecord) -> Result<AnnotationRecord> {
        append(&self.dir.join(DECISIONS_FILE), std::slice::from_ref(&rec))?;
        self.queue.apply(rec.clone())?;
        self.snapshot()?;
        Ok(rec)
    }

    pub fn record_decision(&mut self, id: u64, input: &DecisionInput, timestamp_ms: u64) -> Result<AnnotationRecord> {
        let rec = self.queue.prepare_decision(id, input, timestamp_ms)?;
        self.commit(rec)
    }

    pub fn resolve(&mut self, id: u64, input: &ConsensusInput, timestamp_ms: u64) -> Result<AnnotationRecord> {
        let rec = self.queue.prepare_consensus(id, input, timestamp_ms)?;
        self.commit(rec)
    }
}
