use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::rank::Ranking;
use crate::dataset::Message;
use crate::error::{Error, Result};
use crate::eval::{agreement_sets, AgreementReport};
use crate::schema::LabelSchema;

/// Distinct annotators allowed per candidate before consensus.
pub const ANNOTATORS_PER_CANDIDATE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateStatus {
    Pending,
    Confirmed,
    Reassigned,
    Other,
    Discarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Decision,
    Consensus,
    Discard,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub candidate_id: u64,
    pub annotator: String,
    pub kind: RecordKind,
    /// Schema order; empty for discards.
    pub labels: Vec<String>,
    pub round: u32,
    pub timestamp_ms: u64,
}

impl AnnotationRecord {
    pub fn label_set(&self) -> BTreeSet<String> {
        self.labels.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub id: u64,
    pub round: u32,
    pub message: Message,
    /// The other-language member of the message's translation pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart: Option<Message>,
    pub suggested_label: String,
    pub similarity: f64,
    pub rank: usize,
    pub status: CandidateStatus,
    /// Optimistic concurrency token; bumped by every accepted write.
    pub version: u64,
    pub history: Vec<CandidateStatus>,
    #[serde(default)]
    pub decisions: Vec<AnnotationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<AnnotationRecord>,
}

impl Candidate {
    fn is_closed(&self) -> bool {
        self.consensus.is_some() || self.status == CandidateStatus::Discarded
    }

    fn decided_by(&self, annotator: &str) -> bool {
        self.decisions.iter().any(|d| d.annotator == annotator)
    }

    fn is_disagreement(&self) -> bool {
        !self.is_closed()
            && self.decisions.len() == 2
            && self.decisions[0].label_set() != self.decisions[1].label_set()
    }

    /// Labels this candidate contributes to an export, if settled.
    fn settled_labels(&self) -> Option<&[String]> {
        match (&self.consensus, self.decisions.as_slice()) {
            (Some(c), _) if c.kind == RecordKind::Consensus => Some(&c.labels),
            (Some(_), _) => None,
            (None, [a, b]) if a.label_set() == b.label_set() => Some(&a.labels),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionInput {
    pub annotator: String,
    pub labels: Vec<String>,
    /// Defaults to the candidate's own round.
    #[serde(default)]
    pub round: Option<u32>,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusInput {
    pub annotator: String,
    #[serde(default)]
    pub labels: Vec<String>,
    /// Drop the candidate from the final dataset instead of labeling it.
    #[serde(default)]
    pub discard: bool,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportResult {
    pub round: u32,
    pub messages: Vec<Message>,
    /// Agreement over the two independent pre-consensus decisions.
    pub agreement: Option<AgreementReport>,
    pub n_discarded: usize,
    /// Candidates without two decisions or a consensus.
    pub n_unsettled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub round: u32,
    pub n_candidates: usize,
    pub by_status: BTreeMap<CandidateStatus, usize>,
    pub by_label: BTreeMap<String, usize>,
    pub decided_twice: usize,
    pub disagreements: usize,
    pub agreement: Option<AgreementReport>,
}

/// In-memory review state. Every mutation is split into a pure `prepare_*`
/// step that validates and returns the log record and [`ReviewQueue::apply`],
/// so a store can persist the record before the state changes.
#[derive(Debug, Clone)]
pub struct ReviewQueue {
    schema: LabelSchema,
    candidates: Vec<Candidate>,
    index: HashMap<u64, usize>,
    current_round: u32,
}

fn status_for(labels: &[String], suggested: &str, other: &str) -> CandidateStatus {
    match labels {
        [l] if l == suggested => CandidateStatus::Confirmed,
        [l] if l == other => CandidateStatus::Other,
        _ => CandidateStatus::Reassigned,
    }
}

impl ReviewQueue {
    pub fn new(schema: LabelSchema) -> Self {
        ReviewQueue {
            schema,
            candidates: Vec::new(),
            index: HashMap::new(),
            current_round: 0,
        }
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn current_round(&self) -> u32 {
        self.current_round
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn get(&self, id: u64) -> Option<&Candidate> {
        self.index.get(&id).map(|&i| &self.candidates[i])
    }

    fn get_checked(&self, id: u64) -> Result<&Candidate> {
        self.get(id)
            .ok_or_else(|| Error::NotFound(format!("candidate {id}")))
    }

    /// Builds pending candidates for a new round from a ranking. `corpus`
    /// resolves message ids and translation counterparts.
    pub fn prepare_round(&self, ranking: &Ranking, corpus: &[Message]) -> Result<Vec<Candidate>> {
        if ranking.selected.is_empty() {
            return Err(Error::Precondition("ranking selected no candidates".into()));
        }
        let by_id: HashMap<&str, &Message> = corpus.iter().map(|m| (m.id.as_str(), m)).collect();
        let mut by_pair: HashMap<&str, Vec<&Message>> = HashMap::new();
        for m in corpus {
            if let Some(p) = &m.pair_id {
                by_pair.entry(p.as_str()).or_default().push(m);
            }
        }
        let round = self.current_round + 1;
        let mut next_id = self.candidates.last().map_or(1, |c| c.id + 1);
        ranking
            .selected
            .iter()
            .map(|r| {
                let message = *by_id
                    .get(r.message_id.as_str())
                    .ok_or_else(|| Error::validation(format!("ranked message `{}` not in corpus", r.message_id)))?;
                let counterpart = message.pair_id.as_deref().and_then(|p| {
                    by_pair[p].iter().find(|m| m.id != message.id).map(|m| (*m).clone())
                });
                let c = Candidate {
                    id: next_id,
                    round,
                    message: message.clone(),
                    counterpart,
                    suggested_label: r.label.clone(),
                    similarity: r.similarity,
                    rank: r.rank,
                    status: CandidateStatus::Pending,
                    version: 0,
                    history: vec![CandidateStatus::Pending],
                    decisions: Vec::new(),
                    consensus: None,
                };
                next_id += 1;
                Ok(c)
            })
            .collect()
    }

    /// Adds a candidate, opening its round if newer than the current one.
    pub fn insert(&mut self, c: Candidate) -> Result<()> {
        if self.index.contains_key(&c.id) {
            return Err(Error::Conflict(format!("candidate {} already exists", c.id)));
        }
        if self.candidates.last().is_some_and(|l| l.id > c.id) {
            return Err(Error::validation(format!("candidate {} out of order", c.id)));
        }
        if c.round < self.current_round {
            return Err(Error::validation(format!(
                "candidate {} belongs to closed round {}",
                c.id, c.round
            )));
        }
        self.schema.check_labels([c.suggested_label.as_str()])?;
        self.current_round = c.round;
        self.index.insert(c.id, self.candidates.len());
        self.candidates.push(c);
        Ok(())
    }

    pub fn add_round(&mut self, ranking: &Ranking, corpus: &[Message]) -> Result<u32> {
        for c in self.prepare_round(ranking, corpus)? {
            self.insert(c)?;
        }
        Ok(self.current_round)
    }

    fn check_labels(&self, labels: &[String]) -> Result<Vec<String>> {
        if labels.is_empty() {
            return Err(Error::validation("label set is empty"));
        }
        self.schema.check_labels(labels.iter().map(String::as_str))?;
        let set: BTreeSet<&String> = labels.iter().collect();
        if set.len() != labels.len() {
            return Err(Error::validation("label set has duplicates"));
        }
        Ok(self.schema.canonical_order(labels))
    }

    fn check_version(c: &Candidate, version: u64) -> Result<()> {
        if c.version != version {
            return Err(Error::Conflict(format!(
                "stale version for candidate {}: sent {version}, current {}",
                c.id, c.version
            )));
        }
        Ok(())
    }

    pub fn prepare_decision(&self, id: u64, input: &DecisionInput, timestamp_ms: u64) -> Result<AnnotationRecord> {
        let c = self.get_checked(id)?;
        if input.annotator.trim().is_empty() {
            return Err(Error::validation("annotator id is empty"));
        }
        let labels = self.check_labels(&input.labels)?;
        let round = input.round.unwrap_or(c.round);
        if round != c.round {
            return Err(Error::validation(format!(
                "candidate {id} belongs to round {}, not {round}",
                c.round
            )));
        }
        Self::check_version(c, input.version)?;
        if c.decided_by(&input.annotator) {
            return Err(Error::Conflict(format!(
                "annotator `{}` already decided candidate {id} in round {round}",
                input.annotator
            )));
        }
        if c.is_closed() {
            return Err(Error::Conflict(format!("candidate {id} is already resolved")));
        }
        if c.decisions.len() >= ANNOTATORS_PER_CANDIDATE {
            return Err(Error::Conflict(format!(
                "candidate {id} already has {ANNOTATORS_PER_CANDIDATE} decisions"
            )));
        }
        Ok(AnnotationRecord {
            candidate_id: id,
            annotator: input.annotator.clone(),
            kind: RecordKind::Decision,
            labels,
            round,
            timestamp_ms,
        })
    }

    pub fn prepare_consensus(&self, id: u64, input: &ConsensusInput, timestamp_ms: u64) -> Result<AnnotationRecord> {
        let c = self.get_checked(id)?;
        if input.annotator.trim().is_empty() {
            return Err(Error::validation("annotator id is empty"));
        }
        let (kind, labels) = if input.discard {
            if !input.labels.is_empty() {
                return Err(Error::validation("a discard carries no labels"));
            }
            (RecordKind::Discard, Vec::new())
        } else {
            (RecordKind::Consensus, self.check_labels(&input.labels)?)
        };
        Self::check_version(c, input.version)?;
        if c.is_closed() {
            return Err(Error::Conflict(format!("candidate {id} is already resolved")));
        }
        if kind == RecordKind::Consensus && c.decisions.len() < ANNOTATORS_PER_CANDIDATE {
            return Err(Error::Precondition(format!(
                "candidate {id} needs {ANNOTATORS_PER_CANDIDATE} decisions before consensus"
            )));
        }
        Ok(AnnotationRecord {
            candidate_id: id,
            annotator: input.annotator.clone(),
            kind,
            labels,
            round: c.round,
            timestamp_ms,
        })
    }

    /// Applies a record produced by `prepare_*` (or read back from a log).
    /// The record is re-validated against the current state.
    pub fn apply(&mut self, rec: AnnotationRecord) -> Result<&Candidate> {
        let c = self.get_checked(rec.candidate_id)?;
        let version = c.version;
        match rec.kind {
            RecordKind::Decision => {
                let input = DecisionInput {
                    annotator: rec.annotator.clone(),
                    labels: rec.labels.clone(),
                    round: Some(rec.round),
                    version,
                };
                self.prepare_decision(rec.candidate_id, &input, rec.timestamp_ms)?;
            }
            RecordKind::Consensus | RecordKind::Discard => {
                let input = ConsensusInput {
                    annotator: rec.annotator.clone(),
                    labels: rec.labels.clone(),
                    discard: rec.kind == RecordKind::Discard,
                    version,
                };
                self.prepare_consensus(rec.candidate_id, &input, rec.timestamp_ms)?;
            }
        }
        let other = self.schema.other_id().to_owned();
        let i = self.index[&rec.candidate_id];
        let c = &mut self.candidates[i];
        let status = match rec.kind {
            RecordKind::Discard => Some(CandidateStatus::Discarded),
            RecordKind::Consensus => Some(status_for(&rec.labels, &c.suggested_label, &other)),
            RecordKind::Decision if c.decisions.is_empty() => {
                Some(status_for(&rec.labels, &c.suggested_label, &other))
            }
            RecordKind::Decision => None,
        };
        if rec.kind == RecordKind::Decision {
            c.decisions.push(rec);
        } else {
            c.consensus = Some(rec);
        }
        if let Some(s) = status {
            if s != c.status {
                c.history.push(s);
            }
            c.status = s;
        }
        c.version += 1;
        Ok(c)
    }

    pub fn record_decision(&mut self, id: u64, input: &DecisionInput, timestamp_ms: u64) -> Result<AnnotationRecord> {
        let rec = self.prepare_decision(id, input, timestamp_ms)?;
        self.apply(rec.clone())?;
        Ok(rec)
    }

    pub fn resolve(&mut self, id: u64, input: &ConsensusInput, timestamp_ms: u64) -> Result<AnnotationRecord> {
        let rec = self.prepare_consensus(id, input, timestamp_ms)?;
        self.apply(rec.clone())?;
        Ok(rec)
    }

    /// Lowest-ranked open candidate of the current round this annotator has
    /// not decided. Ties in rank go by label order, then candidate id.
    pub fn next_for(&self, annotator: &str) -> Option<&Candidate> {
        self.candidates
            .iter()
            .filter(|c| {
                c.round == self.current_round
                    && !c.is_closed()
                    && c.decisions.len() < ANNOTATORS_PER_CANDIDATE
                    && !c.decided_by(annotator)
            })
            .min_by_key(|c| (c.rank, self.schema.index_of(&c.suggested_label), c.id))
    }

    fn in_round(&self, round: u32) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(move |c| c.round == round)
    }

    pub fn disagreements(&self, round: u32) -> Vec<u64> {
        self.in_round(round)
            .filter(|c| c.is_disagreement())
            .map(|c| c.id)
            .collect()
    }

    /// Exact-set agreement over candidates that received two decisions.
    pub fn agreement(&self, round: u32) -> Result<Option<AgreementReport>> {
        let (a, b): (Vec<_>, Vec<_>) = self
            .in_round(round)
            .filter(|c| c.decisions.len() == 2)
            .map(|c| (c.decisions[0].label_set(), c.decisions[1].label_set()))
            .unzip();
        if a.is_empty() {
            return Ok(None);
        }
        agreement_sets(&a, &b, &self.schema).map(Some)
    }

    pub fn stats(&self, round: u32) -> Result<QueueStats> {
        let mut by_status = BTreeMap::new();
        let mut by_label: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0;
        let mut decided_twice = 0;
        for c in self.in_round(round) {
            n += 1;
            *by_status.entry(c.status).or_insert(0) += 1;
            *by_label.entry(c.suggested_label.clone()).or_insert(0) += 1;
            decided_twice += usize::from(c.decisions.len() == 2);
        }
        Ok(QueueStats {
            round,
            n_candidates: n,
            by_status,
            by_label,
            decided_twice,
            disagreements: self.disagreements(round).len(),
            agreement: self.agreement(round)?,
        })
    }

    /// Labeled messages for a round. Candidates for the same message merge
    /// by label union; `Other` is dropped when any agenda label is present.
    /// Discarded and unsettled candidates are left out.
    pub fn export_labeled(&self, round: u32) -> Result<ExportResult> {
        let open = self.disagreements(round);
        if !open.is_empty() {
            return Err(Error::Precondition(format!(
                "round {round} has unresolved disagreements: {open:?}"
            )));
        }
        let other = self.schema.other_id();
        let mut merged: BTreeMap<&str, (&Candidate, BTreeSet<String>)> = BTreeMap::new();
        let (mut n_discarded, mut n_unsettled) = (0, 0);
        for c in self.in_round(round) {
            if c.status == CandidateStatus::Discarded {
                n_discarded += 1;
                continue;
            }
            let Some(labels) = c.settled_labels() else {
                n_unsettled += 1;
                continue;
            };
            merged
                .entry(c.message.id.as_str())
                .or_insert_with(|| (c, BTreeSet::new()))
                .1
                .extend(labels.iter().cloned());
        }
        let exported: BTreeSet<&str> = merged.keys().copied().collect();
        let messages = merged
            .into_values()
            .map(|(c, mut labels)| {
                if labels.len() > 1 {
                    labels.remove(other);
                }
                let mut m = c.message.clone();
                m.gold = Some(self.schema.canonical_order(&labels));
                let partner_exported = c
                    .counterpart
                    .as_ref()
                    .is_some_and(|p| exported.contains(p.id.as_str()));
                if !partner_exported {
                    m.pair_id = None;
                }
                m
            })
            .collect();
        Ok(ExportResult {
            round,
            messages,
            agreement: self.agreement(round)?,
            n_discarded,
            n_unsettled,
        })
    }
}
