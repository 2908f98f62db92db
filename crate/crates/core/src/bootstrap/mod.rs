//! Embedding-similarity candidate generation and the two-annotator review
//! workflow that turns candidates into a labeled dataset.

mod rank;
mod review;
mod store;

pub use crate::classify::cosine;
pub use rank::{rank_candidates, sample_per_file, AnchorText, BootstrapConfig, RankedMessage, Ranking};
pub use review::{
    AnnotationRecord, Candidate, CandidateStatus, ConsensusInput, DecisionInput, ExportResult,
    QueueStats, RecordKind, ReviewQueue, ANNOTATORS_PER_CANDIDATE,
};
pub use store::{ReviewStore, CANDIDATES_FILE, DECISIONS_FILE, SNAPSHOT_FILE};
