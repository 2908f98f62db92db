//! Agenda detection framed as textual entailment.
//!
//! Each agenda label is rendered as a natural-language hypothesis; a message
//! (the premise) receives every label whose hypothesis an entailment scorer
//! accepts above a calibrated threshold, falling back to `Other` when none do.
//!
//! | module | what it does |
//! |---|---|
//! | [`dataset`] | messages, JSON Lines I/O, translation pairs, train/dev/test runs |
//! | [`schema`] | label taxonomy with per-language names, definitions, hypotheses |
//! | [`dataprep`] | NLI binarization, entailment pair generation, translation mixing |
//! | [`backends`] | scorer / embedder / translator contracts: mock, local ONNX, remote HTTP |
//! | [`classify`] | score matrices, label decisions, threshold calibration, similarity baseline |
//! | [`eval`] | weighted F1, extra/missed confusion, Cohen's kappa, significance, run aggregation |
//! | [`bootstrap`] | embedding-ranked candidate queues and the two-annotator review state machine |
//!
//! Runnable examples (`cargo run -p agenda-core --example <name>`):
//! `prepare_pairs`, `split_runs`, `zero_shot`, `similarity_baseline`,
//! `evaluate`, `bootstrap_review`.

pub mod backends;
pub mod bootstrap;
pub mod classify;
pub mod dataprep;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod schema;

pub use dataset::{
    load_dataset, make_runs, make_runs_with, split_dataset, write_dataset, Dataset, DatasetSplit,
    Message, Partition, SplitSpec,
};
pub use error::{Error, Result};
pub use schema::{LabelDef, LabelSchema};
