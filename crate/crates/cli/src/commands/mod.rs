use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use agenda_core::backends::BackendDescriptor;
use agenda_core::eval::LabelSets;
use agenda_core::{io, load_dataset, Dataset, Error, LabelSchema};

use crate::args::{BootstrapAction, Command};
use crate::{CliError, CliResult, Ctx};

mod bootstrap;
mod classify;
mod data;
mod eval;
mod serve;

pub(crate) fn dispatch(cmd: &Command, ctx: &mut Ctx) -> CliResult {
    match cmd {
        Command::BinarizeNli(a) => data::binarize(a, ctx),
        Command::MakePairs(a) => data::make_pairs(a, ctx),
        Command::Mix(a) => data::mix(a, ctx),
        Command::Split(a) => data::split(a, ctx),
        Command::Bootstrap(b) => match &b.action {
            BootstrapAction::Run(a) => bootstrap::run(a, ctx),
            BootstrapAction::Export(a) => bootstrap::export(a, ctx),
            BootstrapAction::Stats(a) => bootstrap::stats(a, ctx),
        },
        Command::Classify(a) => classify::classify(a, ctx),
        Command::Calibrate(a) => classify::calibrate(a, ctx),
        Command::Evaluate(a) => eval::evaluate(a, ctx),
        Command::Confusion(a) => eval::confusion(a, ctx),
        Command::Agreement(a) => eval::agreement(a, ctx),
        Command::Compare(a) => eval::compare(a, ctx),
        Command::Aggregate(a) => eval::aggregate(a, ctx),
        Command::Serve(a) => serve::serve(a, ctx),
    }
}

pub(crate) fn descriptor(s: &str) -> CliResult<BackendDescriptor> {
    s.parse().map_err(|e| CliError::Usage(format!("backend `{s}`: {e}")))
}

/// A labeled dataset with its gold sets and per-message languages.
pub(crate) struct Labeled {
    pub dataset: Dataset,
    pub gold: LabelSets,
    pub langs: BTreeMap<String, String>,
}

pub(crate) fn load_labeled(path: &Path, schema: &LabelSchema) -> CliResult<Labeled> {
    let dataset = load_dataset(path, schema)?;
    let gold = dataset.gold_sets()?;
    let langs = dataset.messages().iter().map(|m| (m.id.clone(), m.lang.clone())).collect();
    Ok(Labeled { dataset, gold, langs })
}

#[derive(Deserialize)]
struct LabelRow {
    id: String,
    #[serde(alias = "gold")]
    labels: Vec<String>,
    #[serde(default)]
    tau: Option<f64>,
}

/// Label sets from JSON Lines rows carrying `id` and `labels` (or `gold`),
/// plus the shared `tau` if every row states the same one.
pub(crate) fn read_label_sets(path: &Path, schema: &LabelSchema) -> CliResult<(LabelSets, Option<f64>)> {
    let rows: Vec<LabelRow> = io::read_jsonl(path)?;
    let mut sets = LabelSets::new();
    let mut taus = BTreeSet::new();
    for r in rows {
        schema.check_labels(r.labels.iter().map(String::as_str))?;
        if let Some(t) = r.tau {
            taus.insert(t.to_bits());
        }
        let set: BTreeSet<String> = r.labels.into_iter().collect();
        if sets.insert(r.id.clone(), set).is_some() {
            return Err(Error::Validation(format!("{}: duplicate id `{}`", path.display(), r.id)).into());
        }
    }
    let tau = match taus.len() {
        1 => taus.first().map(|b| f64::from_bits(*b)),
        _ => None,
    };
    Ok((sets, tau))
}

pub(crate) fn ensure_dir(ctx: &Ctx, dir: &Path) -> CliResult {
    if !ctx.dry_run() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    Ok(())
}
