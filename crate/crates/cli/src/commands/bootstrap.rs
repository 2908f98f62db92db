use serde_json::json;

use agenda_core::bootstrap::{rank_candidates, sample_per_file, BootstrapConfig, ReviewStore};
use agenda_core::{io, Dataset, Message};

use super::descriptor;
use crate::args::{BootstrapExportArgs, BootstrapRunArgs, BootstrapStatsArgs};
use crate::{CliResult, Ctx};

pub fn run(a: &BootstrapRunArgs, ctx: &mut Ctx) -> CliResult {
    let cfg = BootstrapConfig {
        k_per_label: a.k,
        source_text: a.source,
        target_labels: a.labels.clone(),
        sample_fraction: a.fraction,
        seed: ctx.global.seed,
    };
    cfg.validate(&ctx.schema)?;
    let files = a
        .corpus
        .iter()
        .map(io::read_jsonl::<Message>)
        .collect::<Result<Vec<_>, _>>()?;
    let corpus: Vec<Message> = files.iter().flatten().cloned().collect();
    Dataset::new(corpus.clone(), &ctx.schema)?;
    let d = descriptor(&a.backend)?;
    let sampled = sample_per_file(&files, cfg.sample_fraction, cfg.seed)?;
    if ctx.dry_run() {
        return ctx.summary(json!({ "dry_run": true, "messages": corpus.len(), "sampled": sampled.len() }));
    }
    let ranking = rank_candidates(&sampled, &ctx.schema, &d.build_embedder()?, &cfg)?;
    let mut store = ReviewStore::open(&a.data_dir, ctx.schema.clone())?;
    let round = store.add_round(&ranking, &corpus)?;
    let side = a.data_dir.join(format!("below_cutoff_round{round}.jsonl"));
    ctx.write_jsonl(&side, &ranking.below_cutoff)?;
    ctx.summary(json!({
        "round": round,
        "sampled": sampled.len(),
        "candidates": ranking.selected.len(),
        "below_cutoff": ranking.below_cutoff.len(),
        "below_cutoff_file": side,
        "config": cfg,
    }))
}

pub fn export(a: &BootstrapExportArgs, ctx: &mut Ctx) -> CliResult {
    let store = ReviewStore::open(&a.data_dir, ctx.schema.clone())?;
    let round = a.round.unwrap_or(store.queue().current_round());
    let res = store.queue().export_labeled(round)?;
    if let Some(out) = &a.out {
        ctx.write_jsonl(out, &res.messages)?;
    }
    ctx.summary(json!({
        "round": res.round,
        "out": a.out,
        "messages": res.messages.len(),
        "discarded": res.n_discarded,
        "unsettled": res.n_unsettled,
        "agreement": res.agreement,
    }))
}

pub fn stats(a: &BootstrapStatsArgs, ctx: &mut Ctx) -> CliResult {
    let store = ReviewStore::open(&a.data_dir, ctx.schema.clone())?;
    let round = a.round.unwrap_or(store.queue().current_round());
    let stats = store.queue().stats(round)?;
    ctx.emit(&stats, None, |s| {
        let mut t = format!(
            "round {}: {} candidates, {} decided twice, {} disagreements\n",
            s.round, s.n_candidates, s.decided_twice, s.disagreements
        );
        for (label, n) in &s.by_label {
            t.push_str(&format!("  {label:<18} {n}\n"));
        }
        if let Some(ag) = &s.agreement {
            t.push_str(&format!("Po {:.3}  kappa {:.3}\n", ag.percent_agreement, ag.kappa));
        }
        t
    })
}
