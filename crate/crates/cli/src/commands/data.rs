use serde_json::json;

use agenda_core::dataprep::{
    ingest_nli_dir, make_pairs as pairs_for, mix_translations, EntailmentPair, MixConfig, PairGenConfig,
    Verdict,
};
use agenda_core::{io, load_dataset, make_runs_with, write_dataset, Error, Partition};

use super::{descriptor, ensure_dir};
use crate::args::{BinarizeArgs, MakePairsArgs, MixArgs, SplitArgs};
use crate::{CliResult, Ctx};

pub fn binarize(a: &BinarizeArgs, ctx: &mut Ctx) -> CliResult {
    let (pairs, report) = ingest_nli_dir(&a.input, &a.lang)?;
    ctx.write_jsonl(&a.out, &pairs)?;
    let entail = pairs.iter().filter(|p| p.verdict == Verdict::Entailment).count();
    ctx.summary(json!({
        "out": a.out,
        "pairs": pairs.len(),
        "entailment": entail,
        "not_entailment": pairs.len() - entail,
        "files": report.files,
        "rows": report.rows,
        "skipped": report.skipped,
    }))
}

pub fn make_pairs(a: &MakePairsArgs, ctx: &mut Ctx) -> CliResult {
    let ds = load_dataset(&a.data, &ctx.schema)?;
    let cfg = PairGenConfig { negatives_per_positive: a.negatives, seed: ctx.global.seed };
    let pairs = pairs_for(ds.messages(), &ctx.schema, &cfg)?;
    ctx.write_jsonl(&a.out, &pairs)?;
    let positives = pairs.iter().filter(|p| p.verdict == Verdict::Entailment).count();
    ctx.summary(json!({
        "out": a.out,
        "messages": ds.len(),
        "pairs": pairs.len(),
        "entailment": positives,
        "not_entailment": pairs.len() - positives,
    }))
}

pub fn mix(a: &MixArgs, ctx: &mut Ctx) -> CliResult {
    let pairs: Vec<EntailmentPair> = io::read_jsonl(&a.pairs)?;
    let mut cfg = MixConfig::new(&a.target, ctx.global.seed);
    cfg.fraction = a.fraction;
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return Err(Error::Validation(format!("mix fraction {} outside [0, 1]", cfg.fraction)).into());
    }
    let d = descriptor(&a.mt)?;
    if ctx.dry_run() {
        return ctx.summary(json!({ "dry_run": true, "pairs": pairs.len() }));
    }
    let mt = d.build_translator()?;
    let (mixed, report) = mix_translations(&pairs, &mt, &cfg)?;
    ctx.write_jsonl(&a.out, &mixed)?;
    ctx.emit(&report, a.report.as_deref(), |r| {
        format!(
            "mode: {}\nfraction: {}\ntarget_lang: {}\nseed: {}\ntranslated: {} of {}\n",
            r.mode,
            r.fraction,
            r.target_lang,
            r.seed,
            r.selected.len(),
            mixed.len()
        )
    })
}

pub fn split(a: &SplitArgs, ctx: &mut Ctx) -> CliResult {
    let ds = load_dataset(&a.data, &ctx.schema)?;
    let seeds = if a.seeds.is_empty() {
        let s = ctx.global.seed;
        vec![s, s.wrapping_add(1), s.wrapping_add(2)]
    } else {
        a.seeds.clone()
    };
    let runs = make_runs_with(&ds, &seeds, a.dev_fraction, a.test_fraction)?;
    ensure_dir(ctx, &a.out_dir)?;
    let mut summary = Vec::new();
    for split in &runs {
        ctx.write_json(&a.out_dir.join(format!("{}.split.json", split.run_id)), split)?;
        let dir = a.out_dir.join(&split.run_id);
        ensure_dir(ctx, &dir)?;
        for (part, name) in [(Partition::Train, "train"), (Partition::Dev, "dev"), (Partition::Test, "test")] {
            if !ctx.dry_run() {
                write_dataset(dir.join(format!("{name}.jsonl")), &ds.subset(split.ids(part)))?;
            }
        }
        summary.push(json!({
            "run_id": split.run_id,
            "seed": split.seed,
            "train": split.train.len(),
            "dev": split.dev.len(),
            "test": split.test.len(),
        }));
    }
    ctx.summary(json!({ "out_dir": a.out_dir, "messages": ds.len(), "runs": summary }))
}
