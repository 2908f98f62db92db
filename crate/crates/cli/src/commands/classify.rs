use std::collections::BTreeMap;

use serde_json::json;

use agenda_core::classify::{
    calibrate_threshold, check_tau, classify_by_similarity, predict, score_messages, ScoreMatrix,
    ThresholdCalibration, TAU_MIN,
};
use agenda_core::{load_dataset, Error, Message};

use super::{descriptor, load_labeled};
use crate::args::{CalibrateArgs, ClassifyArgs, Mode, ScoreSource};
use crate::{CliResult, Ctx};

/// Score matrix for `msgs` in message order, or `None` on a dry run that
/// would have needed a backend.
fn scores_for(msgs: &[Message], s: &ScoreSource, ctx: &Ctx) -> CliResult<Option<ScoreMatrix>> {
    let matrix = if let Some(path) = &s.scores {
        let all = ScoreMatrix::load(path, &ctx.schema)?;
        let rows = msgs
            .iter()
            .map(|m| {
                all.get(&m.id)
                    .cloned()
                    .ok_or_else(|| Error::Validation(format!("{}: no scores for message `{}`", path.display(), m.id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ScoreMatrix::new(rows, &ctx.schema)?
    } else {
        let d = descriptor(s.backend.as_deref().unwrap_or("mock"))?;
        if ctx.dry_run() {
            return Ok(None);
        }
        match s.mode {
            Mode::Entailment => score_messages(msgs, &ctx.schema, &d.build_scorer()?)?,
            Mode::Similarity => {
                let emb = d.build_embedder()?;
                classify_by_similarity(msgs, &ctx.schema, &emb, s.source, TAU_MIN)?.0
            }
        }
    };
    if let Some(out) = &s.scores_out {
        ctx.write_text(out, &matrix.to_jsonl()?)?;
    }
    Ok(Some(matrix))
}

pub fn classify(a: &ClassifyArgs, ctx: &mut Ctx) -> CliResult {
    let ds = load_dataset(&a.data, &ctx.schema)?;
    let tau = match (a.tau, &a.calibration) {
        (Some(t), _) => t,
        (None, Some(p)) => ThresholdCalibration::load(p)?.tau,
        (None, None) => unreachable!("clap requires --tau or --calibration"),
    };
    check_tau(tau)?;
    let Some(matrix) = scores_for(ds.messages(), &a.scoring, ctx)? else {
        return ctx.summary(json!({ "dry_run": true, "messages": ds.len(), "tau": tau }));
    };
    let preds = predict(&matrix, &ctx.schema, tau)?;
    ctx.write_jsonl(&a.out, &preds)?;
    let mut by_label: BTreeMap<&str, usize> = ctx.schema.ids().map(|l| (l, 0)).collect();
    for p in &preds {
        for l in &p.labels {
            *by_label.get_mut(l.as_str()).expect("predicted labels come from the schema") += 1;
        }
    }
    ctx.summary(json!({ "out": a.out, "messages": preds.len(), "tau": tau, "predicted": by_label }))
}

pub fn calibrate(a: &CalibrateArgs, ctx: &mut Ctx) -> CliResult {
    let dev = load_labeled(&a.dev, &ctx.schema)?;
    let Some(matrix) = scores_for(dev.dataset.messages(), &a.scoring, ctx)? else {
        return ctx.summary(json!({ "dry_run": true, "messages": dev.dataset.len(), "step": a.step }));
    };
    let cal = calibrate_threshold(&matrix, &dev.gold, &ctx.schema, a.step)?;
    ctx.emit(&cal, a.out.as_deref(), |c| {
        format!(
            "tau       {:.2}\nweighted_f1 {:.4}\ngrid      [{:.2}, {:.2}] step {}\nmessages  {}\n",
            c.tau, c.objective, c.grid_min, c.grid_max, c.sweep_step, c.n_messages
        )
    })
}
