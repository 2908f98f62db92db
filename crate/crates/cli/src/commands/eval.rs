use agenda_core::eval::{
    aggregate_runs, agreement_sets, compare_significance, multilabel_confusion, multilabel_metrics_by_lang,
    MetricsReport, SignificanceConfig,
};
use agenda_core::{io, Error};

use super::{load_labeled, read_label_sets};
use crate::args::{AggregateArgs, AgreementArgs, CompareArgs, ConfusionArgs, EvaluateArgs};
use crate::{CliResult, Ctx};

pub fn evaluate(a: &EvaluateArgs, ctx: &mut Ctx) -> CliResult {
    let gold = load_labeled(&a.gold, &ctx.schema)?;
    let (preds, tau) = read_label_sets(&a.pred, &ctx.schema)?;
    let mut report = multilabel_metrics_by_lang(&preds, &gold.gold, &gold.langs, &ctx.schema)?;
    report.tau = tau;
    if let Some(run) = &a.run_id {
        report = report.with_run(run, tau);
    }
    ctx.emit(&report, a.out.as_deref(), MetricsReport::to_text)
}

pub fn confusion(a: &ConfusionArgs, ctx: &mut Ctx) -> CliResult {
    let gold = load_labeled(&a.gold, &ctx.schema)?;
    let (preds, _) = read_label_sets(&a.pred, &ctx.schema)?;
    let m = multilabel_confusion(&preds, &gold.gold, &ctx.schema)?;
    if let Some(csv) = &a.csv {
        ctx.write_text(csv, &m.to_csv())?;
    }
    ctx.emit(&m, a.out.as_deref(), |m| m.to_text())
}

pub fn agreement(a: &AgreementArgs, ctx: &mut Ctx) -> CliResult {
    let (first, _) = read_label_sets(&a.a, &ctx.schema)?;
    let (second, _) = read_label_sets(&a.b, &ctx.schema)?;
    if !first.keys().eq(second.keys()) {
        return Err(Error::Validation("annotator files must cover the same ids".into()).into());
    }
    let xs: Vec<_> = first.into_values().collect();
    let ys: Vec<_> = second.into_values().collect();
    let report = agreement_sets(&xs, &ys, &ctx.schema)?;
    ctx.emit(&report, a.out.as_deref(), |r| {
        format!(
            "items  {}\nPo     {:.4}\nPe     {:.4}\nkappa  {:.4}\n",
            r.n_items, r.percent_agreement, r.expected_agreement, r.kappa
        )
    })
}

pub fn compare(a: &CompareArgs, ctx: &mut Ctx) -> CliResult {
    let gold = load_labeled(&a.gold, &ctx.schema)?;
    let (pa, _) = read_label_sets(&a.a, &ctx.schema)?;
    let (pb, _) = read_label_sets(&a.b, &ctx.schema)?;
    let cfg = SignificanceConfig {
        model_a: a.name_a.clone(),
        model_b: a.name_b.clone(),
        iterations: a.iterations,
        seed: ctx.global.seed,
    };
    let r = compare_significance(&pa, &pb, &gold.gold, &ctx.schema, &cfg)?;
    ctx.emit(&r, a.out.as_deref(), |r| {
        format!(
            "{:<12} weighted_f1 {:.4}\n{:<12} weighted_f1 {:.4}\n|delta|      {:.4}\np            {:.4} ({} iterations, seed {})\n",
            r.model_a, r.weighted_f1_a, r.model_b, r.weighted_f1_b, r.statistic, r.p_value, r.iterations, r.seed
        )
    })
}

pub fn aggregate(a: &AggregateArgs, ctx: &mut Ctx) -> CliResult {
    let reports = a
        .reports
        .iter()
        .map(io::read_json::<MetricsReport>)
        .collect::<Result<Vec<_>, _>>()?;
    let agg = aggregate_runs(&reports)?;
    ctx.emit(&agg, a.out.as_deref(), |g| g.to_text())
}
