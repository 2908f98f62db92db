//! Weighted F1, the extra/missed confusion matrix, Cohen's kappa, a paired
//! randomization test and a three-run summary.
//!
//! `cargo run -p agenda-core --example evaluate`

use std::collections::BTreeSet;

use agenda_core::eval::{
    aggregate_runs, agreement_sets, compare_significance, multilabel_confusion, multilabel_metrics, LabelSets,
    SignificanceConfig,
};
use agenda_core::LabelSchema;

fn sets(rows: &[&[&str]]) -> LabelSets {
    rows.iter()
        .enumerate()
        .map(|(i, ls)| (format!("m{i}"), ls.iter().map(|s| s.to_string()).collect()))
        .collect()
}

fn main() -> agenda_core::Result<()> {
    let schema = LabelSchema::agenda_default();
    let gold = sets(&[&["Engagement"], &["Disengagement", "ViolentAction"], &["Other"], &["Engagement"], &["ViolentAction"], &["Other"]]);
    let model_a = sets(&[&["Engagement"], &["Disengagement"], &["Other"], &["Engagement"], &["ViolentAction"], &["Engagement"]]);
    let model_b = sets(&[&["Other"], &["ViolentAction"], &["Other"], &["Disengagement"], &["Other"], &["Other"]]);

    let report = multilabel_metrics(&model_a, &gold, &schema)?;
    println!("{}", report.to_text());

    let cm = multilabel_confusion(&model_a, &gold, &schema)?;
    println!("{}", cm.to_text());

    let a: Vec<BTreeSet<String>> = model_a.values().cloned().collect();
    let b: Vec<BTreeSet<String>> = gold.values().cloned().collect();
    let k = agreement_sets(&a, &b, &schema)?;
    println!("exact-set agreement {:.2}, kappa {:.3}\n", k.percent_agreement, k.kappa);

    let cfg = SignificanceConfig { model_a: "a".into(), model_b: "b".into(), ..SignificanceConfig::new(0) };
    let sig = compare_significance(&model_a, &model_b, &gold, &schema, &cfg)?;
    println!("F1 a {:.3} vs b {:.3}: p = {:.4} over {} shuffles\n", sig.weighted_f1_a, sig.weighted_f1_b, sig.p_value, sig.iterations);

    let runs = [&model_a, &model_b, &model_a]
        .iter()
        .enumerate()
        .map(|(i, p)| multilabel_metrics(p, &gold, &schema).map(|r| r.with_run(format!("R{}", i + 1), None)))
        .collect::<agenda_core::Result<Vec<_>>>()?;
    println!("{}", aggregate_runs(&runs)?.to_text());
    Ok(())
}
