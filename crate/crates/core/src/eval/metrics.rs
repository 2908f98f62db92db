use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{add_counts, encode, prf, weighted_from_counts, Counts, LabelSets};
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub n_messages: usize,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub n_messages: usize,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Weighted F1 restricted to messages of each language.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_lang: BTreeMap<String, SubsetMetrics>,
    /// Value used for precision/recall/F1 when a denominator is zero.
    pub zero_division: f64,
}

impl MetricsReport {
    pub fn with_run(mut self, run_id: impl Into<String>, tau: Option<f64>) -> Self {
        self.run_id = Some(run_id.into());
        self.tau = tau;
        self
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let w = self
            .per_class
            .iter()
            .map(|c| c.label.len())
            .chain([11])
            .max()
            .unwrap_or(11);
        let mut s = format!(
            "{:<w$}  {:>9}  {:>9}  {:>9}  {:>7}\n",
            "label", "precision", "recall", "f1", "support"
        );
        for c in &self.per_class {
            s += &format!(
                "{:<w$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}\n",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        for (lang, m) in &self.by_lang {
            s += &format!("{:<w$}  {:>9}  {:>9}  {:>9.4}  {:>7}\n", format!("weighted[{lang}]"), "", "", m.weighted_f1, m.n_messages);
        }
        s += &format!("{:<w$}  {:>9}  {:>9}  {:>9.4}  {:>7}\n", "weighted", "", "", self.weighted_f1, self.n_messages);
        s
    }
}

/// Per-class precision/recall/F1 over (message, label) incidences and the
/// support-weighted F1.
pub fn multilabel_metrics(preds: &LabelSets, gold: &LabelSets, schema: &LabelSchema) -> Result<MetricsReport> {
    let enc = encode(preds, gold, schema)?;
    let mut counts = vec![Counts::default(); schema.len()];
    for (g, p) in enc.gold.iter().zip(&enc.pred) {
        add_counts(&mut counts, g, p);
    }
    let per_class = schema
        .ids()
        .zip(&counts)
        .map(|(label, &c)| {
            let (precision, recall, f1) = prf(c);
            ClassMetrics {
                label: label.to_owned(),
                precision,
                recall,
                f1,
                support: c.tp + c.fn_,
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
            }
        })
        .collect();
    Ok(MetricsReport {
        run_id: None,
        tau: None,
        n_messages: enc.ids.len(),
        weighted_f1: weighted_from_counts(&counts),
        per_class,
        by_lang: BTreeMap::new(),
        zero_division: 0.0,
    })
}

/// [`multilabel_metrics`] plus the weighted F1 of each language subset.
/// `langs` maps every message id to its language.
pub fn multilabel_metrics_by_lang(
    preds: &LabelSets,
    gold: &LabelSets,
    langs: &BTreeMap<String, String>,
    schema: &LabelSchema,
) -> Result<MetricsReport> {
    let mut report = multilabel_metrics(preds, gold, schema)?;
    let mut by: BTreeMap<&str, (LabelSets, LabelSets)> = BTreeMap::new();
    for (id, g) in gold {
        let lang = langs
            .get(id)
            .ok_or_else(|| Error::validation(format!("no language recorded for message `{id}`")))?;
        let e = by.entry(lang).or_default();
        e.0.insert(id.clone(), preds[id].clone());
        e.1.insert(id.clone(), g.clone());
    }
    for (lang, (p, g)) in by {
        let m = multilabel_metrics(&p, &g, schema)?;
        report.by_lang.insert(
            lang.to_owned(),
            SubsetMetrics {
                n_messages: m.n_messages,
                weighted_f1: m.weighted_f1,
            },
        );
    }
    Ok(report)
}

pub fn weighted_f1(preds: &LabelSets, gold: &LabelSets, schema: &LabelSchema) -> Result<f64> {
    Ok(multilabel_metrics(preds, gold, schema)?.weighted_f1)
}
