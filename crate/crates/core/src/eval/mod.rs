//! Multi-label metrics, extra/missed confusion accounting, annotator
//! agreement, paired significance testing and run aggregation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::schema::LabelSchema;

mod agreement;
mod aggregate;
mod confusion;
mod metrics;
mod significance;

pub use agreement::{agreement, agreement_sets, AgreementReport};
pub use aggregate::{aggregate_runs, mean_stdev, ColumnSummary, RunAggregate};
pub use confusion::{multilabel_confusion, ConfusionMatrix, EXTRA, MISSED};
pub use metrics::{
    multilabel_metrics, multilabel_metrics_by_lang, weighted_f1, ClassMetrics, MetricsReport,
    SubsetMetrics,
};
pub use significance::{compare_significance, SignificanceConfig, SignificanceResult};

/// Label sets keyed by message id.
pub type LabelSets = BTreeMap<String, BTreeSet<String>>;

/// Aligned gold/prediction pairs with labels replaced by schema indices
/// (sorted ascending, so schema order).
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub ids: Vec<String>,
    pub gold: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
}

pub(crate) fn encode_set(schema: &LabelSchema, set: &BTreeSet<String>) -> Result<Vec<usize>> {
    let mut v = set
        .iter()
        .map(|l| schema.index_of(l).ok_or_else(|| Error::UnknownLabel(l.clone())))
        .collect::<Result<Vec<_>>>()?;
    v.sort_unstable();
    Ok(v)
}

pub(crate) fn check_aligned(a: &LabelSets, b: &LabelSets, what: &str) -> Result<()> {
    if a.len() == b.len() && a.keys().eq(b.keys()) {
        return Ok(());
    }
    let only_a = a.keys().find(|k| !b.contains_key(*k));
    let only_b = b.keys().find(|k| !a.contains_key(*k));
    Err(Error::validation(format!(
        "{what} id mismatch: first id only on the left {only_a:?}, only on the right {only_b:?}"
    )))
}

pub(crate) fn encode(preds: &LabelSets, gold: &LabelSets, schema: &LabelSchema) -> Result<Encoded> {
    check_aligned(preds, gold, "prediction/gold")?;
    let mut enc = Encoded {
        ids: Vec::with_capacity(gold.len()),
        gold: Vec::with_capacity(gold.len()),
        pred: Vec::with_capacity(gold.len()),
    };
    for (id, g) in gold {
        if g.is_empty() {
            return Err(Error::validation(format!("message `{id}` has an empty gold set")));
        }
        enc.ids.push(id.clone());
        enc.gold.push(encode_set(schema, g)?);
        enc.pred.push(encode_set(schema, &preds[id])?);
    }
    Ok(enc)
}

/// Per-class incidence counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

pub(crate) fn add_counts(counts: &mut [Counts], gold: &[usize], pred: &[usize]) {
    for &g in gold {
        if pred.binary_search(&g).is_ok() {
            counts[g].tp += 1;
        } else {
            counts[g].fn_ += 1;
        }
    }
    for &p in pred {
        if gold.binary_search(&p).is_err() {
            counts[p].fp += 1;
        }
    }
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn prf(c: Counts) -> (f64, f64, f64) {
    let p = ratio(c.tp, c.tp + c.fp);
    let r = ratio(c.tp, c.tp + c.fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub(crate) fn weighted_from_counts(counts: &[Counts]) -> f64 {
    let total: u64 = counts.iter().map(|c| c.tp + c.fn_).sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .map(|&c| (c.tp + c.fn_) as f64 / total as f64 * prf(c).2)
        .sum()
}

pub(crate) fn weighted_f1_indexed<'a, G, P>(pairs: G, n_labels: usize) -> f64
where
    G: IntoIterator<Item = (&'a [usize], P)>,
    P: AsRef<[usize]>,
{
    let mut counts = vec![Counts::default(); n_labels];
    for (g, p) in pairs {
        add_counts(&mut counts, g, p.as_ref());
    }
    weighted_from_counts(&counts)
}
