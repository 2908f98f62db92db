use serde::{Deserialize, Serialize};

use super::{encode, LabelSets};
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

/// Name of the bottom row: predictions with no unmatched gold label.
pub const EXTRA: &str = "EXTRA";
/// Name of the rightmost column: gold labels with no unmatched prediction.
pub const MISSED: &str = "MISSED";

/// `(L+1) x (L+1)` counts. Rows are gold labels then [`EXTRA`]; columns are
/// predicted labels then [`MISSED`]. The `(EXTRA, MISSED)` corner is always 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len() + 1;
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index(&self, name: &str, edge: &str) -> Result<usize> {
        if name == edge {
            return Ok(self.labels.len());
        }
        self.labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::UnknownLabel(name.to_owned()))
    }

    /// Count at `(gold, predicted)`; use [`EXTRA`] / [`MISSED`] for the margins.
    pub fn get(&self, gold: &str, predicted: &str) -> Result<u64> {
        Ok(self.counts[self.index(gold, EXTRA)?][self.index(predicted, MISSED)?])
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn col_sum(&self, col: usize) -> u64 {
        self.counts.iter().map(|r| r[col]).sum()
    }

    fn row_names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str).chain([EXTRA])
    }

    fn col_names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str).chain([MISSED])
    }

    /// CSV with a header row; first column holds the gold label.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gold\\pred");
        for c in self.col_names() {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (name, row) in self.row_names().zip(&self.counts) {
            s.push_str(name);
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let w = self
            .row_names()
            .chain(self.col_names())
            .map(str::len)
            .chain(self.counts.iter().flatten().map(|v| v.to_string().len()))
            .max()
            .unwrap_or(1);
        let mut s = format!("{:<w$}", "");
        for c in self.col_names() {
            s += &format!("  {c:>w$}");
        }
        s.push('\n');
        for (name, row) in self.row_names().zip(&self.counts) {
            s += &format!("{name:<w$}");
            for v in row {
                s += &format!("  {v:>w$}");
            }
            s.push('\n');
        }
        s
    }
}

/// Diagonal counts true positives. Per message, false negatives and false
/// positives are each sorted in schema order and paired element-wise; the
/// unpaired remainder lands in the [`MISSED`] column or [`EXTRA`] row.
pub fn multilabel_confusion(
    preds: &LabelSets,
    gold: &LabelSets,
    schema: &LabelSchema,
) -> Result<ConfusionMatrix> {
    let enc = encode(preds, gold, schema)?;
    let mut m = ConfusionMatrix::zeros(schema.ids().map(str::to_owned).collect());
    let edge = schema.len();
    for (g, p) in enc.gold.iter().zip(&enc.pred) {
        let fns: Vec<usize> = g.iter().copied().filter(|l| p.binary_search(l).is_err()).collect();
        let fps: Vec<usize> = p.iter().copied().filter(|l| g.binary_search(l).is_err()).collect();
        for &t in g.iter().filter(|l| p.binary_search(l).is_ok()) {
            m.counts[t][t] += 1;
        }
        for i in 0..fns.len().max(fps.len()) {
            let row = fns.get(i).copied().unwrap_or(edge);
            let col = fps.get(i).copied().unwrap_or(edge);
            m.counts[row][col] += 1;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::LabelDef;

    fn abc() -> LabelSchema {
        LabelSchema::new(
            ["A", "B", "C", "Other"].map(|l| LabelDef::new(l).with_name("en", l)).to_vec(),
            "Other",
        )
        .unwrap()
    }

    fn one(gold: &[&str], pred: &[&str]) -> ConfusionMatrix {
        let s = |ls: &[&str]| -> LabelSets {
            [("m".to_string(), ls.iter().map(|l| l.to_string()).collect())].into()
        };
        multilabel_confusion(&s(pred), &s(gold), &abc()).unwrap()
    }

    #[test]
    fn extra_and_missed() {
        let m = one(&["A"], &["A"]);
        assert_eq!(m.get("A", "A").unwrap(), 1);
        assert_eq!(m.counts.iter().flatten().sum::<u64>(), 1);

        let m = one(&["A"], &["A", "B"]);
        assert_eq!((m.get("A", "A").unwrap(), m.get(EXTRA, "B").unwrap()), (1, 1));

        let m = one(&["A", "B"], &["A"]);
        assert_eq!((m.get("A", "A").unwrap(), m.get("B", MISSED).unwrap()), (1, 1));
    }

    #[test]
    fn element_wise_pairing() {
        // FNs {B, C}, FPs {A}: B pairs with A, C is missed
        let m = one(&["B", "C"], &["A"]);
        assert_eq!(m.get("B", "A").unwrap(), 1);
        assert_eq!(m.get("C", MISSED).unwrap(), 1);
        assert_eq!(m.get(EXTRA, MISSED).unwrap(), 0);
    }

    #[test]
    fn renderings() {
        let m = one(&["A"], &["B"]);
        let csv = m.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "gold\\pred,A,B,C,Other,MISSED");
        assert_eq!(csv.lines().nth(1).unwrap(), "A,0,1,0,0,0");
        assert!(csv.lines().last().unwrap().starts_with("EXTRA,"));
        assert_eq!(m.to_text().lines().count(), 6);
    }
}
