use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stdev: f64,
}

/// Mean and standard deviation of each column across runs. Columns are
/// `overall` plus one per language subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub runs: Vec<Option<String>>,
    pub columns: BTreeMap<String, ColumnSummary>,
}

impl RunAggregate {
    /// Two-decimal table row: `column  mean  (stdev)`.
    pub fn to_text(&self) -> String {
        self.columns
            .iter()
            .map(|(c, s)| format!("{c:<8}  {:.2}  ({:.2})\n", s.mean, s.stdev))
            .collect()
    }
}

pub fn mean_stdev(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::validation(format!(
            "standard deviation needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<RunAggregate> {
    let cols = |r: &MetricsReport| -> BTreeMap<String, f64> {
        let mut m: BTreeMap<String, f64> = r
            .by_lang
            .iter()
            .map(|(k, v)| (k.clone(), v.weighted_f1))
            .collect();
        m.insert("overall".into(), r.weighted_f1);
        m
    };
    let first = reports
        .first()
        .map(cols)
        .ok_or_else(|| Error::validation("no reports to aggregate"))?;
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        let c = cols(r);
        if !c.keys().eq(first.keys()) {
            return Err(Error::validation("reports have different columns"));
        }
        for (k, v) in c {
            values.entry(k).or_default().push(v);
        }
    }
    let columns = values
        .into_iter()
        .map(|(k, values)| {
            let (mean, stdev) = mean_stdev(&values)?;
            Ok((k, ColumnSummary { values, mean, stdev }))
        })
        .collect::<Result<_>>()?;
    Ok(RunAggregate {
        runs: reports.iter().map(|r| r.run_id.clone()).collect(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rows() {
        let (m, s) = mean_stdev(&[0.68, 0.72, 0.74]).unwrap();
        assert_eq!(format!("{m:.2}"), "0.71");
        assert!(s > 0.0);
        let (m, s) = mean_stdev(&[0.41, 0.40, 0.44]).unwrap();
        assert_eq!((format!("{m:.2}"), format!("{s:.2}")), ("0.42".into(), "0.02".into()));
        assert_eq!(mean_stdev(&[0.5, 0.5, 0.5]).unwrap().1, 0.0);
        assert!(mean_stdev(&[0.5]).is_err());
    }
}
