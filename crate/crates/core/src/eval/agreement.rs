use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::LabelSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub percent_agreement: f64,
    pub expected_agreement: f64,
    pub kappa: f64,
    pub n_items: usize,
}

/// Cohen's kappa between two aligned categorical annotations.
pub fn agreement<T: Ord>(a: &[T], b: &[T]) -> Result<AgreementReport> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "annotation lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::validation("no items to compare"));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let mut marg: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for x in a {
        marg.entry(x).or_default().0 += 1;
    }
    for y in b {
        marg.entry(y).or_default().1 += 1;
    }
    let po = agree as f64 / n;
    let pe: f64 = marg
        .values()
        .map(|&(c1, c2)| (c1 as f64 / n) * (c2 as f64 / n))
        .sum();
    let kappa = if (1.0 - pe).abs() < 1e-12 {
        if agree == a.len() {
            1.0
        } else {
            0.0
        }
    } else {
        (po - pe) / (1.0 - pe)
    };
    Ok(AgreementReport {
        percent_agreement: po,
        expected_agreement: pe,
        kappa,
        n_items: a.len(),
    })
}

/// Exact-set agreement: each label set counts as one category.
pub fn agreement_sets(
    a: &[BTreeSet<String>],
    b: &[BTreeSet<String>],
    schema: &LabelSchema,
) -> Result<AgreementReport> {
    let keys = |v: &[BTreeSet<String>]| v.iter().map(|s| schema.set_key(s)).collect::<Vec<_>>();
    agreement(&keys(a), &keys(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed() {
        let r = agreement(&["A", "A", "B", "B"], &["A", "B", "A", "B"]).unwrap();
        assert_eq!((r.percent_agreement, r.expected_agreement, r.kappa), (0.5, 0.5, 0.0));

        let r = agreement(&["A", "B", "C"], &["A", "B", "C"]).unwrap();
        assert_eq!((r.percent_agreement, r.kappa), (1.0, 1.0));

        let r = agreement(&["A"], &["A"]).unwrap();
        assert_eq!((r.percent_agreement, r.expected_agreement, r.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn errors() {
        assert!(agreement::<&str>(&[], &[]).is_err());
        assert!(agreement(&["A"], &["A", "B"]).is_err());
    }

    #[test]
    fn sets_use_canonical_keys() {
        let s = LabelSchema::agenda_default();
        let set = |ls: &[&str]| ls.iter().map(|l| l.to_string()).collect::<BTreeSet<_>>();
        let a = [set(&["PeacefulProtest", "Engagement"]), set(&["Other"])];
        let b = [set(&["Engagement", "PeacefulProtest"]), set(&["Engagement"])];
        let r = agreement_sets(&a, &b, &s).unwrap();
        assert_eq!(r.percent_agreement, 0.5);
    }
}
