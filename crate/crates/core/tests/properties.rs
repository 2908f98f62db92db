use std::collections::{BTreeMap, BTreeSet};

use agenda_core::classify::{calibrate_threshold, decide_labels, ScoreMatrix, ScoreRow};
use agenda_core::dataprep::{make_pairs, PairGenConfig, Verdict};
use agenda_core::eval::{
    agreement, multilabel_confusion, multilabel_metrics, LabelSets, EXTRA, MISSED,
};
use agenda_core::{split_dataset, Dataset, LabelSchema, Message, SplitSpec};
use proptest::prelude::*;

fn schema() -> LabelSchema {
    LabelSchema::agenda_default()
}

fn labels() -> Vec<String> {
    schema().ids().map(str::to_owned).collect()
}

/// Non-empty subset of the schema labels, from a 6-bit mask.
fn label_set() -> impl Strategy<Value = BTreeSet<String>> {
    (1u8..64).prop_map(|mask| {
        labels()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, l)| l)
            .collect()
    })
}

fn aligned_sets(max: usize) -> impl Strategy<Value = (LabelSets, LabelSets)> {
    prop::collection::vec((label_set(), label_set()), 1..max).prop_map(|v| {
        let mut g = LabelSets::new();
        let mut p = LabelSets::new();
        for (i, (a, b)) in v.into_iter().enumerate() {
            g.insert(format!("m{i:03}"), a);
            p.insert(format!("m{i:03}"), b);
        }
        (p, g)
    })
}

fn score_row() -> impl Strategy<Value = BTreeMap<String, f64>> {
    prop::collection::vec(0.0f64..=1.0, 6).prop_map(|v| labels().into_iter().zip(v).collect())
}

fn dataset() -> impl Strategy<Value = Dataset> {
    // (is paired, gold mask) per unit
    prop::collection::vec((any::<bool>(), 1u8..64), 20..80).prop_map(|units| {
        let all = labels();
        let gold = |mask: u8| -> Vec<String> {
            all.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, l)| l.clone()).collect()
        };
        let mut msgs = Vec::new();
        for (i, (paired, mask)) in units.into_iter().enumerate() {
            if paired {
                msgs.push(Message::new(format!("u{i}-en"), "text", "en").with_pair(format!("p{i}")).with_gold(gold(mask)));
                msgs.push(Message::new(format!("u{i}-fr"), "texte", "fr").with_pair(format!("p{i}")).with_gold(gold(mask)));
            } else {
                msgs.push(Message::new(format!("u{i}"), "text", "en").with_gold(gold(mask)));
            }
        }
        Dataset::new(msgs, &schema()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_units(ds in dataset(), seed in any::<u64>()) {
        let s = split_dataset(&ds, &SplitSpec::new("R1", seed)).unwrap();
        let all: BTreeSet<&String> = s.train.iter().chain(&s.dev).chain(&s.test).collect();
        prop_assert_eq!(all.len(), ds.len());
        prop_assert_eq!(s.train.len() + s.dev.len() + s.test.len(), ds.len());
        for m in ds.messages() {
            if let Some(c) = ds.counterpart(&m.id) {
                let same = [&s.train, &s.dev, &s.test].iter().any(|p| p.contains(&m.id) && p.contains(&c.id));
                prop_assert!(same, "pair {} / {} split apart", m.id, c.id);
            }
        }
        prop_assert_eq!(s.clone(), split_dataset(&ds, &SplitSpec::new("R1", seed)).unwrap());
    }

    #[test]
    fn dataset_jsonl_round_trip(ds in dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        agenda_core::write_dataset(&path, &ds).unwrap();
        let back = agenda_core::load_dataset(&path, &schema()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn pair_counts(ds in dataset(), seed in any::<u64>(), n in 0usize..7) {
        let cfg = PairGenConfig { negatives_per_positive: n, seed };
        let pairs = make_pairs(ds.messages(), &schema(), &cfg).unwrap();
        let mut expected = 0;
        for m in ds.messages() {
            let g = m.gold_set().unwrap();
            expected += g.len() * (1 + n.min(6 - g.len()));
            for p in pairs.iter().filter(|p| p.source_message_id.as_deref() == Some(m.id.as_str())) {
                let in_gold = g.contains(p.label_id.as_deref().unwrap());
                prop_assert_eq!(in_gold, p.verdict == Verdict::Entailment);
            }
        }
        prop_assert_eq!(pairs.len(), expected);
    }

    #[test]
    fn decisions_are_monotone(row in score_row(), a in 30u32..=99, b in 30u32..=99) {
        let s = schema();
        let (lo, hi) = (a.min(b) as f64 / 100.0, a.max(b) as f64 / 100.0);
        let at_lo: BTreeSet<String> = decide_labels(&row, &s, lo).unwrap().into_iter().collect();
        let at_hi: BTreeSet<String> = decide_labels(&row, &s, hi).unwrap().into_iter().collect();
        prop_assert!(!at_hi.is_empty());
        for l in at_hi.iter().filter(|l| *l != "Other") {
            prop_assert!(at_lo.contains(l));
        }
        let fires = row.values().all(|&v| v < hi);
        prop_assert_eq!(fires, at_hi == BTreeSet::from(["Other".to_string()]) && row["Other"] < hi);
    }

    #[test]
    fn calibration_ignores_row_order(rows in prop::collection::vec((score_row(), label_set()), 1..15)) {
        let s = schema();
        let mut gold = LabelSets::new();
        let mut score_rows = Vec::new();
        for (i, (scores, g)) in rows.into_iter().enumerate() {
            gold.insert(format!("m{i}"), g);
            score_rows.push(ScoreRow { id: format!("m{i}"), lang: "en".into(), scores });
        }
        let fwd = calibrate_threshold(&ScoreMatrix::new(score_rows.clone(), &s).unwrap(), &gold, &s, 0.01).unwrap();
        score_rows.reverse();
        let rev = calibrate_threshold(&ScoreMatrix::new(score_rows, &s).unwrap(), &gold, &s, 0.01).unwrap();
        prop_assert_eq!(fwd.tau, rev.tau);
        prop_assert!((fwd.objective - rev.objective).abs() < 1e-12);
        prop_assert!(fwd.tau >= 0.30 && fwd.tau <= 0.99);
    }

    #[test]
    fn confusion_margins((preds, gold) in aligned_sets(30)) {
        let s = schema();
        let m = multilabel_confusion(&preds, &gold, &s).unwrap();
        for (i, l) in s.ids().enumerate() {
            let g = gold.values().filter(|x| x.contains(l)).count() as u64;
            let p = preds.values().filter(|x| x.contains(l)).count() as u64;
            prop_assert_eq!(m.row_sum(i), g);
            prop_assert_eq!(m.col_sum(i), p);
        }
        prop_assert_eq!(m.get(EXTRA, MISSED).unwrap(), 0);
    }

    #[test]
    fn single_label_f1_from_confusion(v in prop::collection::vec((0usize..6, 0usize..6), 1..40)) {
        let s = schema();
        let ls = labels();
        let mut gold = LabelSets::new();
        let mut preds = LabelSets::new();
        for (i, (g, p)) in v.iter().enumerate() {
            gold.insert(format!("m{i}"), [ls[*g].clone()].into());
            preds.insert(format!("m{i}"), [ls[*p].clone()].into());
        }
        let cm = multilabel_confusion(&preds, &gold, &s).unwrap();
        let mut f1 = 0.0;
        let total = v.len() as f64;
        for c in 0..6 {
            let tp = cm.counts[c][c] as f64;
            let support = cm.row_sum(c) as f64;
            let predicted = cm.col_sum(c) as f64;
            if tp > 0.0 {
                f1 += support / total * (2.0 * tp / (support + predicted));
            }
        }
        let report = multilabel_metrics(&preds, &gold, &s).unwrap();
        prop_assert!((report.weighted_f1 - f1).abs() < 1e-12);
    }

    #[test]
    fn kappa_ignores_category_names(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..50), shift in 1u8..4) {
        let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let relabel = |v: &[u8]| v.iter().map(|x| (x + shift) % 4 * 7).collect::<Vec<_>>();
        let r1 = agreement(&a, &b).unwrap();
        let r2 = agreement(&relabel(&a), &relabel(&b)).unwrap();
        prop_assert!((r1.kappa - r2.kappa).abs() < 1e-12);
        prop_assert!(r1.kappa <= 1.0 + 1e-12);
    }
}
