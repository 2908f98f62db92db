use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_counts, check_aligned, encode, weighted_from_counts, Counts, LabelSets};
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

/// Permuted statistics within this distance of the observed one count as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub model_a: String,
    pub model_b: String,
    pub iterations: usize,
    pub seed: u64,
}

impl SignificanceConfig {
    pub fn new(seed: u64) -> Self {
        SignificanceConfig {
            model_a: "a".into(),
            model_b: "b".into(),
            iterations: 10_000,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub model_a: String,
    pub model_b: String,
    pub weighted_f1_a: f64,
    pub weighted_f1_b: f64,
    /// `|F1_a - F1_b|`.
    pub statistic: f64,
    pub p_value: f64,
    pub significant_at_0_05: bool,
    pub significant_at_0_01: bool,
    pub iterations: usize,
    pub seed: u64,
    pub test: String,
}

fn delta(enc_gold: &[Vec<usize>], a: &[&Vec<usize>], b: &[&Vec<usize>], n_labels: usize) -> f64 {
    let mut ca = vec![Counts::default(); n_labels];
    let mut cb = vec![Counts::default(); n_labels];
    for ((g, pa), pb) in enc_gold.iter().zip(a).zip(b) {
        add_counts(&mut ca, g, pa);
        add_counts(&mut cb, g, pb);
    }
    (weighted_from_counts(&ca) - weighted_from_counts(&cb)).abs()
}

/// Two-sided paired approximate randomization on weighted F1. Each iteration
/// swaps every example's two predictions with probability 1/2, drawing from a
/// ChaCha8 stream keyed by `(seed, iteration)`, so results do not depend on
/// thread scheduling.
pub fn compare_significance(
    preds_a: &LabelSets,
    preds_b: &LabelSets,
    gold: &LabelSets,
    schema: &LabelSchema,
    cfg: &SignificanceConfig,
) -> Result<SignificanceResult> {
    if cfg.iterations == 0 {
        return Err(Error::validation("iterations must be positive"));
    }
    check_aligned(preds_a, preds_b, "model a/model b")?;
    let ea = encode(preds_a, gold, schema)?;
    let eb = encode(preds_b, gold, schema)?;
    let n_labels = schema.len();
    let pa: Vec<&Vec<usize>> = ea.pred.iter().collect();
    let pb: Vec<&Vec<usize>> = eb.pred.iter().collect();

    let f1 = |p: &[&Vec<usize>]| {
        let mut c = vec![Counts::default(); n_labels];
        for (g, p) in ea.gold.iter().zip(p) {
            add_counts(&mut c, g, p);
        }
        weighted_from_counts(&c)
    };
    let (f1_a, f1_b) = (f1(&pa), f1(&pb));
    let observed = (f1_a - f1_b).abs();

    let hits: usize = (0..cfg.iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let mut x = Vec::with_capacity(pa.len());
            let mut y = Vec::with_capacity(pa.len());
            for (a, b) in pa.iter().zip(&pb) {
                if rng.gen_bool(0.5) {
                    x.push(*b);
                    y.push(*a);
                } else {
                    x.push(*a);
                    y.push(*b);
                }
            }
            usize::from(delta(&ea.gold, &x, &y, n_labels) >= observed - TIE_EPS)
        })
        .sum();
    let p_value = (1 + hits) as f64 / (1 + cfg.iterations) as f64;
    Ok(SignificanceResult {
        model_a: cfg.model_a.clone(),
        model_b: cfg.model_b.clone(),
        weighted_f1_a: f1_a,
        weighted_f1_b: f1_b,
        statistic: observed,
        p_value,
        significant_at_0_05: p_value < 0.05,
        significant_at_0_01: p_value < 0.01,
        iterations: cfg.iterations,
        seed: cfg.seed,
        test: "paired approximate randomization, two-sided".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::LabelDef;

    fn schema() -> LabelSchema {
        LabelSchema::new(
            ["A", "B", "Other"].map(|l| LabelDef::new(l).with_name("en", l)).to_vec(),
            "Other",
        )
        .unwrap()
    }

    fn sets(ls: &[&str]) -> LabelSets {
        ls.iter()
            .enumerate()
            .map(|(i, l)| (format!("m{i}"), [l.to_string()].into()))
            .collect()
    }

    #[test]
    fn identical_predictions_give_one() {
        let gold = sets(&["A", "B", "A", "Other"]);
        let p = sets(&["A", "A", "B", "Other"]);
        let r = compare_significance(&p, &p, &gold, &schema(), &SignificanceConfig::new(3)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant_at_0_05);
    }

    #[test]
    fn seeded_runs_repeat() {
        let gold = sets(&["A", "B", "A", "Other", "B", "A"]);
        let a = sets(&["A", "B", "A", "Other", "A", "A"]);
        let b = sets(&["B", "A", "A", "A", "B", "Other"]);
        let cfg = SignificanceConfig { iterations: 2000, ..SignificanceConfig::new(11) };
        let r1 = compare_significance(&a, &b, &gold, &schema(), &cfg).unwrap();
        let r2 = compare_significance(&a, &b, &gold, &schema(), &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.p_value > 0.0 && r1.p_value <= 1.0);
        let bad = SignificanceConfig { iterations: 0, ..cfg };
        assert!(compare_significance(&a, &b, &gold, &schema(), &bad).is_err());
    }
}
