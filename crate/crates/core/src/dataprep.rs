//! Entailment training data: NLI binarization, hypothesis rendering,
//! message-to-label pair generation, and translation mixing.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, Translator};
use crate::dataset::Message;
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliExample {
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub lang: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Entailment,
    NotEntailment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Nli,
    Agenda,
    Synthetic,
}

/// One training/evaluation record in the pair-file format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntailmentPair {
    pub premise: String,
    pub hypothesis: String,
    pub verdict: Verdict,
    pub lang: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_message_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_id: Option<String>,
}

/// Collapses the three NLI classes into entailment / not entailment.
pub fn binarize_nli(ex: NliExample) -> EntailmentPair {
    let verdict = match ex.label {
        NliLabel::Entailment => Verdict::Entailment,
        NliLabel::Neutral | NliLabel::Contradiction => Verdict::NotEntailment,
    };
    EntailmentPair {
        premise: ex.premise,
        hypothesis: ex.hypothesis,
        verdict,
        lang: ex.lang,
        origin: Origin::Nli,
        source_message_id: None,
        label_id: None,
    }
}

/// Curated hypothesis for `(label, lang)` if the schema has one, otherwise
/// the language's template filled with the label's name.
pub fn render_hypothesis(schema: &LabelSchema, label_id: &str, lang: &str) -> Result<String> {
    let label = schema
        .get(label_id)
        .ok_or_else(|| Error::UnknownLabel(label_id.to_owned()))?;
    if let Some(h) = label.hypothesis.get(lang) {
        return Ok(h.clone());
    }
    let name = label.name.get(lang).ok_or_else(|| {
        Error::Schema(format!("label `{label_id}` has no name for language `{lang}`"))
    })?;
    Ok(schema.template(lang).replace("{name}", name))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairGenConfig {
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for PairGenConfig {
    fn default() -> Self {
        PairGenConfig {
            negatives_per_positive: 2,
            seed: 0,
        }
    }
}

/// One entailment pair per gold label, each followed by up to
/// `negatives_per_positive` not-entailment pairs whose labels are drawn
/// uniformly without replacement from the labels the message does not carry.
pub fn make_pairs(
    msgs: &[Message],
    schema: &LabelSchema,
    cfg: &PairGenConfig,
) -> Result<Vec<EntailmentPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for m in msgs {
        let gold = m.gold_set()?;
        schema.check_labels(gold.iter().map(String::as_str))?;
        let complement = negative_pool(schema, &gold);
        let pair = |label: &str, verdict| -> Result<EntailmentPair> {
            Ok(EntailmentPair {
                premise: m.text.clone(),
                hypothesis: render_hypothesis(schema, label, &m.lang)?,
                verdict,
                lang: m.lang.clone(),
                origin: Origin::Agenda,
                source_message_id: Some(m.id.clone()),
                label_id: Some(label.to_owned()),
            })
        };
        for positive in schema.ids().filter(|l| gold.contains(*l)) {
            out.push(pair(positive, Verdict::Entailment)?);
            let k = cfg.negatives_per_positive.min(complement.len());
            for neg in complement.choose_multiple(&mut rng, k) {
                out.push(pair(neg, Verdict::NotEntailment)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    pub fraction: f64,
    pub target_lang: String,
    pub seed: u64,
}

impl MixConfig {
    pub fn new(target_lang: impl Into<String>, seed: u64) -> Self {
        MixConfig {
            fraction: 0.30,
            target_lang: target_lang.into(),
            seed,
        }
    }
}

/// What [`mix_translations`] did, for output metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixReport {
    /// Translated pairs replace their originals, so the pair count is unchanged.
    pub mode: String,
    pub fraction: f64,
    pub target_lang: String,
    pub seed: u64,
    pub selected: Vec<usize>,
}

/// Translates `floor(fraction * n)` seeded-uniformly chosen pairs in place
/// (premise and hypothesis together). Verdicts never change; selected pairs
/// already in the target language are kept as they are.
pub fn mix_translations(
    pairs: &[EntailmentPair],
    mt: &dyn Translator,
    cfg: &MixConfig,
) -> Result<(Vec<EntailmentPair>, MixReport)> {
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return Err(Error::validation(format!(
            "mix fraction {} outside [0, 1]",
            cfg.fraction
        )));
    }
    let n = pairs.len();
    let k = ((cfg.fraction * n as f64).floor() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut selected = sample(&mut rng, n, k).into_vec();
    selected.sort_unstable();

    let mut out = pairs.to_vec();
    for &i in &selected {
        let p = &mut out[i];
        if p.lang == cfg.target_lang {
            continue;
        }
        let tr = |text: &str| {
            mt.translate(text, &p.lang, &cfg.target_lang)
                .map_err(|e| BackendError::Batch {
                    failed: vec![i],
                    source: Box::new(e),
                })
        };
        let premise = tr(&p.premise)?;
        let hypothesis = tr(&p.hypothesis)?;
        p.premise = premise;
        p.hypothesis = hypothesis;
        p.lang = cfg.target_lang.clone();
    }
    let report = MixReport {
        mode: "replace".into(),
        fraction: cfg.fraction,
        target_lang: cfg.target_lang.clone(),
        seed: cfg.seed,
        selected,
    };
    Ok((out, report))
}

/// A row read from an NLI corpus file. RTE ships binary labels, so
/// `not_entailment` rows bypass the three-class path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NliRow {
    ThreeWay(NliExample),
    Binary(EntailmentPair),
}

impl NliRow {
    pub fn into_pair(self) -> EntailmentPair {
        match self {
            NliRow::ThreeWay(ex) => binarize_nli(ex),
            NliRow::Binary(p) => p,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub skipped: usize,
}

fn parse_row(premise: &str, hypothesis: &str, label: &str, lang: &str) -> Option<NliRow> {
    let (premise, hypothesis) = (premise.trim(), hypothesis.trim());
    if premise.is_empty() || hypothesis.is_empty() {
        return None;
    }
    let three = |label| {
        Some(NliRow::ThreeWay(NliExample {
            premise: premise.to_owned(),
            hypothesis: hypothesis.to_owned(),
            label,
            lang: lang.to_owned(),
        }))
    };
    match label.trim() {
        "entailment" | "0" => three(NliLabel::Entailment),
        "neutral" => three(NliLabel::Neutral),
        "contradiction" => three(NliLabel::Contradiction),
        "not_entailment" => Some(NliRow::Binary(EntailmentPair {
            premise: premise.to_owned(),
            hypothesis: hypothesis.to_owned(),
            verdict: Verdict::NotEntailment,
            lang: lang.to_owned(),
            origin: Origin::Nli,
            source_message_id: None,
            label_id: None,
        })),
        _ => None,
    }
}

/// SNLI / MNLI JSON Lines: `sentence1`, `sentence2`, `gold_label`.
/// Rows without a consensus label (`-`) or otherwise unparseable are skipped.
pub fn read_nli_jsonl(path: &Path, lang: &str) -> Result<(Vec<NliRow>, usize)> {
    #[derive(Deserialize)]
    struct Raw {
        sentence1: Option<String>,
        sentence2: Option<String>,
        gold_label: Option<String>,
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut skipped = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row = serde_json::from_str::<Raw>(line).ok().and_then(|r| {
            parse_row(
                r.sentence1.as_deref()?,
                r.sentence2.as_deref()?,
                r.gold_label.as_deref()?,
                lang,
            )
        });
        match row {
            Some(r) => rows.push(r),
            None => skipped += 1,
        }
    }
    Ok((rows, skipped))
}

/// GLUE-style TSV with a header naming `sentence1`, `sentence2` and a
/// `gold_label` or `label` column (RTE, MNLI).
pub fn read_nli_tsv(path: &Path, lang: &str) -> Result<(Vec<NliRow>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let (Some(s1), Some(s2), Some(lab)) = (
        col("sentence1"),
        col("sentence2"),
        col("gold_label").or_else(|| col("label")),
    ) else {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: "header needs sentence1, sentence2 and gold_label/label columns".into(),
        });
    };
    let mut rows = Vec::new();
    let mut skipped = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split('\t').collect();
        let row = match (cells.get(s1), cells.get(s2), cells.get(lab)) {
            (Some(p), Some(h), Some(l)) => parse_row(p, h, l, lang),
            _ => None,
        };
        match row {
            Some(r) => rows.push(r),
            None => skipped += 1,
        }
    }
    Ok((rows, skipped))
}

/// Reads every `*.jsonl` and `*.tsv` file under `dir` (sorted by path) and
/// returns the merged, binarized training set.
pub fn ingest_nli_dir(dir: &Path, lang: &str) -> Result<(Vec<EntailmentPair>, IngestReport)> {
    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "tsv")) {
                files.push(path);
            }
        }
    }
    files.sort();
    let mut report = IngestReport::default();
    let mut pairs = Vec::new();
    for f in &files {
        let (rows, skipped) = if f.extension().is_some_and(|e| e == "tsv") {
            read_nli_tsv(f, lang)?
        } else {
            read_nli_jsonl(f, lang)?
        };
        if skipped > 0 {
            log::warn!("{}: skipped {skipped} unparseable rows", f.display());
        }
        report.rows += rows.len();
        report.skipped += skipped;
        pairs.extend(rows.into_iter().map(NliRow::into_pair));
    }
    report.files = files;
    Ok((pairs, report))
}

/// Labels a message does not carry, in schema order.
pub fn negative_pool<'a>(schema: &'a LabelSchema, gold: &BTreeSet<String>) -> Vec<&'a str> {
    schema.ids().filter(|l| !gold.contains(*l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::MockTranslator;
    use crate::schema::LabelDef;

    fn ex(label: NliLabel) -> NliExample {
        NliExample {
            premise: "p".into(),
            hypothesis: "h".into(),
            label,
            lang: "en".into(),
        }
    }

    #[test]
    fn binarization_table() {
        assert_eq!(binarize_nli(ex(NliLabel::Entailment)).verdict, Verdict::Entailment);
        assert_eq!(binarize_nli(ex(NliLabel::Neutral)).verdict, Verdict::NotEntailment);
        assert_eq!(binarize_nli(ex(NliLabel::Contradiction)).verdict, Verdict::NotEntailment);
        let p = binarize_nli(ex(NliLabel::Neutral));
        assert_eq!((p.premise.as_str(), p.hypothesis.as_str(), p.lang.as_str()), ("p", "h", "en"));
        assert_eq!(p.origin, Origin::Nli);
    }

    #[test]
    fn curated_hypotheses() {
        let s = LabelSchema::agenda_default();
        assert_eq!(
            render_hypothesis(&s, "Other", "en").unwrap(),
            "The text is about something else."
        );
        assert_eq!(
            render_hypothesis(&s, "PeacefulProtest", "fr").unwrap(),
            "Le message motive les lecteurs à manifester pacifiquement pour soutenir ou s'opposer à une cause."
        );
        assert!(matches!(render_hypothesis(&s, "Voting", "en"), Err(Error::UnknownLabel(_))));
        assert!(render_hypothesis(&s, "Other", "de").is_err());
    }

    #[test]
    fn template_fallback() {
        let s = LabelSchema::new(
            vec![
                LabelDef::new("Strikes").with_name("en", "strikes").with_name("fr", "grèves"),
                LabelDef::new("Other").with_name("en", "other"),
            ],
            "Other",
        )
        .unwrap();
        assert_eq!(render_hypothesis(&s, "Strikes", "en").unwrap(), "This text is about strikes.");
        let s = s.with_templates([("fr".to_string(), "Ce texte parle de {name}.".to_string())].into());
        assert_eq!(render_hypothesis(&s, "Strikes", "fr").unwrap(), "Ce texte parle de grèves.");
    }

    fn msg(id: &str, gold: &[&str]) -> Message {
        Message::new(id, format!("text of {id}"), "en").with_gold(gold.iter().copied())
    }

    #[test]
    fn pair_counts() {
        let s = LabelSchema::agenda_default();
        let cfg = PairGenConfig { negatives_per_positive: 2, seed: 1 };

        let one = make_pairs(&[msg("a", &["Engagement"])], &s, &cfg).unwrap();
        assert_eq!(one.len(), 3);
        assert_eq!(one[0].verdict, Verdict::Entailment);
        assert_eq!(one[0].label_id.as_deref(), Some("Engagement"));
        for p in &one[1..] {
            assert_eq!(p.verdict, Verdict::NotEntailment);
            assert_ne!(p.label_id.as_deref(), Some("Engagement"));
        }
        assert_ne!(one[1].label_id, one[2].label_id);

        let two = make_pairs(&[msg("b", &["PeacefulProtest", "Engagement"])], &s, &cfg).unwrap();
        assert_eq!(two.len(), 6);
        // gold labels come out in schema order
        assert_eq!(two[0].label_id.as_deref(), Some("Engagement"));
        assert_eq!(two[3].label_id.as_deref(), Some("PeacefulProtest"));

        let all: Vec<&str> = s.ids().collect();
        let full = make_pairs(&[msg("c", &all)], &s, &cfg).unwrap();
        assert_eq!(full.len(), 6);
        assert!(full.iter().all(|p| p.verdict == Verdict::Entailment));
    }

    #[test]
    fn pairs_need_gold() {
        let s = LabelSchema::agenda_default();
        let m = Message::new("x", "t", "en");
        assert!(make_pairs(&[m], &s, &PairGenConfig::default()).is_err());
    }

    fn pairs(n: usize) -> Vec<EntailmentPair> {
        (0..n)
            .map(|i| EntailmentPair {
                premise: format!("premise {i}"),
                hypothesis: format!("hypothesis {i}"),
                verdict: if i % 3 == 0 { Verdict::Entailment } else { Verdict::NotEntailment },
                lang: "en".into(),
                origin: Origin::Nli,
                source_message_id: None,
                label_id: None,
            })
            .collect()
    }

    #[test]
    fn mix_selects_floor_fraction() {
        let mt = MockTranslator::new();
        let input = pairs(10);
        let (out, report) = mix_translations(&input, &mt, &MixConfig::new("fr", 4)).unwrap();
        assert_eq!(report.selected.len(), 3);
        assert_eq!(out.iter().filter(|p| p.lang == "fr").count(), 3);
        for (a, b) in input.iter().zip(&out) {
            assert_eq!(a.verdict, b.verdict);
        }

        let zero = MixConfig { fraction: 0.0, ..MixConfig::new("fr", 4) };
        assert_eq!(mix_translations(&input, &mt, &zero).unwrap().0, input);

        let full = MixConfig { fraction: 1.0, ..MixConfig::new("fr", 4) };
        let (out, _) = mix_translations(&input, &mt, &full).unwrap();
        assert!(out.iter().all(|p| p.lang == "fr"));
    }

    #[test]
    fn mix_uses_translations_and_reports_failures() {
        let mt = MockTranslator::new()
            .with_translation("premise 0", "en", "fr", "prémisse 0")
            .with_translation("hypothesis 0", "en", "fr", "hypothèse 0");
        let input = pairs(1);
        let cfg = MixConfig { fraction: 1.0, ..MixConfig::new("fr", 0) };
        let (out, _) = mix_translations(&input, &mt, &cfg).unwrap();
        assert_eq!(out[0].premise, "prémisse 0");
        assert_eq!(out[0].hypothesis, "hypothèse 0");

        let de = MixConfig { fraction: 1.0, ..MixConfig::new("de", 0) };
        let err = mix_translations(&pairs(3), &mt, &de).unwrap_err();
        match err {
            Error::Backend(e) => assert_eq!(e.failed_indices(), &[0]),
            other => panic!("unexpected {other}"),
        }
        let bad = MixConfig { fraction: 1.5, ..MixConfig::new("fr", 0) };
        assert!(mix_translations(&input, &mt, &bad).is_err());
    }

    #[test]
    fn mix_keeps_pairs_already_in_target_language() {
        // an en-only translator would fail on fr input
        let mt = MockTranslator::with_pairs([("en", "fr")]);
        let mut input = pairs(4);
        input[1].lang = "fr".into();
        let cfg = MixConfig { fraction: 1.0, ..MixConfig::new("fr", 0) };
        let (out, report) = mix_translations(&input, &mt, &cfg).unwrap();
        assert_eq!(report.selected, vec![0, 1, 2, 3]);
        assert_eq!(out[1], input[1]);
    }

    #[test]
    fn corpus_readers() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("snli.jsonl"),
            concat!(
                r#"{"sentence1":"A man sleeps.","sentence2":"A person rests.","gold_label":"entailment"}"#, "\n",
                r#"{"sentence1":"A man sleeps.","sentence2":"A cat runs.","gold_label":"neutral"}"#, "\n",
                r#"{"sentence1":"A man sleeps.","sentence2":"Nobody sleeps.","gold_label":"-"}"#, "\n",
                "not json\n",
            ),
        )
        .unwrap();
        std::fs::create_dir(dir.path().join("RTE")).unwrap();
        std::fs::write(
            dir.path().join("RTE/train.tsv"),
            "index\tsentence1\tsentence2\tlabel\n0\tIt rains.\tIt is wet.\tentailment\n1\tIt rains.\tIt is dry.\tnot_entailment\n2\tbroken\n",
        )
        .unwrap();
        let (pairs, report) = ingest_nli_dir(dir.path(), "en").unwrap();
        assert_eq!(report.files.len(), 2);
        assert_eq!(report.rows, 4);
        assert_eq!(report.skipped, 3);
        let verdicts: Vec<_> = pairs.iter().map(|p| p.verdict).collect();
        // RTE/train.tsv sorts before snli.jsonl
        assert_eq!(
            verdicts,
            [Verdict::Entailment, Verdict::NotEntailment, Verdict::Entailment, Verdict::NotEntailment]
        );
    }
}
