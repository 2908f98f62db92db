use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{EmbedRequest, Embedder};
use crate::classify::cosine;
use crate::dataprep::render_hypothesis;
use crate::dataset::Message;
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

/// Which label text messages are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorText {
    #[default]
    Definition,
    Hypothesis,
}

impl std::str::FromStr for AnchorText {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "definition" => Ok(AnchorText::Definition),
            "hypothesis" => Ok(AnchorText::Hypothesis),
            _ => Err(Error::validation(format!("unknown anchor text `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub k_per_label: usize,
    #[serde(default)]
    pub source_text: AnchorText,
    /// Labels to build queues for. `None` means every label except the fallback.
    #[serde(default)]
    pub target_labels: Option<Vec<String>>,
    pub sample_fraction: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        BootstrapConfig {
            k_per_label: 500,
            source_text: AnchorText::Definition,
            target_labels: None,
            sample_fraction: 0.10,
            seed,
        }
    }

    pub fn validate(&self, schema: &LabelSchema) -> Result<()> {
        if self.k_per_label == 0 {
            return Err(Error::validation("k_per_label must be at least 1"));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::validation(format!(
                "sample_fraction {} outside (0, 1]",
                self.sample_fraction
            )));
        }
        if let Some(t) = &self.target_labels {
            if t.is_empty() {
                return Err(Error::validation("target_labels is empty"));
            }
            schema.check_labels(t.iter().map(String::as_str))?;
        }
        Ok(())
    }

    /// Target labels in schema order.
    pub fn targets(&self, schema: &LabelSchema) -> Vec<String> {
        match &self.target_labels {
            Some(t) => schema.canonical_order(t),
            None => schema
                .ids()
                .filter(|l| *l != schema.other_id())
                .map(str::to_owned)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMessage {
    pub message_id: String,
    pub label: String,
    pub similarity: f64,
    /// 1-based position within the label's ranking.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Top `k` per label, labels in schema order, ranks ascending.
    pub selected: Vec<RankedMessage>,
    /// Everything below the cutoff, kept so later rounds can revisit it.
    pub below_cutoff: Vec<RankedMessage>,
    pub n_messages: usize,
}

/// Draws `floor(fraction * len)` messages from each file without
/// replacement. File `i` uses the ChaCha8 stream `i` of `seed`; each file's
/// sample keeps its original order.
pub fn sample_per_file(files: &[Vec<Message>], fraction: f64, seed: u64) -> Result<Vec<Message>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::validation(format!("sample fraction {fraction} outside (0, 1]")));
    }
    let mut out = Vec::new();
    for (i, file) in files.iter().enumerate() {
        let k = ((fraction * file.len() as f64).floor() as usize).min(file.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut idx = sample(&mut rng, file.len(), k).into_vec();
        idx.sort_unstable();
        out.extend(idx.into_iter().map(|j| file[j].clone()));
    }
    Ok(out)
}

fn anchor(schema: &LabelSchema, label: &str, lang: &str, source: AnchorText) -> Result<String> {
    match source {
        AnchorText::Hypothesis => render_hypothesis(schema, label, lang),
        AnchorText::Definition => schema
            .get(label)
            .and_then(|l| l.definition.get(lang).cloned())
            .ok_or_else(|| {
                Error::Schema(format!("label `{label}` has no definition for language `{lang}`"))
            }),
    }
}

/// Ranks every message against each target label's anchor text in the
/// message's language. Ties in similarity break by message id.
pub fn rank_candidates(
    corpus: &[Message],
    schema: &LabelSchema,
    embedder: &dyn Embedder,
    cfg: &BootstrapConfig,
) -> Result<Ranking> {
    cfg.validate(schema)?;
    if corpus.is_empty() {
        return Err(Error::Precondition("no messages to rank".into()));
    }
    let targets = cfg.targets(schema);
    let langs: Vec<&str> = {
        let mut v: Vec<&str> = corpus.iter().map(|m| m.lang.as_str()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut anchor_reqs = Vec::new();
    for &lang in &langs {
        for l in &targets {
            anchor_reqs.push(EmbedRequest {
                text: anchor(schema, l, lang, cfg.source_text)?,
                lang: lang.to_owned(),
            });
        }
    }
    let anchors = embedder.embed_batch(&anchor_reqs)?;
    let anchors: BTreeMap<&str, &[_]> = langs
        .iter()
        .copied()
        .zip(anchors.chunks(targets.len()))
        .collect();
    let msg_reqs: Vec<EmbedRequest> = corpus
        .iter()
        .map(|m| EmbedRequest {
            text: m.text.clone(),
            lang: m.lang.clone(),
        })
        .collect();
    let vecs = embedder.embed_batch(&msg_reqs)?;

    let per_label: Vec<(Vec<RankedMessage>, Vec<RankedMessage>)> = targets
        .par_iter()
        .enumerate()
        .map(|(j, label)| {
            let mut scored = corpus
                .iter()
                .zip(&vecs)
                .map(|(m, v)| Ok((m.id.as_str(), cosine(v, &anchors[m.lang.as_str()][j])?)))
                .collect::<Result<Vec<_>>>()?;
            scored.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| a.0.cmp(b.0))
            });
            let mut ranked: Vec<RankedMessage> = scored
                .into_iter()
                .enumerate()
                .map(|(i, (id, similarity))| RankedMessage {
                    message_id: id.to_owned(),
                    label: label.clone(),
                    similarity,
                    rank: i + 1,
                })
                .collect();
            let rest = ranked.split_off(cfg.k_per_label.min(ranked.len()));
            Ok((ranked, rest))
        })
        .collect::<Result<_>>()?;

    let mut ranking = Ranking {
        selected: Vec::new(),
        below_cutoff: Vec::new(),
        n_messages: corpus.len(),
    };
    for (sel, rest) in per_label {
        ranking.selected.extend(sel);
        ranking.below_cutoff.extend(rest);
    }
    Ok(ranking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{EmbeddingVector, MockEmbedder};

    #[test]
    fn cosine_hand_values() {
        let v = |x: Vec<f64>| EmbeddingVector::new(x).unwrap();
        assert_eq!(cosine(&v(vec![1.0, 0.0]), &v(vec![0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&v(vec![1.0, 1.0]), &v(vec![1.0, 0.0])).unwrap();
        assert!((c - 0.70711).abs() < 1e-5);
        assert!((c - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    fn schema() -> LabelSchema {
        use crate::schema::LabelDef;
        LabelSchema::new(
            vec![
                LabelDef::new("A").with_name("en", "a").with_definition("en", "def a"),
                LabelDef::new("Other").with_name("en", "other"),
            ],
            "Other",
        )
        .unwrap()
    }

    #[test]
    fn top_k_with_id_tiebreak() {
        let emb = MockEmbedder::new(2, 0)
            .with_vector("def a", vec![1.0, 0.0])
            .unwrap()
            .with_vector("high", vec![0.9, (1.0f64 - 0.81).sqrt()])
            .unwrap()
            .with_vector("mid", vec![0.8, 0.6])
            .unwrap()
            .with_vector("low", vec![0.1, (1.0f64 - 0.01).sqrt()])
            .unwrap();
        let corpus = [
            Message::new("m3", "low", "en"),
            Message::new("m2", "mid", "en"),
            Message::new("m1", "high", "en"),
            Message::new("m0", "mid", "en"),
        ];
        let cfg = BootstrapConfig { k_per_label: 2, ..BootstrapConfig::new(0) };
        let r = rank_candidates(&corpus, &schema(), &emb, &cfg).unwrap();
        let ids: Vec<(&str, usize)> = r.selected.iter().map(|c| (c.message_id.as_str(), c.rank)).collect();
        assert_eq!(ids, [("m1", 1), ("m0", 2)]);
        let rest: Vec<&str> = r.below_cutoff.iter().map(|c| c.message_id.as_str()).collect();
        assert_eq!(rest, ["m2", "m3"]);
        assert!(r.selected.iter().all(|c| c.label == "A"));
    }

    #[test]
    fn missing_definition_and_bad_config() {
        let emb = MockEmbedder::new(4, 0);
        let corpus = [Message::new("m", "text", "en")];
        let cfg = BootstrapConfig { target_labels: Some(vec!["Other".into()]), ..BootstrapConfig::new(0) };
        assert!(matches!(rank_candidates(&corpus, &schema(), &emb, &cfg), Err(Error::Schema(_))));
        let cfg = BootstrapConfig { k_per_label: 0, ..BootstrapConfig::new(0) };
        assert!(rank_candidates(&corpus, &schema(), &emb, &cfg).is_err());
        assert!(rank_candidates(&[], &schema(), &emb, &BootstrapConfig::new(0)).is_err());
    }

    #[test]
    fn per_file_sampling() {
        let file = |p: &str, n: usize| -> Vec<Message> {
            (0..n).map(|i| Message::new(format!("{p}{i:03}"), "t", "en")).collect()
        };
        let files = [file("a", 100), file("b", 35), file("c", 5)];
        let s = sample_per_file(&files, 0.10, 9).unwrap();
        assert_eq!(s.len(), 10 + 3);
        assert_eq!(s, sample_per_file(&files, 0.10, 9).unwrap());
        assert_ne!(s, sample_per_file(&files, 0.10, 10).unwrap());
        assert_eq!(sample_per_file(&files, 1.0, 0).unwrap().len(), 140);
        assert!(sample_per_file(&files, 0.0, 0).is_err());
    }
}
