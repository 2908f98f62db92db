//! Deterministic in-process backends.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    check_pair, check_text, BackendError, BackendResult, Embedder, EmbeddingVector,
    EntailmentScore, Scorer, Translator,
};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the parts (0xff-separated) followed by a splitmix64 mix with the seed.
pub fn stable_hash(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix64(h ^ mix64(seed))
}

/// Maps a hash onto `[0, 1)` using its top 53 bits.
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFixture {
    pub premise: String,
    pub hypothesis: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationFixture {
    pub text: String,
    pub src: String,
    pub tgt: String,
    pub output: String,
}

/// Fixture table shared by the three mock backends (`mock:<file.json>`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixtures {
    #[serde(default)]
    pub scores: Vec<ScoreFixture>,
    #[serde(default)]
    pub embeddings: Vec<(String, Vec<f64>)>,
    #[serde(default)]
    pub translations: Vec<TranslationFixture>,
    /// Supported `(src, tgt)` translation directions; empty means en↔fr.
    #[serde(default)]
    pub language_pairs: Vec<(String, String)>,
    /// Inputs (premise or text) that fail with `Unavailable`, for fault injection.
    #[serde(default)]
    pub failures: Vec<String>,
}

impl MockFixtures {
    pub fn load(path: &Path) -> BackendResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::InvalidInput(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::InvalidInput(format!("{}: {e}", path.display())))
    }
}

/// Fixture lookup first, otherwise a seeded hash of the pair mapped into `[0, 1)`.
#[derive(Debug, Clone, Default)]
pub struct MockScorer {
    seed: u64,
    table: HashMap<(String, String), f64>,
    failures: BTreeSet<String>,
}

impl MockScorer {
    pub fn new(seed: u64) -> Self {
        MockScorer {
            seed,
            ..Default::default()
        }
    }

    pub fn with_score(mut self, premise: &str, hypothesis: &str, score: f64) -> Self {
        self.table
            .insert((premise.to_owned(), hypothesis.to_owned()), score);
        self
    }

    pub fn with_fixtures(mut self, fx: &MockFixtures) -> Self {
        for f in &fx.scores {
            self = self.with_score(&f.premise, &f.hypothesis, f.score);
        }
        self.failures.extend(fx.failures.iter().cloned());
        self
    }

    pub fn failing_on(mut self, premise: &str) -> Self {
        self.failures.insert(premise.to_owned());
        self
    }
}

impl Scorer for MockScorer {
    fn score(&self, premise: &str, hypothesis: &str, _lang: &str) -> BackendResult<EntailmentScore> {
        check_pair(premise, hypothesis)?;
        if self.failures.contains(premise) {
            return Err(BackendError::Unavailable(format!("injected failure for `{premise}`")));
        }
        match self.table.get(&(premise.to_owned(), hypothesis.to_owned())) {
            Some(&p) => EntailmentScore::new(p),
            None => EntailmentScore::new(unit_interval(stable_hash(
                self.seed,
                &[premise.as_bytes(), hypothesis.as_bytes()],
            ))),
        }
    }
}

/// Hashed bag-of-words embeddings: each lowercase word contributes a seeded
/// pseudo-random direction, so texts sharing words have positive cosine.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
    table: HashMap<String, Vec<f64>>,
    failures: BTreeSet<String>,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        MockEmbedder {
            dim,
            seed,
            table: HashMap::new(),
            failures: BTreeSet::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_vector(mut self, text: &str, v: Vec<f64>) -> BackendResult<Self> {
        if v.len() != self.dim {
            return Err(BackendError::InvalidInput(format!(
                "fixture vector for `{text}` has dim {} but embedder dim is {}",
                v.len(),
                self.dim
            )));
        }
        self.table.insert(text.to_owned(), v);
        Ok(self)
    }

    pub fn with_fixtures(mut self, fx: &MockFixtures) -> BackendResult<Self> {
        for (text, v) in &fx.embeddings {
            self = self.with_vector(text, v.clone())?;
        }
        self.failures.extend(fx.failures.iter().cloned());
        Ok(self)
    }

    fn direction(&self, token: &str, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            let h = stable_hash(self.seed, &[token.as_bytes(), &(j as u64).to_le_bytes()]);
            *slot += 2.0 * unit_interval(h) - 1.0;
        }
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str, _lang: &str) -> BackendResult<EmbeddingVector> {
        check_text(text)?;
        if self.failures.contains(text) {
            return Err(BackendError::Unavailable(format!("injected failure for `{text}`")));
        }
        if let Some(v) = self.table.get(text) {
            return EmbeddingVector::new(v.clone());
        }
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            self.direction(token, &mut v);
            any = true;
        }
        if !any || v.iter().all(|x| *x == 0.0) {
            self.direction(&lower, &mut v);
        }
        EmbeddingVector::new(v)
    }
}

/// Identity translation plus a fixture table. Rejects unsupported directions.
#[derive(Debug, Clone)]
pub struct MockTranslator {
    pairs: BTreeSet<(String, String)>,
    table: HashMap<(String, String, String), String>,
    failures: BTreeSet<String>,
}

impl Default for MockTranslator {
    fn default() -> Self {
        Self::new()
    }
}

impl MockTranslator {
    /// Supports en→fr and fr→en.
    pub fn new() -> Self {
        Self::with_pairs([("en", "fr"), ("fr", "en")])
    }

    pub fn with_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        MockTranslator {
            pairs: pairs
                .into_iter()
                .map(|(s, t)| (s.to_owned(), t.to_owned()))
                .collect(),
            table: HashMap::new(),
            failures: BTreeSet::new(),
        }
    }

    pub fn with_translation(mut self, text: &str, src: &str, tgt: &str, output: &str) -> Self {
        self.table
            .insert((text.to_owned(), src.to_owned(), tgt.to_owned()), output.to_owned());
        self
    }

    pub fn with_fixtures(mut self, fx: &MockFixtures) -> Self {
        if !fx.language_pairs.is_empty() {
            self.pairs = fx.language_pairs.iter().cloned().collect();
        }
        for t in &fx.translations {
            self = self.with_translation(&t.text, &t.src, &t.tgt, &t.output);
        }
        self.failures.extend(fx.failures.iter().cloned());
        self
    }
}

impl Translator for MockTranslator {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> BackendResult<String> {
        check_text(text)?;
        if !self.pairs.contains(&(src.to_owned(), tgt.to_owned())) {
            return Err(BackendError::Unsupported(format!("translation {src}→{tgt}")));
        }
        if self.failures.contains(text) {
            return Err(BackendError::Unavailable(format!("injected failure for `{text}`")));
        }
        Ok(self
            .table
            .get(&(text.to_owned(), src.to_owned(), tgt.to_owned()))
            .cloned()
            .unwrap_or_else(|| text.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ScoreRequest;

    #[test]
    fn fixture_lookup_and_hash_fallback() {
        let s = MockScorer::new(7).with_score("p1", "h1", 0.9);
        assert_eq!(s.score("p1", "h1", "en").unwrap().value(), 0.9);
        let a = s.score("p2", "h2", "en").unwrap().value();
        let b = s.score("p2", "h2", "en").unwrap().value();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
        let other_seed = MockScorer::new(8).score("p2", "h2", "en").unwrap().value();
        assert_ne!(a, other_seed);
        // concatenation ambiguity is separated
        let c = s.score("ab", "c", "en").unwrap().value();
        let d = s.score("a", "bc", "en").unwrap().value();
        assert_ne!(c, d);
    }

    #[test]
    fn empty_inputs_rejected() {
        let s = MockScorer::new(0);
        assert!(matches!(s.score("", "h", "en"), Err(BackendError::InvalidInput(_))));
        assert!(MockEmbedder::new(4, 0).embed("  ", "en").is_err());
    }

    #[test]
    fn batch_equals_singles() {
        let s = MockScorer::new(3).with_score("x", "y", 0.25);
        let reqs = vec![
            ScoreRequest::new("x", "y", "en"),
            ScoreRequest::new("a", "b", "fr"),
            ScoreRequest::new("c", "d", "en"),
        ];
        let batch = s.score_batch(&reqs).unwrap();
        for (r, b) in reqs.iter().zip(&batch) {
            assert_eq!(s.score(&r.premise, &r.hypothesis, &r.lang).unwrap(), *b);
        }
        assert!(s.score_batch(&[]).unwrap().is_empty());
    }

    #[test]
    fn injected_failures_report_indices() {
        let s = MockScorer::new(0).failing_on("bad");
        let reqs = vec![
            ScoreRequest::new("ok", "h", "en"),
            ScoreRequest::new("bad", "h", "en"),
            ScoreRequest::new("ok2", "h", "en"),
        ];
        assert_eq!(s.score_batch(&reqs).unwrap_err().failed_indices(), &[1]);
    }

    #[test]
    fn embedder_contract() {
        let e = MockEmbedder::new(8, 1);
        let a = e.embed("Every vote counts", "en").unwrap();
        assert_eq!(a, e.embed("Every vote counts", "en").unwrap());
        assert_eq!(a.dim(), 8);
        let e = e.with_vector("fixture", vec![1.0; 8]).unwrap();
        assert_eq!(e.embed("fixture", "en").unwrap().values(), &[1.0; 8]);
        assert!(MockEmbedder::new(8, 1).with_vector("x", vec![1.0; 3]).is_err());
        // punctuation-only text still embeds
        assert!(e.embed("!!!", "en").unwrap().norm() > 0.0);
    }

    #[test]
    fn translator_contract() {
        let t = MockTranslator::new();
        assert_eq!(t.translate("bonjour", "fr", "en").unwrap(), "bonjour");
        let t = t.with_translation("Every vote counts.", "en", "fr", "Chaque vote compte.");
        assert_eq!(t.translate("Every vote counts.", "en", "fr").unwrap(), "Chaque vote compte.");
        let fr_only = MockTranslator::with_pairs([("en", "fr")]);
        assert!(matches!(
            fr_only.translate("hello", "en", "de"),
            Err(BackendError::Unsupported(_))
        ));
    }
}
