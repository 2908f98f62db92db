//! Agenda label taxonomy with per-language names, definitions and hypotheses.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_SCHEMA: &str = include_str!("../assets/agenda_schema.json");

/// Generic fill-in used when a label has no curated hypothesis for a language.
pub const DEFAULT_TEMPLATE: &str = "This text is about {name}.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDef {
    pub id: String,
    #[serde(default)]
    pub name: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub definition: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hypothesis: BTreeMap<String, String>,
}

impl LabelDef {
    pub fn new(id: impl Into<String>) -> Self {
        LabelDef {
            id: id.into(),
            name: BTreeMap::new(),
            definition: BTreeMap::new(),
            hypothesis: BTreeMap::new(),
        }
    }

    pub fn with_name(mut self, lang: &str, name: &str) -> Self {
        self.name.insert(lang.to_owned(), name.to_owned());
        self
    }

    pub fn with_definition(mut self, lang: &str, text: &str) -> Self {
        self.definition.insert(lang.to_owned(), text.to_owned());
        self
    }

    pub fn with_hypothesis(mut self, lang: &str, text: &str) -> Self {
        self.hypothesis.insert(lang.to_owned(), text.to_owned());
        self
    }
}

/// Ordered label set. The order is canonical: it drives tie-breaking,
/// output ordering and confusion-matrix pairing everywhere in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct LabelSchema {
    labels: Vec<LabelDef>,
    other_id: String,
    templates: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    other_id: String,
    labels: Vec<LabelDef>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    templates: BTreeMap<String, String>,
}

impl TryFrom<RawSchema> for LabelSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        LabelSchema::new(raw.labels, raw.other_id).map(|s| s.with_templates(raw.templates))
    }
}

impl From<LabelSchema> for RawSchema {
    fn from(s: LabelSchema) -> Self {
        RawSchema {
            other_id: s.other_id,
            labels: s.labels,
            templates: s.templates,
        }
    }
}

impl LabelSchema {
    pub fn new(labels: Vec<LabelDef>, other_id: impl Into<String>) -> Result<Self> {
        let other_id = other_id.into();
        if labels.is_empty() {
            return Err(Error::Schema("no labels".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.id.is_empty() {
                return Err(Error::Schema("empty label id".into()));
            }
            if !seen.insert(l.id.as_str()) {
                return Err(Error::Schema(format!("duplicate label id `{}`", l.id)));
            }
        }
        if !seen.contains(other_id.as_str()) {
            return Err(Error::Schema(format!(
                "fallback label `{other_id}` is not in the label list"
            )));
        }
        Ok(LabelSchema {
            labels,
            other_id,
            templates: BTreeMap::new(),
        })
    }

    /// Per-language override of [`DEFAULT_TEMPLATE`]; `{name}` is substituted.
    pub fn with_templates(mut self, templates: BTreeMap<String, String>) -> Self {
        self.templates = templates;
        self
    }

    /// The shipped six-class agenda taxonomy, English and French.
    pub fn agenda_default() -> Self {
        serde_json::from_str(DEFAULT_SCHEMA).expect("bundled schema is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn labels(&self) -> &[LabelDef] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn other_id(&self) -> &str {
        &self.other_id
    }

    pub fn get(&self, id: &str) -> Option<&LabelDef> {
        self.labels.iter().find(|l| l.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index_of(id).is_some()
    }

    pub fn template(&self, lang: &str) -> &str {
        self.templates
            .get(lang)
            .map(String::as_str)
            .unwrap_or(DEFAULT_TEMPLATE)
    }

    /// Returns `Err(UnknownLabel)` for the first id not in the schema.
    pub fn check_labels<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for id in ids {
            if !self.contains(id) {
                return Err(Error::UnknownLabel(id.to_owned()));
            }
        }
        Ok(())
    }

    /// Sorts label ids into schema order. Unknown ids sort last, by name.
    pub fn canonical_order<'a, I>(&self, ids: I) -> Vec<String>
    where
        I: IntoIterator<Item = &'a String>,
    {
        let mut v: Vec<&String> = ids.into_iter().collect();
        v.sort_by_key(|id| (self.index_of(id).unwrap_or(usize::MAX), (*id).clone()));
        v.dedup();
        v.into_iter().cloned().collect()
    }

    /// Canonical string for a label set, used when a set is compared as one
    /// categorical value (agreement statistics).
    pub fn set_key(&self, ids: &BTreeSet<String>) -> String {
        self.canonical_order(ids).join("+")
    }

    /// Ensures every label can be named and rendered in `lang`.
    pub fn validate_language(&self, lang: &str) -> Result<()> {
        for l in &self.labels {
            if !l.name.contains_key(lang) {
                return Err(Error::Schema(format!(
                    "label `{}` has no name for language `{lang}`",
                    l.id
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_shape() {
        let s = LabelSchema::agenda_default();
        let ids: Vec<_> = s.ids().collect();
        assert_eq!(
            ids,
            [
                "OnlineSolidarity",
                "Engagement",
                "Disengagement",
                "PeacefulProtest",
                "ViolentAction",
                "Other"
            ]
        );
        assert_eq!(s.other_id(), "Other");
        for lang in ["en", "fr"] {
            s.validate_language(lang).unwrap();
            for l in s.labels() {
                assert!(l.definition.contains_key(lang), "{} {lang}", l.id);
                assert!(l.hypothesis.contains_key(lang), "{} {lang}", l.id);
            }
        }
    }

    #[test]
    fn rejects_bad_schemas() {
        assert!(LabelSchema::new(vec![], "Other").is_err());
        let dup = vec![LabelDef::new("A"), LabelDef::new("A"), LabelDef::new("Other")];
        assert!(LabelSchema::new(dup, "Other").is_err());
        let no_other = vec![LabelDef::new("A")];
        assert!(LabelSchema::new(no_other, "Other").is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = LabelSchema::agenda_default();
        let text = serde_json::to_string(&s).unwrap();
        let back: LabelSchema = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let bad = r#"{"other_id":"X","labels":[{"id":"A"}]}"#;
        assert!(serde_json::from_str::<LabelSchema>(bad).is_err());
    }

    #[test]
    fn canonical_order_follows_schema() {
        let s = LabelSchema::agenda_default();
        let set: BTreeSet<String> = ["Other", "Engagement", "OnlineSolidarity"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(s.set_key(&set), "OnlineSolidarity+Engagement+Other");
    }
}
