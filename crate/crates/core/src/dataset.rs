//! Messages, dataset files and train/dev/test splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_jsonl, to_jsonl};
use crate::schema::LabelSchema;

/// Soft cap on message length. Longer texts are accepted but logged.
pub const MAX_TEXT_CHARS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub id: String,
    pub text: String,
    pub lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<String>>,
}

impl Message {
    pub fn new(id: impl Into<String>, text: impl Into<String>, lang: impl Into<String>) -> Self {
        Message {
            id: id.into(),
            text: text.into(),
            lang: lang.into(),
            pair_id: None,
            gold: None,
        }
    }

    pub fn with_gold<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.gold = Some(labels.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_pair(mut self, pair_id: impl Into<String>) -> Self {
        self.pair_id = Some(pair_id.into());
        self
    }

    /// Gold labels as a set; fails for unlabeled messages.
    pub fn gold_set(&self) -> Result<BTreeSet<String>> {
        match &self.gold {
            Some(g) if !g.is_empty() => Ok(g.iter().cloned().collect()),
            _ => Err(Error::Precondition(format!(
                "message `{}` has no gold labels",
                self.id
            ))),
        }
    }
}

/// A validated collection of messages. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    messages: Vec<Message>,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Validates ids, labels, languages and translation-pair linkage.
    pub fn new(messages: Vec<Message>, schema: &LabelSchema) -> Result<Self> {
        let mut index = HashMap::with_capacity(messages.len());
        let mut langs = BTreeSet::new();
        let mut pairs: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, m) in messages.iter().enumerate() {
            if m.id.is_empty() {
                return Err(Error::validation(format!("message #{} has an empty id", i + 1)));
            }
            if index.insert(m.id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate message id `{}`", m.id)));
            }
            if m.text.trim().is_empty() {
                return Err(Error::validation(format!("message `{}` has empty text", m.id)));
            }
            if m.text.chars().count() > MAX_TEXT_CHARS {
                log::warn!("message `{}` exceeds {MAX_TEXT_CHARS} characters", m.id);
            }
            if m.lang.is_empty() {
                return Err(Error::validation(format!("message `{}` has no lang", m.id)));
            }
            langs.insert(m.lang.as_str());
            if let Some(gold) = &m.gold {
                let mut seen = BTreeSet::new();
                for g in gold {
                    if !schema.contains(g) {
                        return Err(Error::UnknownLabel(g.clone()));
                    }
                    if !seen.insert(g) {
                        return Err(Error::validation(format!(
                            "message `{}` repeats label `{g}`",
                            m.id
                        )));
                    }
                }
            }
            if let Some(p) = &m.pair_id {
                pairs.entry(p.as_str()).or_default().push(i);
            }
        }
        for (pair, members) in &pairs {
            match members.as_slice() {
                [a, b] if messages[*a].lang != messages[*b].lang => {}
                [_, _] => {
                    return Err(Error::validation(format!(
                        "pair `{pair}` links two messages with the same lang"
                    )))
                }
                [only] => {
                    return Err(Error::validation(format!(
                        "dangling pair `{pair}` on message `{}`",
                        messages[*only].id
                    )))
                }
                _ => {
                    return Err(Error::validation(format!(
                        "ambiguous pair `{pair}` shared by {} messages",
                        members.len()
                    )))
                }
            }
        }
        for lang in langs {
            schema.validate_language(lang)?;
        }
        Ok(Dataset { messages, index })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Message> {
        self.index.get(id).map(|&i| &self.messages[i])
    }

    /// The translation counterpart of `id`, if any.
    pub fn counterpart(&self, id: &str) -> Option<&Message> {
        let m = self.get(id)?;
        let pair = m.pair_id.as_deref()?;
        self.messages
            .iter()
            .find(|o| o.id != m.id && o.pair_id.as_deref() == Some(pair))
    }

    /// Messages whose ids are in `ids`, in dataset order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Dataset {
        let messages: Vec<Message> = self
            .messages
            .iter()
            .filter(|m| ids.contains(&m.id))
            .cloned()
            .collect();
        let index = messages
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.clone(), i))
            .collect();
        Dataset { messages, index }
    }

    /// id → gold label set. Fails on the first unlabeled message.
    pub fn gold_sets(&self) -> Result<BTreeMap<String, BTreeSet<String>>> {
        self.messages
            .iter()
            .map(|m| Ok((m.id.clone(), m.gold_set()?)))
            .collect()
    }

    /// Gold incidence count per label.
    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for g in self.messages.iter().filter_map(|m| m.gold.as_ref()) {
            for l in g {
                *counts.entry(l.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Canonical JSON Lines serialization.
    pub fn to_jsonl(&self) -> Result<String> {
        to_jsonl(&self.messages)
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<Dataset> {
    let messages: Vec<Message> = read_jsonl(path)?;
    Dataset::new(messages, schema)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset.to_jsonl()?).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub run_id: String,
}

impl SplitSpec {
    pub fn new(run_id: impl Into<String>, seed: u64) -> Self {
        SplitSpec {
            seed,
            dev_fraction: 0.1,
            test_fraction: 0.1,
            run_id: run_id.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, f) in [("dev", self.dev_fraction), ("test", self.test_fraction)] {
            if !(f > 0.0 && f < 0.5) {
                return Err(Error::validation(format!(
                    "{name} fraction {f} outside (0, 0.5)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub run_id: String,
    pub seed: u64,
    pub train: BTreeSet<String>,
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            other => Err(Error::validation(format!("unknown partition `{other}`"))),
        }
    }
}

impl DatasetSplit {
    pub fn ids(&self, part: Partition) -> &BTreeSet<String> {
        match part {
            Partition::Train => &self.train,
            Partition::Dev => &self.dev,
            Partition::Test => &self.test,
        }
    }
}

/// Groups messages into split units: both sides of a translation pair form
/// one unit, unpaired messages are their own unit. Units are returned in a
/// canonical order so the shuffle depends only on ids and the seed.
fn split_units(dataset: &Dataset) -> Vec<Vec<String>> {
    let mut units: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for m in dataset.messages() {
        let key = match &m.pair_id {
            Some(p) => format!("p\u{0}{p}"),
            None => format!("m\u{0}{}", m.id),
        };
        units.entry(key).or_default().push(m.id.clone());
    }
    units.into_values().collect()
}

/// Plain (unstratified) seeded random split over translation-pair units.
/// Partition sizes are `floor(fraction * units)`; the remainder trains.
pub fn split_dataset(dataset: &Dataset, spec: &SplitSpec) -> Result<DatasetSplit> {
    if dataset.is_empty() {
        return Err(Error::Precondition("cannot split an empty dataset".into()));
    }
    spec.validate()?;
    let mut units = split_units(dataset);
    let n = units.len();
    let n_test = (spec.test_fraction * n as f64).floor() as usize;
    let n_dev = (spec.dev_fraction * n as f64).floor() as usize;
    if n_test == 0 || n_dev == 0 || n_test + n_dev >= n {
        return Err(Error::validation(format!(
            "fractions dev={} test={} leave an empty partition over {n} units",
            spec.dev_fraction, spec.test_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    units.shuffle(&mut rng);

    let mut split = DatasetSplit {
        run_id: spec.run_id.clone(),
        seed: spec.seed,
        train: BTreeSet::new(),
        dev: BTreeSet::new(),
        test: BTreeSet::new(),
    };
    for (i, unit) in units.into_iter().enumerate() {
        let target = if i < n_test {
            &mut split.test
        } else if i < n_test + n_dev {
            &mut split.dev
        } else {
            &mut split.train
        };
        target.extend(unit);
    }
    Ok(split)
}

/// One independent split per seed, named `R1`, `R2`, ...
pub fn make_runs(dataset: &Dataset, seeds: &[u64]) -> Result<Vec<DatasetSplit>> {
    make_runs_with(dataset, seeds, 0.1, 0.1)
}

pub fn make_runs_with(
    dataset: &Dataset,
    seeds: &[u64],
    dev_fraction: f64,
    test_fraction: f64,
) -> Result<Vec<DatasetSplit>> {
    if seeds.len() < 3 {
        return Err(Error::validation(format!(
            "need at least 3 seeds, got {}",
            seeds.len()
        )));
    }
    let distinct: BTreeSet<_> = seeds.iter().collect();
    if distinct.len() != seeds.len() {
        return Err(Error::validation("duplicate seeds"));
    }
    seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let spec = SplitSpec {
                seed,
                dev_fraction,
                test_fraction,
                run_id: format!("R{}", i + 1),
            };
            split_dataset(dataset, &spec)
        })
        .collect()
}
