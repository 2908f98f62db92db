//! Score matrices, threshold decisions with the `Other` fallback, threshold
//! calibration, and the embedding-similarity baseline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, EmbedRequest, Embedder, EmbeddingVector, ScoreRequest, Scorer};
use crate::dataprep::render_hypothesis;
use crate::dataset::Message;
use crate::error::{Error, Result};
use crate::eval::{encode_set, weighted_f1_indexed, LabelSets};
use crate::io;
use crate::schema::LabelSchema;

pub const TAU_MIN: f64 = 0.30;
pub const TAU_MAX: f64 = 0.99;
pub const DEFAULT_STEP: f64 = 0.01;
/// Sweep objectives closer than this are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Scoring requests per backend call.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRow {
    pub id: String,
    pub lang: String,
    pub scores: BTreeMap<String, f64>,
}

/// Message × label scores in `[0, 1]`, complete over the schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScoreMatrix {
    rows: Vec<ScoreRow>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<ScoreRow>, schema: &LabelSchema) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::validation(format!("duplicate score row `{}`", r.id)));
            }
            check_row(&r.scores, schema).map_err(|e| match e {
                Error::Validation(m) => Error::validation(format!("row `{}`: {m}", r.id)),
                e => e,
            })?;
        }
        Ok(ScoreMatrix { rows })
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn langs(&self) -> BTreeMap<String, String> {
        self.rows.iter().map(|r| (r.id.clone(), r.lang.clone())).collect()
    }

    pub fn load(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<Self> {
        Self::new(io::read_jsonl(path)?, schema)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_jsonl(path, &self.rows)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        io::to_jsonl(&self.rows)
    }
}

fn check_row(scores: &BTreeMap<String, f64>, schema: &LabelSchema) -> Result<()> {
    schema.check_labels(scores.keys().map(String::as_str))?;
    if let Some(missing) = schema.ids().find(|l| !scores.contains_key(*l)) {
        return Err(Error::validation(format!("incomplete row: no score for `{missing}`")));
    }
    if let Some((l, s)) = scores.iter().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
        return Err(Error::validation(format!("score {s} for `{l}` outside [0, 1]")));
    }
    Ok(())
}

/// Scores every message against every label's hypothesis in the message's
/// language. Cells are scored in parallel chunks; a failure reports the
/// first failing `(message, label)` in row-major order.
pub fn score_messages(msgs: &[Message], schema: &LabelSchema, scorer: &dyn Scorer) -> Result<ScoreMatrix> {
    let mut hyps: HashMap<(&str, &str), String> = HashMap::new();
    for m in msgs {
        for l in schema.ids() {
            if !hyps.contains_key(&(l, m.lang.as_str())) {
                hyps.insert((l, m.lang.as_str()), render_hypothesis(schema, l, &m.lang)?);
            }
        }
    }
    let labels: Vec<&str> = schema.ids().collect();
    let cells: Vec<(usize, usize)> = (0..msgs.len())
        .flat_map(|i| (0..labels.len()).map(move |j| (i, j)))
        .collect();
    let requests: Vec<ScoreRequest> = cells
        .iter()
        .map(|&(i, j)| {
            let m = &msgs[i];
            ScoreRequest::new(&m.text, &hyps[&(labels[j], m.lang.as_str())], &m.lang)
        })
        .collect();

    let chunks: Vec<std::result::Result<Vec<f64>, (usize, BackendError)>> = requests
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            scorer
                .score_batch(chunk)
                .map(|v| v.into_iter().map(|s| s.value()).collect())
                .map_err(|e| {
                    let local = e.failed_indices().first().copied().unwrap_or(0);
                    let source = match e {
                        BackendError::Batch { source, .. } => *source,
                        e => e,
                    };
                    (c * CHUNK + local, source)
                })
        })
        .collect();

    let mut values = Vec::with_capacity(cells.len());
    for chunk in chunks {
        match chunk {
            Ok(v) => values.extend(v),
            Err((cell, source)) => {
                let (i, j) = cells[cell];
                return Err(Error::Cell {
                    message: msgs[i].id.clone(),
                    label: labels[j].to_owned(),
                    source,
                });
            }
        }
    }
    if values.len() != cells.len() {
        return Err(BackendError::Protocol(format!(
            "expected {} scores, got {}",
            cells.len(),
            values.len()
        ))
        .into());
    }
    let rows = msgs
        .iter()
        .zip(values.chunks(labels.len().max(1)))
        .map(|(m, v)| ScoreRow {
            id: m.id.clone(),
            lang: m.lang.clone(),
            scores: labels.iter().map(|l| l.to_string()).zip(v.iter().copied()).collect(),
        })
        .collect();
    ScoreMatrix::new(rows, schema)
}

pub fn check_tau(tau: f64) -> Result<()> {
    if !(TAU_MIN - 1e-9..=TAU_MAX + 1e-9).contains(&tau) {
        return Err(Error::validation(format!(
            "tau {tau} outside [{TAU_MIN:.2}, {TAU_MAX:.2}]"
        )));
    }
    Ok(())
}

fn decide_indexed(scores: &[f64], tau: f64, other: usize) -> Vec<usize> {
    let picked: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= tau).collect();
    if picked.is_empty() {
        vec![other]
    } else {
        picked
    }
}

fn row_vector(scores: &BTreeMap<String, f64>, schema: &LabelSchema) -> Result<Vec<f64>> {
    check_row(scores, schema)?;
    Ok(schema.ids().map(|l| scores[l]).collect())
}

/// Labels scoring at least `tau`, in schema order; `{Other}` if none do.
pub fn decide_labels(scores: &BTreeMap<String, f64>, schema: &LabelSchema, tau: f64) -> Result<Vec<String>> {
    check_tau(tau)?;
    let v = row_vector(scores, schema)?;
    let other = schema.index_of(schema.other_id()).expect("schema holds its fallback label");
    Ok(decide_indexed(&v, tau, other)
        .into_iter()
        .map(|i| schema.labels()[i].id.clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub id: String,
    pub labels: Vec<String>,
    pub confidences: BTreeMap<String, f64>,
    pub tau: f64,
}

impl Prediction {
    pub fn label_set(&self) -> BTreeSet<String> {
        self.labels.iter().cloned().collect()
    }
}

pub fn predict(matrix: &ScoreMatrix, schema: &LabelSchema, tau: f64) -> Result<Vec<Prediction>> {
    matrix
        .rows()
        .iter()
        .map(|r| {
            let labels = decide_labels(&r.scores, schema, tau)?;
            let confidences = labels.iter().map(|l| (l.clone(), r.scores[l])).collect();
            Ok(Prediction {
                id: r.id.clone(),
                labels,
                confidences,
                tau,
            })
        })
        .collect()
}

pub fn predictions_to_sets(preds: &[Prediction]) -> LabelSets {
    preds.iter().map(|p| (p.id.clone(), p.label_set())).collect()
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    io::read_jsonl(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub tau: f64,
    /// Weighted F1 on the calibration set at `tau`.
    pub objective: f64,
    pub sweep_step: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub tie_break: String,
    pub n_messages: usize,
    pub curve: Vec<SweepPoint>,
}

impl ThresholdCalibration {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cal: Self = io::read_json(path)?;
        check_tau(cal.tau)?;
        Ok(cal)
    }
}

/// `{0.30, 0.30 + step, ...} ∩ [0.30, 0.99]`, rounded to 6 decimals so
/// grid points print and compare cleanly.
pub fn tau_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= TAU_MAX - TAU_MIN) {
        return Err(Error::validation(format!(
            "sweep step {step} must be in (0, {:.2}]",
            TAU_MAX - TAU_MIN
        )));
    }
    let n = ((TAU_MAX - TAU_MIN) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((TAU_MIN + i as f64 * step) * 1e6).round() / 1e6)
        .collect())
}

/// Smallest grid tau maximizing weighted F1 of [`decide_labels`] against gold.
pub fn calibrate_threshold(
    matrix: &ScoreMatrix,
    gold: &LabelSets,
    schema: &LabelSchema,
    step: f64,
) -> Result<ThresholdCalibration> {
    if matrix.is_empty() {
        return Err(Error::validation("cannot calibrate on an empty score matrix"));
    }
    let grid = tau_grid(step)?;
    let other = schema.index_of(schema.other_id()).expect("schema holds its fallback label");
    let mut rows = Vec::with_capacity(matrix.len());
    let mut golds = Vec::with_capacity(matrix.len());
    for r in matrix.rows() {
        let g = gold
            .get(&r.id)
            .ok_or_else(|| Error::validation(format!("no gold labels for `{}`", r.id)))?;
        if g.is_empty() {
            return Err(Error::validation(format!("message `{}` has an empty gold set", r.id)));
        }
        golds.push(encode_set(schema, g)?);
        rows.push(row_vector(&r.scores, schema)?);
    }
    let curve: Vec<SweepPoint> = grid
        .iter()
        .map(|&tau| SweepPoint {
            tau,
            weighted_f1: weighted_f1_indexed(
                golds.iter().map(Vec::as_slice).zip(rows.iter().map(|s| decide_indexed(s, tau, other))),
                schema.len(),
            ),
        })
        .collect();
    let mut best = &curve[0];
    for p in &curve[1..] {
        if p.weighted_f1 > best.weighted_f1 + TIE_TOLERANCE {
            best = p;
        }
    }
    Ok(ThresholdCalibration {
        tau: best.tau,
        objective: best.weighted_f1,
        sweep_step: step,
        grid_min: TAU_MIN,
        grid_max: TAU_MAX,
        tie_break: "smallest".into(),
        n_messages: matrix.len(),
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilaritySource {
    /// Compare against each label's hypothesis text.
    Hypothesis,
    /// Compare against each label's name.
    LabelName,
}

impl std::str::FromStr for SimilaritySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hypothesis" => Ok(SimilaritySource::Hypothesis),
            "label" | "label_name" | "name" => Ok(SimilaritySource::LabelName),
            _ => Err(Error::validation(format!("unknown similarity source `{s}`"))),
        }
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::validation(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::validation("zero-norm embedding"));
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn label_text(schema: &LabelSchema, label: &str, lang: &str, source: SimilaritySource) -> Result<String> {
    match source {
        SimilaritySource::Hypothesis => render_hypothesis(schema, label, lang),
        SimilaritySource::LabelName => schema
            .get(label)
            .and_then(|l| l.name.get(lang).cloned())
            .ok_or_else(|| Error::Schema(format!("label `{label}` has no name for language `{lang}`"))),
    }
}

/// Semantic-search baseline: `score = max(0, cos(message, label text))`,
/// then the usual threshold decision.
pub fn classify_by_similarity(
    msgs: &[Message],
    schema: &LabelSchema,
    embedder: &dyn Embedder,
    source: SimilaritySource,
    tau: f64,
) -> Result<(ScoreMatrix, Vec<Prediction>)> {
    check_tau(tau)?;
    let langs: BTreeSet<&str> = msgs.iter().map(|m| m.lang.as_str()).collect();
    let mut label_reqs = Vec::new();
    for &lang in &langs {
        for l in schema.ids() {
            label_reqs.push(EmbedRequest {
                text: label_text(schema, l, lang, source)?,
                lang: lang.to_owned(),
            });
        }
    }
    let label_vecs = embedder.embed_batch(&label_reqs)?;
    let by_lang: BTreeMap<&str, &[EmbeddingVector]> = langs
        .iter()
        .copied()
        .zip(label_vecs.chunks(schema.len()))
        .collect();
    let msg_reqs: Vec<EmbedRequest> = msgs
        .iter()
        .map(|m| EmbedRequest {
            text: m.text.clone(),
            lang: m.lang.clone(),
        })
        .collect();
    let msg_vecs = embedder.embed_batch(&msg_reqs)?;

    let mut rows = Vec::with_capacity(msgs.len());
    for (m, v) in msgs.iter().zip(&msg_vecs) {
        let mut scores = BTreeMap::new();
        for (l, lv) in schema.ids().zip(by_lang[m.lang.as_str()]) {
            let c = cosine(v, lv).map_err(|e| match e {
                Error::Validation(msg) => Error::validation(format!("message `{}`: {msg}", m.id)),
                e => e,
            })?;
            scores.insert(l.to_owned(), c.max(0.0));
        }
        rows.push(ScoreRow {
            id: m.id.clone(),
            lang: m.lang.clone(),
            scores,
        });
    }
    let matrix = ScoreMatrix::new(rows, schema)?;
    let preds = predict(&matrix, schema, tau)?;
    Ok((matrix, preds))
}
