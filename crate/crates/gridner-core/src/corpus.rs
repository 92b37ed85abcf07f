//! Dataset parsing, conversion and statistics for discontinuous NER corpora.
//!
//! Two interchangeable on-disk formats are supported:
//!
//! * an inline text format of line pairs — a space-separated token line
//!   followed by an annotation line of `|`-separated entries, each entry
//!   being `;`-separated inclusive token spans plus a type, e.g.
//!   `0,0;3,5 ADR|2,5 ADR` — and
//! * a JSON array of documents `{"sentence": [tokens], "ner":
//!   [{"index": [..], "type": ".."}]}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while reading or validating corpus data.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed span `{span}`: {reason}")]
    MalformedSpan {
        line: usize,
        span: String,
        reason: String,
    },
    #[error("inline input has an odd number of lines ({lines}); expected token/annotation pairs")]
    OddLineCount { lines: usize },
    #[error("line {line}: annotation entry `{entry}` is missing a type")]
    MissingType { line: usize, entry: String },
    #[error("entity indices must be non-empty and strictly increasing, got {0:?}")]
    BadIndices(Vec<usize>),
    #[error("entity index {index} out of range for sentence of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("json schema error: {0}")]
    Schema(String),
}

/// A typed entity over token positions; the index list may be
/// non-contiguous.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawEntity", into = "RawEntity")]
pub struct Entity {
    indices: Vec<usize>,
    label: String,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawEntity {
    index: Vec<usize>,
    #[serde(rename = "type")]
    label: String,
}

impl TryFrom<RawEntity> for Entity {
    type Error = CorpusError;
    fn try_from(raw: RawEntity) -> Result<Self, CorpusError> {
        Entity::new(raw.index, raw.label)
    }
}

impl From<Entity> for RawEntity {
    fn from(e: Entity) -> RawEntity {
        RawEntity {
            index: e.indices,
            label: e.label,
        }
    }
}

impl Entity {
    /// Builds an entity, enforcing non-empty strictly increasing indices.
    pub fn new(indices: Vec<usize>, label: impl Into<String>) -> Result<Self, CorpusError> {
        if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorpusError::BadIndices(indices));
        }
        Ok(Entity {
            indices,
            label: label.into(),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of tokens the entity covers.
    pub fn token_len(&self) -> usize {
        self.indices.len()
    }

    /// True iff some consecutive index pair has a gap between it.
    pub fn is_discontinuous(&self) -> bool {
        self.indices.windows(2).any(|w| w[1] > w[0] + 1)
    }

    /// Maximal runs of consecutive indices as inclusive (start, end) spans.
    pub fn fragments(&self) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        let mut start = self.indices[0];
        let mut prev = start;
        for &i in &self.indices[1..] {
            if i != prev + 1 {
                spans.push((start, prev));
                start = i;
            }
            prev = i;
        }
        spans.push((start, prev));
        spans
    }
}

/// A tokenized sentence with its (possibly overlapping) entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    #[serde(rename = "sentence")]
    pub tokens: Vec<String>,
    #[serde(rename = "ner", default)]
    pub entities: Vec<Entity>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, entities: Vec<Entity>) -> Result<Self, CorpusError> {
        let s = Sentence { tokens, entities };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks entity indices against the token count.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for e in &self.entities {
            if let Some(&max) = e.indices.last() {
                if max >= self.tokens.len() {
                    return Err(CorpusError::IndexOutOfRange {
                        index: max,
                        len: self.tokens.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A named dataset with its splits and the ordered label inventory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub splits: BTreeMap<String, Vec<Sentence>>,
    pub label_set: Vec<String>,
}

impl Dataset {
    /// Assembles a dataset; the label set is the sorted union of labels
    /// appearing in any split.
    pub fn from_splits(
        name: impl Into<String>,
        splits: Vec<(&str, Vec<Sentence>)>,
    ) -> Result<Self, CorpusError> {
        let mut map = BTreeMap::new();
        let mut labels = BTreeSet::new();
        for (split, sentences) in splits {
            for s in &sentences {
                s.validate()?;
                for e in &s.entities {
                    labels.insert(e.label.clone());
                }
            }
            map.insert(split.to_string(), sentences);
        }
        Ok(Dataset {
            name: name.into(),
            splits: map,
            label_set: labels.into_iter().collect(),
        })
    }

    pub fn split(&self, name: &str) -> Option<&[Sentence]> {
        self.splits.get(name).map(|v| v.as_slice())
    }
}

/// Corpus-level counts over sentences and entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_sentences: usize,
    pub total_entities: usize,
    pub continuous_entities: usize,
    pub discontinuous_entities: usize,
    /// discontinuous / total, 0.0 for an empty corpus.
    pub disc_percentage: f64,
    /// (min, max) token count over all entities; (0, 0) if none.
    pub entity_token_length_range: (usize, usize),
    /// (min, max) of `last - first + 1` over discontinuous entities.
    pub disc_start_end_distance_range: (usize, usize),
    /// For each discontinuous entity and consecutive index pair (i, j)
    /// with j > i + 1, counts the gap j - i - 1.
    pub token_gap_histogram: BTreeMap<usize, usize>,
}

/// Counts sentences, entities and discontinuity statistics.
pub fn compute_stats(sentences: &[Sentence]) -> CorpusStats {
    let mut total_entities = 0;
    let mut discontinuous = 0;
    let mut len_range: Option<(usize, usize)> = None;
    let mut dist_range: Option<(usize, usize)> = None;
    let mut histogram = BTreeMap::new();

    for s in sentences {
        for e in &s.entities {
            total_entities += 1;
            let len = e.token_len();
            len_range = Some(match len_range {
                None => (len, len),
                Some((lo, hi)) => (lo.min(len), hi.max(len)),
            });
            if e.is_discontinuous() {
                discontinuous += 1;
                let dist = e.indices.last().unwrap() - e.indices[0] + 1;
                dist_range = Some(match dist_range {
                    None => (dist, dist),
                    Some((lo, hi)) => (lo.min(dist), hi.max(dist)),
                });
                for w in e.indices.windows(2) {
                    if w[1] > w[0] + 1 {
                        *histogram.entry(w[1] - w[0] - 1).or_insert(0) += 1;
                    }
                }
            }
        }
    }

    CorpusStats {
        total_sentences: sentences.len(),
        total_entities,
        continuous_entities: total_entities - discontinuous,
        discontinuous_entities: discontinuous,
        disc_percentage: if total_entities == 0 {
            0.0
        } else {
            discontinuous as f64 / total_entities as f64
        },
        entity_token_length_range: len_range.unwrap_or((0, 0)),
        disc_start_end_distance_range: dist_range.unwrap_or((0, 0)),
        token_gap_histogram: histogram,
    }
}

/// Parses the inline token/annotation line-pair format.
///
/// Blank sentence lines (paired with a blank annotation line) are skipped.
/// Duplicate entities within a sentence are dropped.
pub fn parse_inline(text: &str) -> Result<Vec<Sentence>, CorpusError> {
    let lines: Vec<&str> = text.lines().collect();
    if !lines.len().is_multiple_of(2) {
        return Err(CorpusError::OddLineCount { lines: lines.len() });
    }

    let mut sentences = Vec::new();
    for (pair_idx, pair) in lines.chunks(2).enumerate() {
        let token_line_no = pair_idx * 2 + 1;
        let ann_line_no = token_line_no + 1;
        let tokens: Vec<String> = pair[0].split_whitespace().map(str::to_string).collect();
        let ann = pair[1].trim();

        if tokens.is_empty() {
            if !ann.is_empty() {
                return Err(CorpusError::MalformedSpan {
                    line: ann_line_no,
                    span: ann.to_string(),
                    reason: "annotation on a blank sentence line".into(),
                });
            }
            continue;
        }

        let mut entities = Vec::new();
        if !ann.is_empty() {
            for entry in ann.split('|') {
                let entry = entry.trim();
                if entry.is_empty() {
                    continue;
                }
                let (spans_part, label) = match entry.rsplit_once(' ') {
                    Some((s, l)) if !l.is_empty() => (s.trim(), l.trim()),
                    _ => {
                        return Err(CorpusError::MissingType {
                            line: ann_line_no,
                            entry: entry.to_string(),
                        })
                    }
                };
                let mut indices = BTreeSet::new();
                for span in spans_part.split(';') {
                    let span = span.trim();
                    let (start, end) = parse_span(span, ann_line_no)?;
                    if start > end {
                        return Err(CorpusError::MalformedSpan {
                            line: ann_line_no,
                            span: span.to_string(),
                            reason: "start exceeds end".into(),
                        });
                    }
                    if end >= tokens.len() {
                        return Err(CorpusError::MalformedSpan {
                            line: ann_line_no,
                            span: span.to_string(),
                            reason: format!("out of range for {} tokens", tokens.len()),
                        });
                    }
                    indices.extend(start..=end);
                }
                let entity = Entity::new(indices.into_iter().collect(), label)?;
                if !entities.contains(&entity) {
                    entities.push(entity);
                }
            }
        }
        sentences.push(Sentence { tokens, entities });
    }
    Ok(sentences)
}

fn parse_span(span: &str, line: usize) -> Result<(usize, usize), CorpusError> {
    let malformed = |reason: &str| CorpusError::MalformedSpan {
        line,
        span: span.to_string(),
        reason: reason.to_string(),
    };
    let (a, b) = span
        .split_once(',')
        .ok_or_else(|| malformed("expected `start,end`"))?;
    let start = a
        .trim()
        .parse::<usize>()
        .map_err(|_| malformed("non-numeric start"))?;
    let end = b
        .trim()
        .parse::<usize>()
        .map_err(|_| malformed("non-numeric end"))?;
    Ok((start, end))
}

/// Writes sentences back to the canonical inline form: one token/annotation
/// line pair per sentence, entities sorted by (indices, label), fragments
/// re-compressed to inclusive spans.
pub fn to_inline(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&s.tokens.join(" "));
        out.push('\n');
        let mut entities = s.entities.clone();
        entities.sort();
        let entries: Vec<String> = entities
            .iter()
            .map(|e| {
                let mut entry = String::new();
                let spans: Vec<String> = e
                    .fragments()
                    .iter()
                    .map(|(a, b)| format!("{a},{b}"))
                    .collect();
                let _ = write!(entry, "{} {}", spans.join(";"), e.label());
                entry
            })
            .collect();
        out.push_str(&entries.join("|"));
        out.push('\n');
    }
    out
}

/// Serializes sentences to the corpus JSON schema (pretty-printed,
/// canonical field order).
pub fn to_json(sentences: &[Sentence]) -> Result<String, CorpusError> {
    serde_json::to_string_pretty(sentences).map_err(|e| CorpusError::Schema(e.to_string()))
}

/// Parses a JSON array of sentence documents; unknown fields are ignored,
/// missing required fields name themselves in the error.
pub fn from_json(json: &str) -> Result<Vec<Sentence>, CorpusError> {
    let sentences: Vec<Sentence> =
        serde_json::from_str(json).map_err(|e| CorpusError::Schema(e.to_string()))?;
    for s in &sentences {
        s.validate()?;
    }
    Ok(sentences)
}

/// Builds the sorted unique label inventory of a group of sentences.
pub fn collect_labels(sentences: &[Sentence]) -> Vec<String> {
    let set: BTreeSet<&str> = sentences
        .iter()
        .flat_map(|s| s.entities.iter().map(|e| e.label()))
        .collect();
    set.into_iter().map(str::to_string).collect()
}

/// Builds the sorted unique token vocabulary of a group of sentences.
pub fn collect_vocab(sentences: &[Sentence]) -> Vec<String> {
    let set: BTreeSet<&str> = sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(String::as_str))
        .collect();
    set.into_iter().map(str::to_string).collect()
}

/// Maps tokens to ids against a fixed vocabulary.
pub fn tokens_to_ids(
    tokens: &[String],
    index: &HashMap<String, usize>,
) -> Result<Vec<usize>, CorpusError> {
    tokens
        .iter()
        .map(|t| {
            index
                .get(t)
                .copied()
                .ok_or_else(|| CorpusError::Schema(format!("token `{t}` not in vocabulary")))
        })
        .collect()
}
