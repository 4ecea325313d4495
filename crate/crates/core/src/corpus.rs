//! Paper corpus loading, cleaning and citation adjacency.
//!
//! The corpus file is UTF-8 line-delimited JSON, one paper per line:
//!
//! ```text
//! {"id": "p1", "title": "...", "keywords": ["..."], "abstract": "...",
//!  "references": ["p7", "p9"], "topics": [{"topic_id": "t3", "confidence": 0.93, "is_leaf": true}]}
//! ```
//!
//! Only `id` and `title` are required; unknown fields are ignored. Records are cleaned on
//! load (strings trimmed, references de-duplicated, self references removed) and stored
//! sorted by id, so the loaded [`Corpus`] does not depend on line order.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque paper identifier: non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PaperId(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid paper id {0:?}: ids must be non-empty and contain no whitespace")]
pub struct InvalidPaperId(pub String);

impl PaperId {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidPaperId> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(InvalidPaperId(id));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for PaperId {
    type Err = InvalidPaperId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl<'de> Deserialize<'de> for PaperId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PaperId::new(s).map_err(serde::de::Error::custom)
    }
}

/// A topic label stamped on a paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub confidence: f64,
    pub is_leaf: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperRecord {
    pub id: PaperId,
    pub title: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    #[serde(rename = "abstract", skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<PaperId>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub topics: Vec<Topic>,
}

impl PaperRecord {
    /// A record with only an id and title.
    pub fn new(id: PaperId, title: impl Into<String>) -> Self {
        Self {
            id,
            title: title.into(),
            keywords: Vec::new(),
            abstract_text: None,
            references: Vec::new(),
            topics: Vec::new(),
        }
    }

    /// Trims text fields, drops empty keywords, sorts and de-duplicates references and
    /// removes self references.
    fn clean(&mut self) {
        self.title = self.title.trim().to_string();
        self.keywords = self
            .keywords
            .iter()
            .map(|k| k.trim())
            .filter(|k| !k.is_empty())
            .map(str::to_string)
            .collect();
        self.abstract_text = self
            .abstract_text
            .take()
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty());
        for t in &mut self.topics {
            t.topic_id = t.topic_id.trim().to_string();
        }
        let own = &self.id;
        self.references.retain(|r| r != own);
        self.references.sort_unstable();
        self.references.dedup();
    }

    fn validate(&self) -> Result<(), String> {
        if self.title.is_empty() {
            return Err("missing or empty title".into());
        }
        for t in &self.topics {
            if t.topic_id.is_empty() {
                return Err("topic with empty topic_id".into());
            }
            if !(0.0..=1.0).contains(&t.confidence) {
                return Err(format!(
                    "topic {} confidence {} outside [0, 1]",
                    t.topic_id, t.confidence
                ));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawTopic {
    topic_id: String,
    confidence: f64,
    is_leaf: bool,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    keywords: Option<Vec<String>>,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    references: Option<Vec<String>>,
    #[serde(default)]
    topics: Option<Vec<RawTopic>>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: duplicate paper id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
    #[error("line {line}: record {id:?}: {reason}")]
    InvalidRecord {
        line: usize,
        id: String,
        reason: String,
    },
}

/// An id-indexed set of cleaned paper records, stored sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    records: Vec<PaperRecord>,
    lookup: HashMap<PaperId, usize>,
}

/// Loads a corpus from a line-delimited JSON file.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Corpus::from_reader(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

impl Corpus {
    pub fn from_reader(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|source| CorpusError::Io {
                path: String::new(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
                line: line_no,
                source,
            })?;
            records.push(raw_to_record(raw, line_no)?);
            lines.push(line_no);
        }
        Self::build(records, &lines)
    }

    /// Builds a corpus from in-memory records, applying the same cleaning and validation
    /// as file loading. Error line numbers are 1-based positions in `records`.
    pub fn from_records(records: Vec<PaperRecord>) -> Result<Self, CorpusError> {
        let lines: Vec<usize> = (1..=records.len()).collect();
        Self::build(records, &lines)
    }

    fn build(mut records: Vec<PaperRecord>, lines: &[usize]) -> Result<Self, CorpusError> {
        for (rec, &line) in records.iter_mut().zip(lines) {
            rec.clean();
            rec.validate().map_err(|reason| CorpusError::InvalidRecord {
                line,
                id: rec.id.to_string(),
                reason,
            })?;
        }
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id).then(a.cmp(&b)));
        for w in order.windows(2) {
            if records[w[0]].id == records[w[1]].id {
                return Err(CorpusError::DuplicateId {
                    id: records[w[1]].id.to_string(),
                    line: lines[w[1]],
                    first_line: lines[w[0]],
                });
            }
        }
        let mut slots: Vec<Option<PaperRecord>> = records.into_iter().map(Some).collect();
        let records: Vec<PaperRecord> = order
            .into_iter()
            .map(|i| slots[i].take().expect("each index visited once"))
            .collect();
        let lookup = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Ok(Self { records, lookup })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in ascending id order.
    pub fn records(&self) -> &[PaperRecord] {
        &self.records
    }

    pub fn get(&self, id: &PaperId) -> Option<&PaperRecord> {
        self.lookup.get(id).map(|&i| &self.records[i])
    }

    /// Dense position of `id` in id order.
    pub fn position(&self, id: &PaperId) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = &PaperId> + '_ {
        self.records.iter().map(|r| &r.id)
    }

    /// Writes the cleaned corpus back out in the line-delimited JSON input format.
    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn raw_to_record(raw: RawRecord, line: usize) -> Result<PaperRecord, CorpusError> {
    let invalid = |id: &str, reason: String| CorpusError::InvalidRecord {
        line,
        id: id.to_string(),
        reason,
    };
    let id = PaperId::new(raw.id.trim()).map_err(|e| invalid(&raw.id, e.to_string()))?;
    let title = raw
        .title
        .ok_or_else(|| invalid(&raw.id, "missing or empty title".into()))?;
    let mut references = Vec::new();
    for r in raw.references.unwrap_or_default() {
        let r = r.trim();
        if r.is_empty() {
            continue;
        }
        references.push(PaperId::new(r).map_err(|e| invalid(&raw.id, format!("reference: {e}")))?);
    }
    Ok(PaperRecord {
        id,
        title,
        keywords: raw.keywords.unwrap_or_default(),
        abstract_text: raw.abstract_text,
        references,
        topics: raw
            .topics
            .unwrap_or_default()
            .into_iter()
            .map(|t| Topic {
                topic_id: t.topic_id,
                confidence: t.confidence,
                is_leaf: t.is_leaf,
            })
            .collect(),
    })
}

/// Forward and inverse citation adjacency over corpus positions.
///
/// Position `i` refers to the `i`-th record of the corpus in id order, so sorted position
/// lists are also sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationIndex {
    ids: Vec<PaperId>,
    lookup: HashMap<PaperId, usize>,
    cites: Vec<Vec<usize>>,
    cited_by: Vec<Vec<usize>>,
    dangling: usize,
}

impl CitationIndex {
    /// Resolves every reference against the corpus. References to papers outside the
    /// corpus are dropped and counted.
    pub fn build(corpus: &Corpus) -> Self {
        let n = corpus.len();
        let mut cites = vec![Vec::new(); n];
        let mut cited_by = vec![Vec::new(); n];
        let mut dangling = 0;
        for (i, rec) in corpus.records().iter().enumerate() {
            for r in &rec.references {
                match corpus.position(r) {
                    Some(j) => cites[i].push(j),
                    None => dangling += 1,
                }
            }
            // References are sorted by id and positions follow id order.
            debug_assert!(cites[i].windows(2).all(|w| w[0] < w[1]));
            for &j in &cites[i] {
                cited_by[j].push(i);
            }
        }
        Self {
            ids: corpus.ids().cloned().collect(),
            lookup: corpus.lookup.clone(),
            cites,
            cited_by,
            dangling,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, pos: usize) -> &PaperId {
        &self.ids[pos]
    }

    pub fn ids(&self) -> &[PaperId] {
        &self.ids
    }

    pub fn position(&self, id: &PaperId) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    /// Positions cited by `pos`, ascending.
    pub fn cites(&self, pos: usize) -> &[usize] {
        &self.cites[pos]
    }

    /// Positions citing `pos`, ascending.
    pub fn cited_by(&self, pos: usize) -> &[usize] {
        &self.cited_by[pos]
    }

    /// References whose target is not in the corpus.
    pub fn dangling_count(&self) -> usize {
        self.dangling
    }

    /// Number of resolved citation edges.
    pub fn edge_count(&self) -> usize {
        self.cites.iter().map(Vec::len).sum()
    }
}

/// Corpus coverage summary.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub papers: usize,
    /// Fraction of papers with at least one resolved outgoing reference.
    pub with_references_fraction: f64,
    /// Mean resolved references over papers that have at least one.
    pub mean_references: f64,
    /// Fraction of papers with at least one co-citation, when computed.
    pub cocited_fraction: Option<f64>,
    pub dangling_references: usize,
}

pub fn corpus_stats(corpus: &Corpus, index: &CitationIndex) -> StatsReport {
    let n = corpus.len();
    let (referencing, total) = (0..index.len())
        .map(|i| index.cites(i).len())
        .filter(|&c| c > 0)
        .fold((0usize, 0usize), |(k, t), c| (k + 1, t + c));
    StatsReport {
        papers: n,
        with_references_fraction: if n == 0 { 0.0 } else { referencing as f64 / n as f64 },
        mean_references: if referencing == 0 {
            0.0
        } else {
            total as f64 / referencing as f64
        },
        cocited_fraction: None,
        dangling_references: index.dangling_count(),
    }
}

impl StatsReport {
    pub fn with_cocited_fraction(mut self, fraction: f64) -> Self {
        self.cocited_fraction = Some(fraction);
        self
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "papers={}", self.papers)?;
        writeln!(f, "with_references_fraction={:.6}", self.with_references_fraction)?;
        writeln!(f, "mean_references={:.6}", self.mean_references)?;
        if let Some(c) = self.cocited_fraction {
            writeln!(f, "cocited_fraction={c:.6}")?;
        }
        writeln!(f, "dangling_references={}", self.dangling_references)
    }
}
