//! Paper embeddings: TF-IDF weighted sums of unit word vectors.
//!
//! For a paper, every token occurrence in the title or keywords contributes
//! `2 * idf(w) * ŵ` and every occurrence in the abstract contributes `idf(w) * ŵ`, so a
//! term's weight is its in-field occurrence count times its idf. The sum is normalized
//! to unit length. Tokens must be known to both the word vectors and the TF-IDF model.

mod tfidf;
mod train;
mod words;

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, PaperId, PaperRecord};
use crate::io_util::{invalid, read_f64, read_string, read_u32, read_u64, write_string};
use crate::vector::{axpy, normalize, Matrix};

pub use tfidf::{fit_tfidf, TermStats, TfIdfModel, Vocabulary};
pub use train::{
    train_on_sentences, train_word_embeddings, train_word_embeddings_with_report, Method,
    TrainingParams, TrainingReport,
};
pub use words::{load_word_embeddings, WordEmbeddings};

/// Weight of title and keyword occurrences relative to abstract occurrences.
pub const TITLE_WEIGHT: u32 = 2;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("header declares {declared} vectors but body has {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("line {line}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate term {term:?}")]
    DuplicateTerm { line: usize, term: String },
    #[error("term {0:?} has a zero or non-finite vector")]
    ZeroVector(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no term reaches the min-count cutoff of {min_count}")]
    EmptyVocabulary { min_count: u64 },
    #[error("unembeddable {0}: no in-vocabulary tokens with non-zero weight")]
    Unembeddable(String),
    #[error("invalid training parameters: {0}")]
    InvalidParams(String),
}

/// Splits on non-alphanumeric runs and lower-cases. Purely numeric and single-character
/// tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .filter(|t| !t.chars().all(char::is_numeric))
        .map(str::to_lowercase)
        .collect()
}

/// Title and keyword tokens, followed by abstract tokens.
pub(crate) fn record_fields(record: &PaperRecord) -> (Vec<String>, Vec<String>) {
    let mut head = tokenize(&record.title);
    for k in &record.keywords {
        head.extend(tokenize(k));
    }
    let body = record.abstract_text.as_deref().map(tokenize).unwrap_or_default();
    (head, body)
}

/// Token stream of a whole record: title, keywords, abstract.
pub fn record_tokens(record: &PaperRecord) -> Vec<String> {
    let (mut head, body) = record_fields(record);
    head.extend(body);
    head
}

/// A paper's unit-norm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperEmbedding {
    pub paper: PaperId,
    pub vector: Vec<f64>,
}

/// Sums weighted word vectors and normalizes. Weights are accumulated per term as
/// integer occurrence counts, then applied in term order, so the result does not depend
/// on token order.
fn compose<'a>(
    weighted: impl IntoIterator<Item = (&'a str, u32)>,
    words: &WordEmbeddings,
    tfidf: &TfIdfModel,
) -> Option<Vec<f64>> {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for (tok, w) in weighted {
        if let (Some(term), true) = (tfidf.term_id(tok), words.contains(tok)) {
            *counts.entry(term).or_default() += w;
        }
    }
    let mut d = vec![0.0; words.dim()];
    for (term, count) in counts {
        let name = tfidf.vocabulary().term(term);
        let v = words.get(name).expect("filtered above");
        axpy(&mut d, f64::from(count) * tfidf.idf_at(term), v);
    }
    normalize(&mut d).then_some(d)
}

pub fn embed_paper(
    record: &PaperRecord,
    words: &WordEmbeddings,
    tfidf: &TfIdfModel,
) -> Result<PaperEmbedding, EmbeddingError> {
    let (head, body) = record_fields(record);
    let weighted = head
        .iter()
        .map(|t| (t.as_str(), TITLE_WEIGHT))
        .chain(body.iter().map(|t| (t.as_str(), 1)));
    compose(weighted, words, tfidf)
        .map(|vector| PaperEmbedding {
            paper: record.id.clone(),
            vector,
        })
        .ok_or_else(|| EmbeddingError::Unembeddable(format!("paper {}", record.id)))
}

/// Embeds free text as if it were a title.
pub fn embed_text(
    text: &str,
    words: &WordEmbeddings,
    tfidf: &TfIdfModel,
) -> Result<Vec<f64>, EmbeddingError> {
    let tokens = tokenize(text);
    compose(tokens.iter().map(|t| (t.as_str(), TITLE_WEIGHT)), words, tfidf)
        .ok_or_else(|| EmbeddingError::Unembeddable(format!("text {text:?}")))
}

const STORE_MAGIC: &[u8; 8] = b"PRECEMB\0";
const STORE_VERSION: u32 = 1;

/// Unit-norm paper embeddings keyed by paper id, rows in ascending id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    ids: Vec<PaperId>,
    lookup: HashMap<PaperId, usize>,
    vectors: Matrix,
}

impl EmbeddingStore {
    /// Builds a store from embeddings in any order. Panics on mixed dimensions or a
    /// repeated paper id.
    pub fn from_embeddings(mut embeddings: Vec<PaperEmbedding>) -> Self {
        embeddings.sort_by(|a, b| a.paper.cmp(&b.paper));
        let dim = embeddings.first().map_or(0, |e| e.vector.len());
        let mut vectors = Matrix::with_capacity(dim, embeddings.len());
        let mut ids = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            assert!(
                ids.last() != Some(&e.paper),
                "duplicate paper {} in embedding store",
                e.paper
            );
            vectors.push(&e.vector);
            ids.push(e.paper);
        }
        let lookup = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        Self { ids, lookup, vectors }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn ids(&self) -> &[PaperId] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> &PaperId {
        &self.ids[row]
    }

    pub fn row_of(&self, id: &PaperId) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn vector(&self, row: usize) -> &[f64] {
        self.vectors.row(row)
    }

    pub fn get(&self, id: &PaperId) -> Option<&[f64]> {
        self.row_of(id).map(|r| self.vectors.row(r))
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    /// Writes the versioned binary cache.
    pub fn write_to(&self, w: impl Write) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(STORE_MAGIC)?;
        w.write_all(&STORE_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for (id, v) in self.ids.iter().zip(self.vectors.iter()) {
            write_string(&mut w, id.as_str())?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_from(r: impl Read) -> io::Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != STORE_MAGIC {
            return Err(invalid("not a paper embedding cache"));
        }
        let version = read_u32(&mut r)?;
        if version != STORE_VERSION {
            return Err(invalid(format!("unsupported embedding cache version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let id = PaperId::new(read_string(&mut r)?).map_err(|e| invalid(e.to_string()))?;
            let vector = (0..dim).map(|_| read_f64(&mut r)).collect::<io::Result<Vec<_>>>()?;
            out.push(PaperEmbedding { paper: id, vector });
        }
        if out.windows(2).any(|w| w[0].paper >= w[1].paper) {
            return Err(invalid("embedding cache rows are not in strictly ascending id order"));
        }
        Ok(Self::from_embeddings(out))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Result of embedding a whole corpus.
#[derive(Debug, Clone)]
pub struct CorpusEmbedding {
    pub store: EmbeddingStore,
    /// Papers without any usable token, in id order.
    pub unembeddable: Vec<PaperId>,
}

/// Embeds every paper, in parallel on the current rayon pool. Output is independent of
/// scheduling.
pub fn embed_corpus(corpus: &Corpus, words: &WordEmbeddings, tfidf: &TfIdfModel) -> CorpusEmbedding {
    let results: Vec<Result<PaperEmbedding, PaperId>> = corpus
        .records()
        .par_iter()
        .map(|r| embed_paper(r, words, tfidf).map_err(|_| r.id.clone()))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut unembeddable = Vec::new();
    for r in results {
        match r {
            Ok(e) => ok.push(e),
            Err(id) => unembeddable.push(id),
        }
    }
    CorpusEmbedding {
        store: EmbeddingStore::from_embeddings(ok),
        unembeddable,
    }
}
