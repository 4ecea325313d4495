use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use super::{record_tokens, EmbeddingError};
use crate::corpus::Corpus;
use crate::io_util::invalid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermStats {
    pub term: String,
    /// Documents containing the term.
    pub document_frequency: u32,
    /// Total occurrences across the corpus.
    pub corpus_frequency: u64,
}

/// Retained terms, sorted alphabetically; the position is the term id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    terms: Vec<TermStats>,
    lookup: HashMap<String, usize>,
    n_docs: usize,
}

impl Vocabulary {
    fn new(n_docs: usize, mut terms: Vec<TermStats>) -> Self {
        terms.sort_by(|a, b| a.term.cmp(&b.term));
        let lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.term.clone(), i))
            .collect();
        Self { terms, lookup, n_docs }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id].term
    }

    pub fn stats(&self, term: &str) -> Option<&TermStats> {
        self.lookup.get(term).map(|&i| &self.terms[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &TermStats> {
        self.terms.iter()
    }
}

/// Inverse document frequencies, `idf(t) = ln(n_docs / df(t))`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TfIdfModel {
    vocabulary: Vocabulary,
    idf: Vec<f64>,
}

impl TfIdfModel {
    /// Builds a model from precomputed term statistics.
    pub fn from_stats(n_docs: usize, terms: Vec<TermStats>) -> Self {
        let vocabulary = Vocabulary::new(n_docs, terms);
        let idf = vocabulary
            .terms
            .iter()
            .map(|t| (n_docs as f64 / f64::from(t.document_frequency)).ln())
            .collect();
        Self { vocabulary, idf }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn term_id(&self, term: &str) -> Option<usize> {
        self.vocabulary.lookup.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_id(term).map(|i| self.idf[i])
    }

    pub fn idf_at(&self, id: usize) -> f64 {
        self.idf[id]
    }

    /// Multiplies every idf by `factor`. Paper embeddings are invariant to this.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vocabulary: self.vocabulary.clone(),
            idf: self.idf.iter().map(|x| x * factor).collect(),
        }
    }

    /// Text form: a `n_docs <n>` header, then `term \t df \t cf` per line.
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "n_docs\t{}", self.vocabulary.n_docs)?;
        for t in &self.vocabulary.terms {
            writeln!(w, "{}\t{}\t{}", t.term, t.document_frequency, t.corpus_frequency)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> io::Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| invalid("empty tf-idf file"))??;
        let n_docs = header
            .strip_prefix("n_docs\t")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| invalid("tf-idf header must be `n_docs\\t<count>`"))?;
        let mut terms = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let bad = || invalid(format!("tf-idf line {}: malformed row", i + 2));
            let mut parts = line.split('\t');
            let (Some(term), Some(df), Some(cf), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let document_frequency: u32 = df.parse().map_err(|_| bad())?;
            if document_frequency == 0 || document_frequency as usize > n_docs {
                return Err(bad());
            }
            terms.push(TermStats {
                term: term.to_string(),
                document_frequency,
                corpus_frequency: cf.parse().map_err(|_| bad())?,
            });
        }
        Ok(Self::from_stats(n_docs, terms))
    }
}

/// Fits document frequencies over title, keywords and abstract of every paper, keeping
/// terms that occur at least `min_count` times in the corpus.
pub fn fit_tfidf(corpus: &Corpus, min_count: u64) -> Result<TfIdfModel, EmbeddingError> {
    if corpus.is_empty() {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let mut counts: HashMap<String, (u32, u64)> = HashMap::new();
    for rec in corpus.records() {
        let mut tokens = record_tokens(rec);
        for t in &tokens {
            counts.entry(t.clone()).or_default().1 += 1;
        }
        tokens.sort_unstable();
        tokens.dedup();
        for t in tokens {
            counts.get_mut(&t).expect("counted above").0 += 1;
        }
    }
    let terms = counts
        .into_iter()
        .filter(|(_, (_, cf))| *cf >= min_count)
        .map(|(term, (df, cf))| TermStats {
            term,
            document_frequency: df,
            corpus_frequency: cf,
        })
        .collect();
    Ok(TfIdfModel::from_stats(corpus.len(), terms))
}
