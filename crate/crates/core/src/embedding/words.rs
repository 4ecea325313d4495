use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use super::EmbeddingError;
use crate::vector::{normalize, Matrix};

/// Unit-norm word vectors of a uniform dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordEmbeddings {
    terms: Vec<String>,
    lookup: HashMap<String, usize>,
    vectors: Matrix,
}

impl WordEmbeddings {
    pub fn new(dim: usize) -> Self {
        Self {
            terms: Vec::new(),
            lookup: HashMap::new(),
            vectors: Matrix::new(dim),
        }
    }

    /// Adds a term, normalizing its vector.
    pub fn insert(&mut self, term: &str, mut vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                line: 0,
                expected: self.dim(),
                found: vector.len(),
            });
        }
        if self.lookup.contains_key(term) {
            return Err(EmbeddingError::DuplicateTerm {
                line: 0,
                term: term.to_string(),
            });
        }
        if !normalize(&mut vector) {
            return Err(EmbeddingError::ZeroVector(term.to_string()));
        }
        self.lookup.insert(term.to_string(), self.terms.len());
        self.terms.push(term.to_string());
        self.vectors.push(&vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.lookup.contains_key(term)
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.lookup.get(term).map(|&i| self.vectors.row(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.terms.iter().map(String::as_str).zip(self.vectors.iter())
    }

    /// Writes the `<count> <dim>` header and one `<term> <v1> ... <vd>` row per term.
    pub fn write_text(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (term, v) in self.iter() {
            w.write_all(term.as_bytes())?;
            for x in v {
                write!(w, " {x}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self, EmbeddingError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(EmbeddingError::Parse {
            line: 1,
            message: "missing header".into(),
        })??;
        let parse_header = || -> Option<(usize, usize)> {
            let mut it = header.split_whitespace();
            let count = it.next()?.parse().ok()?;
            let dim = it.next()?.parse().ok()?;
            it.next().is_none().then_some((count, dim))
        };
        let (count, dim) = parse_header().ok_or(EmbeddingError::Parse {
            line: 1,
            message: "header must be `<count> <dimension>`".into(),
        })?;
        if dim == 0 {
            return Err(EmbeddingError::Parse {
                line: 1,
                message: "dimension must be positive".into(),
            });
        }
        let mut out = Self::new(dim);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let term = fields.next().expect("non-blank line");
            let vector = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            out.insert(term, vector).map_err(|e| match e {
                EmbeddingError::DimensionMismatch { expected, found, .. } => {
                    EmbeddingError::DimensionMismatch {
                        line: line_no,
                        expected,
                        found,
                    }
                }
                EmbeddingError::DuplicateTerm { term, .. } => {
                    EmbeddingError::DuplicateTerm { line: line_no, term }
                }
                other => other,
            })?;
        }
        if out.len() != count {
            return Err(EmbeddingError::CountMismatch {
                declared: count,
                found: out.len(),
            });
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = io::BufWriter::new(File::create(path)?);
        self.write_text(&mut w)?;
        w.flush()
    }
}

/// Loads word vectors from the text format, normalizing every vector.
pub fn load_word_embeddings(path: impl AsRef<Path>) -> Result<WordEmbeddings, EmbeddingError> {
    WordEmbeddings::read_text(BufReader::new(File::open(path)?))
}
