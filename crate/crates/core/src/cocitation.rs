//! Co-citation counts.
//!
//! Two papers are co-cited when some third paper cites both of them. The co-citation
//! count of `source` and `j` is the number of such common citers. Counts are accumulated
//! sparsely: for every citer `k` of `source`, each other paper in `k`'s reference list
//! gains one. The cost is the sum of the citers' out-degrees, never an `n x n` product.

use std::io::{self, Write};

use thiserror::Error;

use crate::corpus::{CitationIndex, PaperId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoCitationError {
    #[error("unknown paper id {0}")]
    UnknownPaper(PaperId),
    #[error("top-k must be at least 1")]
    ZeroK,
}

/// Co-cited papers of one source, by count descending then id ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoCitationList {
    pub source: PaperId,
    pub entries: Vec<(PaperId, u32)>,
}

impl CoCitationList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Count for `other`, or 0 when the two are not co-cited.
    pub fn count_of(&self, other: &PaperId) -> u32 {
        self.entries
            .iter()
            .find(|(id, _)| id == other)
            .map_or(0, |(_, c)| *c)
    }
}

/// Reusable scratch space for sparse co-citation accumulation. One per worker.
#[derive(Debug, Clone, Default)]
pub struct CoCitationCounter {
    counts: Vec<u32>,
    touched: Vec<usize>,
}

impl CoCitationCounter {
    pub fn new(papers: usize) -> Self {
        Self {
            counts: vec![0; papers],
            touched: Vec::new(),
        }
    }

    /// Co-citation counts of the paper at `source` position, as `(position, count)` pairs
    /// sorted by count descending then position ascending.
    pub fn counts_at(&mut self, index: &CitationIndex, source: usize) -> Vec<(usize, u32)> {
        if self.counts.len() < index.len() {
            self.counts.resize(index.len(), 0);
        }
        for &citer in index.cited_by(source) {
            for &other in index.cites(citer) {
                if other == source {
                    continue;
                }
                if self.counts[other] == 0 {
                    self.touched.push(other);
                }
                self.counts[other] += 1;
            }
        }
        let mut out: Vec<(usize, u32)> = self
            .touched
            .drain(..)
            .map(|p| (p, std::mem::take(&mut self.counts[p])))
            .collect();
        out.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    pub fn counts(
        &mut self,
        index: &CitationIndex,
        source: &PaperId,
    ) -> Result<CoCitationList, CoCitationError> {
        let pos = index
            .position(source)
            .ok_or_else(|| CoCitationError::UnknownPaper(source.clone()))?;
        Ok(CoCitationList {
            source: source.clone(),
            entries: self
                .counts_at(index, pos)
                .into_iter()
                .map(|(p, c)| (index.id(p).clone(), c))
                .collect(),
        })
    }
}

/// Co-citation counts of `source` against every other paper; zero counts omitted.
pub fn cocitation_counts(
    index: &CitationIndex,
    source: &PaperId,
) -> Result<CoCitationList, CoCitationError> {
    CoCitationCounter::new(index.len()).counts(index, source)
}

/// The first `k` entries of `list`.
pub fn top_cocited(list: &CoCitationList, k: usize) -> Result<CoCitationList, CoCitationError> {
    if k == 0 {
        return Err(CoCitationError::ZeroK);
    }
    Ok(CoCitationList {
        source: list.source.clone(),
        entries: list.entries.iter().take(k).cloned().collect(),
    })
}

/// Writes lists as `source \t other \t count` rows in list order.
pub fn write_tsv<'a>(
    mut w: impl Write,
    lists: impl IntoIterator<Item = &'a CoCitationList>,
) -> io::Result<()> {
    for list in lists {
        for (other, count) in &list.entries {
            writeln!(w, "{}\t{}\t{}", list.source, other, count)?;
        }
    }
    Ok(())
}
