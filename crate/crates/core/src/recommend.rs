//! Candidate search and fusion.
//!
//! Co-citation counts are mapped into (0, 1) with the logistic
//! `1 / (1 + exp(theta * (tau - cc)))` so they can be ranked against cosine scores.
//! Content candidates come from a scan of the source's own cluster only.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;
use thiserror::Error;

use crate::clustering::{ClusterModel, SearchPartition};
use crate::cocitation::{CoCitationCounter, CoCitationList};
use crate::corpus::{CitationIndex, PaperId};
use crate::embedding::{embed_text, EmbeddingError, EmbeddingStore, TfIdfModel, WordEmbeddings};
use crate::vector::dot;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("paper {0} has no embedding; it gets co-citation recommendations only")]
    NotEmbedded(PaperId),
    #[error("paper {0} is in a cluster above the size cap; it gets co-citation recommendations only")]
    CappedCluster(PaperId),
    #[error("no cluster is small enough to search")]
    NoSearchableCluster,
    #[error("cluster model does not match the embedding store; re-run clustering")]
    ModelMismatch,
    #[error("invalid merge parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

impl RecommendError {
    /// True for the errors that mean "serve co-citation candidates only".
    pub fn is_ccb_only(&self) -> bool {
        matches!(self, Self::NotEmbedded(_) | Self::CappedCluster(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeParams {
    /// Slope of the co-citation logistic.
    pub theta: f64,
    /// Co-citation count mapped to 0.5.
    pub tau: f64,
    pub top_k: usize,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            theta: 0.4,
            tau: 5.0,
            top_k: 20,
        }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<(), RecommendError> {
        if !self.theta.is_finite() || self.theta <= 0.0 {
            return Err(RecommendError::InvalidParams("theta must be > 0".into()));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(RecommendError::InvalidParams("tau must be >= 0".into()));
        }
        if self.top_k == 0 {
            return Err(RecommendError::InvalidParams("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Maps a co-citation count into (0, 1]. Large counts round to 1.0 in f64
/// (from 97 with the default slope and midpoint).
pub fn map_cc_score(cc: u32, params: &MergeParams) -> f64 {
    1.0 / (1.0 + (params.theta * (params.tau - f64::from(cc))).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Ccb,
    Cb,
    Both,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ccb => "ccb",
            Self::Cb => "cb",
            Self::Both => "both",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ccb" => Ok(Self::Ccb),
            "cb" => Ok(Self::Cb),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown method {other:?}; expected ccb, cb or both")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub source: PaperId,
    pub target: PaperId,
    pub score: f64,
    pub provenance: Provenance,
}

fn by_score_then_id<T: Ord>(a: (f64, &T), b: (f64, &T)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Fuses co-citation and content candidates of one source into a single ranked list.
///
/// Co-citation entries are scored with [`map_cc_score`]; content entries keep their
/// cosine, with negative cosines dropped. A target in both lists appears once, tagged
/// `both`, with the larger score. The result is sorted by score descending, then target
/// id, and truncated to `top_k`.
pub fn merge_recommendations(
    ccb: &CoCitationList,
    cb: &[(PaperId, f64)],
    params: &MergeParams,
) -> Vec<Recommendation> {
    let source = &ccb.source;
    let mut merged: BTreeMap<&PaperId, (f64, Provenance)> = BTreeMap::new();
    for (target, cc) in &ccb.entries {
        if target != source {
            merged.insert(target, (map_cc_score(*cc, params), Provenance::Ccb));
        }
    }
    for (target, cosine) in cb {
        if target == source || *cosine < 0.0 || cosine.is_nan() {
            continue;
        }
        let s = cosine.min(1.0);
        merged
            .entry(target)
            .and_modify(|(score, prov)| {
                if *prov != Provenance::Cb {
                    *prov = Provenance::Both;
                }
                *score = score.max(s);
            })
            .or_insert((s, Provenance::Cb));
    }
    let mut out: Vec<Recommendation> = merged
        .into_iter()
        .map(|(target, (score, provenance))| Recommendation {
            source: source.clone(),
            target: target.clone(),
            score,
            provenance,
        })
        .collect();
    out.sort_by(|a, b| by_score_then_id((a.score, &a.target), (b.score, &b.target)));
    out.truncate(params.top_k);
    out
}

/// Cluster-restricted cosine search over an embedding store.
#[derive(Debug)]
pub struct ContentIndex<'a> {
    store: &'a EmbeddingStore,
    model: &'a ClusterModel,
    partition: &'a SearchPartition,
    computations: AtomicU64,
}

/// Top `k` of `(row, score)` by score descending then row ascending. Rows follow id
/// order, so this is also id order on ties.
fn top_k_rows(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    let cmp = |a: &(usize, f64), b: &(usize, f64)| by_score_then_id((a.1, &a.0), (b.1, &b.0));
    if scored.len() > k && k > 0 {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored.truncate(k);
    scored
}

impl<'a> ContentIndex<'a> {
    pub fn new(
        store: &'a EmbeddingStore,
        model: &'a ClusterModel,
        partition: &'a SearchPartition,
    ) -> Result<Self, RecommendError> {
        if !model.matches(store) {
            return Err(RecommendError::ModelMismatch);
        }
        Ok(Self {
            store,
            model,
            partition,
            computations: AtomicU64::new(0),
        })
    }

    pub fn store(&self) -> &EmbeddingStore {
        self.store
    }

    pub fn model(&self) -> &ClusterModel {
        self.model
    }

    /// Paper-paper and query-centroid similarity evaluations so far.
    pub fn similarity_computations(&self) -> u64 {
        self.computations.load(AtomicOrdering::Relaxed)
    }

    fn scan_cluster(&self, cluster: usize, query: &[f64], exclude: Option<usize>, k: usize) -> Vec<(usize, f64)> {
        let members = self.model.members(cluster);
        let scored: Vec<(usize, f64)> = members
            .iter()
            .filter(|&&r| Some(r) != exclude)
            .map(|&r| (r, dot(query, self.store.vector(r))))
            .collect();
        self.computations
            .fetch_add(scored.len() as u64, AtomicOrdering::Relaxed);
        top_k_rows(scored, k)
    }

    /// Nearest same-cluster neighbors of a store row, or `None` when its cluster is capped.
    pub fn neighbors_of_row(&self, row: usize, k: usize) -> Option<Vec<(usize, f64)>> {
        let cluster = self.model.cluster_of_row(row);
        if !self.partition.is_searchable(cluster) {
            return None;
        }
        Some(self.scan_cluster(cluster, self.store.vector(row), Some(row), k))
    }

    /// The `k` most similar papers in `source`'s cluster, excluding `source`.
    pub fn cb_neighbors(&self, source: &PaperId, k: usize) -> Result<Vec<(PaperId, f64)>, RecommendError> {
        let row = self
            .store
            .row_of(source)
            .ok_or_else(|| RecommendError::NotEmbedded(source.clone()))?;
        let hits = self
            .neighbors_of_row(row, k)
            .ok_or_else(|| RecommendError::CappedCluster(source.clone()))?;
        Ok(self.resolve(hits))
    }

    fn resolve(&self, hits: Vec<(usize, f64)>) -> Vec<(PaperId, f64)> {
        hits.into_iter()
            .map(|(r, s)| (self.store.id(r).clone(), s))
            .collect()
    }

    /// Centroid index chosen for a query vector: the most similar searchable centroid.
    pub fn route(&self, query: &[f64]) -> Result<usize, RecommendError> {
        let centroids = self.model.centroids();
        let mut ranked: Vec<(usize, f64)> = centroids
            .iter()
            .enumerate()
            .map(|(c, v)| (c, dot(query, v)))
            .collect();
        self.computations
            .fetch_add(ranked.len() as u64, AtomicOrdering::Relaxed);
        ranked.sort_unstable_by(|a, b| by_score_then_id((a.1, &a.0), (b.1, &b.0)));
        ranked
            .into_iter()
            .map(|(c, _)| c)
            .find(|&c| self.partition.is_searchable(c))
            .ok_or(RecommendError::NoSearchableCluster)
    }

    /// Nearest papers to an arbitrary unit query vector: one centroid scan plus one
    /// cluster scan.
    pub fn query(&self, query: &[f64], k: usize) -> Result<Vec<(PaperId, f64)>, RecommendError> {
        let cluster = self.route(query)?;
        Ok(self.resolve(self.scan_cluster(cluster, query, None, k)))
    }
}

/// Free-function form of [`ContentIndex::cb_neighbors`].
pub fn cb_neighbors(
    source: &PaperId,
    model: &ClusterModel,
    embeddings: &EmbeddingStore,
    partition: &SearchPartition,
    k: usize,
) -> Result<Vec<(PaperId, f64)>, RecommendError> {
    ContentIndex::new(embeddings, model, partition)?.cb_neighbors(source, k)
}

/// Recommends papers for free text.
pub fn recommend_text(
    query: &str,
    words: &WordEmbeddings,
    tfidf: &TfIdfModel,
    content: &ContentIndex<'_>,
    k: usize,
) -> Result<Vec<(PaperId, f64)>, RecommendError> {
    let v = embed_text(query, words, tfidf)?;
    content.query(&v, k)
}

/// Counters from a batch run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub papers: usize,
    /// Papers with at least one recommendation.
    pub covered: usize,
    /// Papers with neither co-citation nor content candidates.
    pub no_coverage: usize,
    /// Papers that received content candidates.
    pub with_content: usize,
    /// Papers restricted to co-citation candidates (unembedded or in a capped cluster).
    pub ccb_only: usize,
    pub similarity_computations: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RecommendationRun {
    /// One non-empty list per covered paper, in source id order.
    pub lists: Vec<Vec<Recommendation>>,
    pub stats: RunStats,
}

impl RecommendationRun {
    pub fn iter(&self) -> impl Iterator<Item = &Recommendation> {
        self.lists.iter().flatten()
    }

    /// `source \t target \t score \t provenance` rows, score to 6 decimals.
    pub fn write_tsv(&self, w: impl Write) -> io::Result<()> {
        write_tsv(w, self.iter())
    }
}

pub fn write_tsv<'a>(mut w: impl Write, recs: impl IntoIterator<Item = &'a Recommendation>) -> io::Result<()> {
    for r in recs {
        writeln!(w, "{}\t{}\t{:.6}\t{}", r.source, r.target, r.score, r.provenance)?;
    }
    Ok(())
}

/// Recommendations for `sources`, with co-citation candidates supplied by `ccb`.
///
/// Content candidates are searched for every source that is embedded and sits in a
/// searchable cluster. Runs on the current rayon pool; output order follows `sources`.
pub fn recommend_with<F>(
    sources: &[PaperId],
    ccb: F,
    content: Option<&ContentIndex<'_>>,
    params: &MergeParams,
) -> Result<RecommendationRun, RecommendError>
where
    F: Fn(&PaperId) -> CoCitationList + Sync,
{
    params.validate()?;
    let before = content.map_or(0, ContentIndex::similarity_computations);
    let per_paper: Vec<(Vec<Recommendation>, bool)> = sources
        .par_iter()
        .map(|source| {
            let list = ccb(source);
            let cb = match content {
                Some(ci) => match ci.cb_neighbors(source, params.top_k) {
                    Ok(hits) => Some(hits),
                    Err(e) if e.is_ccb_only() => None,
                    Err(e) => unreachable!("content index checked at construction: {e}"),
                },
                None => None,
            };
            let has_cb = cb.is_some();
            (merge_recommendations(&list, &cb.unwrap_or_default(), params), has_cb)
        })
        .collect();

    let mut run = RecommendationRun::default();
    run.stats.papers = sources.len();
    for (recs, has_cb) in per_paper {
        if has_cb {
            run.stats.with_content += 1;
        } else {
            run.stats.ccb_only += 1;
        }
        if recs.is_empty() {
            run.stats.no_coverage += 1;
        } else {
            run.stats.covered += 1;
            run.lists.push(recs);
        }
    }
    run.stats.similarity_computations =
        content.map_or(0, ContentIndex::similarity_computations) - before;
    Ok(run)
}

/// Recommendations for every paper in the citation index, computing co-citation
/// candidates on the fly.
pub fn recommend_corpus(
    index: &CitationIndex,
    content: Option<&ContentIndex<'_>>,
    params: &MergeParams,
) -> Result<RecommendationRun, RecommendError> {
    thread_local! {
        static COUNTER: std::cell::RefCell<CoCitationCounter> = Default::default();
    }
    recommend_with(
        index.ids(),
        |id| {
            COUNTER.with(|c| {
                c.borrow_mut()
                    .counts(index, id)
                    .expect("ids come from the index")
            })
        },
        content,
        params,
    )
}
