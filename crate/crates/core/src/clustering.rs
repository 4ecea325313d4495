//! Spherical k-means over unit paper embeddings.
//!
//! Centroids are seeded from leaf topics (the normalized mean of up to
//! `max_samples_per_topic` randomly sampled papers stamped with that topic at high
//! confidence), or, when no paper carries such a label, by k-means++ style seeding on a
//! sample. Lloyd iterations then alternate argmax-cosine assignment and normalized-mean
//! centroid updates. Clusters larger than `size_cap` are excluded from content search.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, PaperId};
use crate::embedding::EmbeddingStore;
use crate::io_util::{invalid, read_f64, read_string, read_u32, read_u64, write_string};
use crate::vector::{axpy, dot, normalize, Matrix};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error(
        "no leaf topic with confidence >= {threshold} covers an embedded paper; \
         use farthest-point seeding instead"
    )]
    NoQualifyingTopics { threshold: f64 },
    #[error("dimension mismatch: embeddings have {embeddings}, centroids have {centroids}")]
    DimensionMismatch { embeddings: usize, centroids: usize },
    #[error("no embeddings to cluster")]
    NoEmbeddings,
    #[error("no initial centroids")]
    NoCentroids,
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    /// Upper bound on the number of seeded clusters.
    pub initial_k: usize,
    pub max_iterations: usize,
    /// Stop once the mean cosine displacement of the centroids falls below this.
    pub min_error: f64,
    /// Clusters above this size get no content-based search.
    pub size_cap: usize,
    pub max_samples_per_topic: usize,
    /// Minimum topic confidence for a paper to seed its leaf topic's centroid.
    pub topic_confidence: f64,
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            initial_k: 23_533,
            max_iterations: 10,
            min_error: 1e-3,
            size_cap: 35_000,
            max_samples_per_topic: 1000,
            topic_confidence: 0.8,
            seed: 1,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let fail = |m: &str| Err(ClusterError::InvalidParams(m.to_string()));
        if self.initial_k == 0 {
            return fail("initial_k must be >= 1");
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be >= 1");
        }
        if self.min_error.is_nan() || self.min_error <= 0.0 {
            return fail("min_error must be > 0");
        }
        if self.size_cap == 0 {
            return fail("size_cap must be >= 1");
        }
        if self.max_samples_per_topic == 0 {
            return fail("max_samples_per_topic must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.topic_confidence) {
            return fail("topic_confidence must be in [0, 1]");
        }
        Ok(())
    }
}

/// Initial centroids, one per seeding topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSeeds {
    pub centroids: Matrix,
    pub topics: Vec<String>,
    /// Papers averaged into each centroid.
    pub sample_sizes: Vec<usize>,
}

/// Seeds one centroid per qualifying leaf topic.
pub fn init_centroids(
    corpus: &Corpus,
    embeddings: &EmbeddingStore,
    params: &ClusterParams,
) -> Result<TopicSeeds, ClusterError> {
    params.validate()?;
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for rec in corpus.records() {
        let Some(row) = embeddings.row_of(&rec.id) else {
            continue;
        };
        for t in &rec.topics {
            if t.is_leaf && t.confidence >= params.topic_confidence {
                let m = members.entry(t.topic_id.as_str()).or_default();
                if m.last() != Some(&row) {
                    m.push(row);
                }
            }
        }
    }
    if members.len() > params.initial_k {
        let mut by_size: Vec<(&str, usize)> = members.iter().map(|(t, m)| (*t, m.len())).collect();
        by_size.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let drop: Vec<&str> = by_size[params.initial_k..].iter().map(|(t, _)| *t).collect();
        for t in drop {
            members.remove(t);
        }
    }

    let dim = embeddings.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut seeds = TopicSeeds {
        centroids: Matrix::new(dim),
        topics: Vec::new(),
        sample_sizes: Vec::new(),
    };
    for (topic, rows) in members {
        let chosen: Vec<usize> = if rows.len() > params.max_samples_per_topic {
            let mut picks: Vec<usize> = sample(&mut rng, rows.len(), params.max_samples_per_topic)
                .into_iter()
                .map(|i| rows[i])
                .collect();
            picks.sort_unstable();
            picks
        } else {
            rows
        };
        let mut c = vec![0.0; dim];
        for &r in &chosen {
            axpy(&mut c, 1.0, embeddings.vector(r));
        }
        if normalize(&mut c) {
            seeds.centroids.push(&c);
            seeds.topics.push(topic.to_string());
            seeds.sample_sizes.push(chosen.len());
        }
    }
    if seeds.topics.is_empty() {
        return Err(ClusterError::NoQualifyingTopics {
            threshold: params.topic_confidence,
        });
    }
    Ok(seeds)
}

/// k-means++ style seeding on a random sample of at most `k * max_samples_per_topic`
/// embeddings, using cosine distance. May return fewer than `k` centroids when the sample
/// has fewer distinct directions.
pub fn init_centroids_farthest_point(
    embeddings: &EmbeddingStore,
    k: usize,
    params: &ClusterParams,
) -> Result<Matrix, ClusterError> {
    if embeddings.is_empty() {
        return Err(ClusterError::NoEmbeddings);
    }
    if k == 0 {
        return Err(ClusterError::InvalidParams("k must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = embeddings.len();
    let budget = k.saturating_mul(params.max_samples_per_topic).min(n);
    let mut pool: Vec<usize> = if budget < n {
        sample(&mut rng, n, budget).into_vec()
    } else {
        (0..n).collect()
    };
    pool.sort_unstable();

    let mut centroids = Matrix::with_capacity(embeddings.dim(), k);
    let first = pool[rng.random_range(0..pool.len())];
    centroids.push(embeddings.vector(first));
    let mut nearest: Vec<f64> = pool
        .iter()
        .map(|&r| 1.0 - dot(embeddings.vector(r), embeddings.vector(first)))
        .collect();
    while centroids.rows() < k {
        let weights: Vec<f64> = nearest.iter().map(|d| d.max(0.0).powi(2)).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut x = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                pick = i;
                break;
            }
            x -= w;
        }
        let row = pool[pick];
        centroids.push(embeddings.vector(row));
        for (d, &r) in nearest.iter_mut().zip(&pool) {
            *d = d.min(1.0 - dot(embeddings.vector(r), embeddings.vector(row)));
        }
    }
    Ok(centroids)
}

/// Converged clustering of an [`EmbeddingStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    params: ClusterParams,
    centroids: Matrix,
    /// Paper ids in embedding-store row order.
    ids: Vec<PaperId>,
    assignment: Vec<u32>,
    members: Vec<Vec<usize>>,
    iterations: usize,
    converged: bool,
    objective_history: Vec<f64>,
    similarity_computations: u64,
}

/// Assigns every row to its most similar centroid (lowest index on ties). Returns the
/// assignment and the similarity of each row to its centroid.
fn assign(embeddings: &Matrix, centroids: &Matrix) -> (Vec<u32>, Vec<f64>) {
    (0..embeddings.rows())
        .into_par_iter()
        .map(|r| {
            let v = embeddings.row(r);
            let mut best = (0u32, f64::NEG_INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let s = dot(v, centroid);
                if s > best.1 {
                    best = (c as u32, s);
                }
            }
            best
        })
        .unzip()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Normalized member means, in cluster order, with empty clusters removed. Rewrites
/// `assignment` to the compacted indices.
fn update_centroids(embeddings: &Matrix, assignment: &mut [u32], k: usize) -> (Matrix, Vec<usize>) {
    let dim = embeddings.dim();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (r, &c) in assignment.iter().enumerate() {
        let c = c as usize;
        counts[c] += 1;
        axpy(&mut sums[c * dim..(c + 1) * dim], 1.0, embeddings.row(r));
    }
    let mut remap = vec![u32::MAX; k];
    let mut kept = Vec::new();
    let mut out = Matrix::with_capacity(dim, k);
    for c in 0..k {
        let s = &mut sums[c * dim..(c + 1) * dim];
        if counts[c] > 0 && normalize(s) {
            remap[c] = out.rows() as u32;
            kept.push(c);
            out.push(s);
        }
    }
    for a in assignment.iter_mut() {
        debug_assert_ne!(remap[*a as usize], u32::MAX);
        *a = remap[*a as usize];
    }
    (out, kept)
}

/// Runs Lloyd iterations from `initial` centroids.
///
/// Each iteration assigns every paper to its argmax-cosine centroid, recomputes centroids
/// as normalized member means and drops emptied clusters. Iteration stops after
/// `max_iterations` updates or once the mean `1 - cos(old, new)` over surviving centroids
/// falls below `min_error`. A final assignment pass against the final centroids makes
/// every assignment argmax-cosine.
pub fn spherical_kmeans(
    embeddings: &EmbeddingStore,
    initial: Matrix,
    params: &ClusterParams,
) -> Result<ClusterModel, ClusterError> {
    params.validate()?;
    if embeddings.is_empty() {
        return Err(ClusterError::NoEmbeddings);
    }
    if initial.is_empty() {
        return Err(ClusterError::NoCentroids);
    }
    if initial.dim() != embeddings.dim() {
        return Err(ClusterError::DimensionMismatch {
            embeddings: embeddings.dim(),
            centroids: initial.dim(),
        });
    }
    let data = embeddings.vectors();
    let n = embeddings.len() as u64;
    let mut centroids = initial;
    let mut history = Vec::new();
    let mut sims_done = 0u64;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iterations {
        let (mut assignment, sims) = assign(data, &centroids);
        sims_done += n * centroids.rows() as u64;
        history.push(mean(&sims));
        let (next, kept) = update_centroids(data, &mut assignment, centroids.rows());
        let shift = mean(
            &kept
                .iter()
                .enumerate()
                .map(|(new, &old)| 1.0 - dot(centroids.row(old), next.row(new)))
                .collect::<Vec<_>>(),
        );
        centroids = next;
        iterations += 1;
        log::debug!(
            "kmeans iteration {iterations}: objective {:.6} shift {shift:.3e} clusters {}",
            history.last().unwrap(),
            centroids.rows()
        );
        if shift < params.min_error {
            converged = true;
            break;
        }
    }

    let (mut assignment, sims) = assign(data, &centroids);
    sims_done += n * centroids.rows() as u64;
    history.push(mean(&sims));
    // Drop clusters nobody chose; remaining assignments stay argmax.
    let k = centroids.rows();
    let mut used = vec![false; k];
    for &a in &assignment {
        used[a as usize] = true;
    }
    if used.iter().any(|u| !u) {
        let mut remap = vec![0u32; k];
        let mut compact = Matrix::with_capacity(centroids.dim(), k);
        for c in 0..k {
            if used[c] {
                remap[c] = compact.rows() as u32;
                compact.push(centroids.row(c));
            }
        }
        assignment.iter_mut().for_each(|a| *a = remap[*a as usize]);
        centroids = compact;
    }
    Ok(ClusterModel::assemble(
        params.clone(),
        centroids,
        embeddings.ids().to_vec(),
        assignment,
        iterations,
        converged,
        history,
        sims_done,
    ))
}

const MODEL_MAGIC: &[u8; 8] = b"PRECCLU\0";
const MODEL_VERSION: u32 = 1;

impl ClusterModel {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        params: ClusterParams,
        centroids: Matrix,
        ids: Vec<PaperId>,
        assignment: Vec<u32>,
        iterations: usize,
        converged: bool,
        objective_history: Vec<f64>,
        similarity_computations: u64,
    ) -> Self {
        let mut members = vec![Vec::new(); centroids.rows()];
        for (r, &c) in assignment.iter().enumerate() {
            members[c as usize].push(r);
        }
        Self {
            params,
            centroids,
            ids,
            assignment,
            members,
            iterations,
            converged,
            objective_history,
            similarity_computations,
        }
    }

    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    /// Number of clusters after empty-cluster removal.
    pub fn cluster_count(&self) -> usize {
        self.centroids.rows()
    }

    pub fn ids(&self) -> &[PaperId] {
        &self.ids
    }

    /// Cluster of each embedding-store row.
    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn cluster_of_row(&self, row: usize) -> usize {
        self.assignment[row] as usize
    }

    /// Store rows in cluster `c`, ascending.
    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn mean_cluster_size(&self) -> f64 {
        self.ids.len() as f64 / self.cluster_count() as f64
    }

    pub fn max_cluster_size(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Mean cosine of papers to their assigned centroid after each assignment pass,
    /// including the final one.
    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&0.0)
    }

    /// Paper-centroid similarity evaluations spent while clustering.
    pub fn similarity_computations(&self) -> u64 {
        self.similarity_computations
    }

    /// True when the model was fitted on exactly this store's papers.
    pub fn matches(&self, store: &EmbeddingStore) -> bool {
        self.ids == store.ids() && self.centroids.dim() == store.dim()
    }

    /// `paper_id \t cluster_index` rows in id order.
    pub fn write_assignments_tsv(&self, mut w: impl Write) -> io::Result<()> {
        for (id, c) in self.ids.iter().zip(&self.assignment) {
            writeln!(w, "{id}\t{c}")?;
        }
        Ok(())
    }

    pub fn write_to(&self, w: impl Write) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        let p = &self.params;
        for v in [
            p.initial_k as u64,
            p.max_iterations as u64,
            p.size_cap as u64,
            p.max_samples_per_topic as u64,
            p.seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&p.min_error.to_le_bytes())?;
        w.write_all(&p.topic_confidence.to_le_bytes())?;
        w.write_all(&(self.iterations as u64).to_le_bytes())?;
        w.write_all(&[u8::from(self.converged)])?;
        w.write_all(&self.similarity_computations.to_le_bytes())?;
        w.write_all(&(self.objective_history.len() as u64).to_le_bytes())?;
        for x in &self.objective_history {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(self.centroids.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.centroids.rows() as u64).to_le_bytes())?;
        for x in self.centroids.as_flat() {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        for (id, c) in self.ids.iter().zip(&self.assignment) {
            write_string(&mut w, id.as_str())?;
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from(r: impl Read) -> io::Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(invalid("not a cluster model"));
        }
        let version = read_u32(&mut r)?;
        if version != MODEL_VERSION {
            return Err(invalid(format!("unsupported cluster model version {version}")));
        }
        let initial_k = read_u64(&mut r)? as usize;
        let max_iterations = read_u64(&mut r)? as usize;
        let size_cap = read_u64(&mut r)? as usize;
        let max_samples_per_topic = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let min_error = read_f64(&mut r)?;
        let topic_confidence = read_f64(&mut r)?;
        let params = ClusterParams {
            initial_k,
            max_iterations,
            min_error,
            size_cap,
            max_samples_per_topic,
            topic_confidence,
            seed,
        };
        let iterations = read_u64(&mut r)? as usize;
        let mut flag = [0u8];
        r.read_exact(&mut flag)?;
        let sims = read_u64(&mut r)?;
        let hist_len = read_u64(&mut r)? as usize;
        let history = (0..hist_len).map(|_| read_f64(&mut r)).collect::<io::Result<_>>()?;
        let dim = read_u32(&mut r)? as usize;
        let k = read_u64(&mut r)? as usize;
        if dim == 0 || k == 0 {
            return Err(invalid("cluster model has no centroids"));
        }
        let flat = (0..dim * k).map(|_| read_f64(&mut r)).collect::<io::Result<Vec<_>>>()?;
        let n = read_u64(&mut r)? as usize;
        let mut ids = Vec::with_capacity(n);
        let mut assignment = Vec::with_capacity(n);
        for _ in 0..n {
            ids.push(PaperId::new(read_string(&mut r)?).map_err(|e| invalid(e.to_string()))?);
            let c = read_u32(&mut r)?;
            if c as usize >= k {
                return Err(invalid("assignment refers to a missing cluster"));
            }
            assignment.push(c);
        }
        Ok(Self::assemble(
            params,
            Matrix::from_flat(dim, flat),
            ids,
            assignment,
            iterations,
            flag[0] != 0,
            history,
            sims,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Which clusters are small enough for content-based search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPartition {
    searchable: Vec<bool>,
    capped_rows: Vec<usize>,
}

pub fn partition_for_search(model: &ClusterModel, params: &ClusterParams) -> SearchPartition {
    let searchable: Vec<bool> = model
        .members
        .iter()
        .map(|m| m.len() <= params.size_cap)
        .collect();
    let mut capped_rows: Vec<usize> = model
        .members
        .iter()
        .zip(&searchable)
        .filter(|(_, s)| !**s)
        .flat_map(|(m, _)| m.iter().copied())
        .collect();
    capped_rows.sort_unstable();
    SearchPartition {
        searchable,
        capped_rows,
    }
}

impl SearchPartition {
    pub fn is_searchable(&self, cluster: usize) -> bool {
        self.searchable[cluster]
    }

    pub fn searchable_count(&self) -> usize {
        self.searchable.iter().filter(|s| **s).count()
    }

    /// Store rows of papers in capped clusters, ascending.
    pub fn capped_rows(&self) -> &[usize] {
        &self.capped_rows
    }

    pub fn capped_count(&self) -> usize {
        self.capped_rows.len()
    }

    pub fn max_searchable_size(&self, model: &ClusterModel) -> usize {
        (0..model.cluster_count())
            .filter(|&c| self.searchable[c])
            .map(|c| model.members(c).len())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PaperRecord, Topic};
    use crate::embedding::PaperEmbedding;
    use crate::vector::norm;

    fn pid(i: usize) -> PaperId {
        PaperId::new(format!("p{i:05}")).unwrap()
    }

    fn store(vectors: Vec<Vec<f64>>) -> EmbeddingStore {
        EmbeddingStore::from_embeddings(
            vectors
                .into_iter()
                .enumerate()
                .map(|(i, mut v)| {
                    normalize(&mut v);
                    PaperEmbedding { paper: pid(i), vector: v }
                })
                .collect(),
        )
    }

    fn unit(dim: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn identical_points_single_cluster() {
        let s = store(vec![vec![1.0, 2.0, 2.0]; 20]);
        let init = Matrix::from_flat(3, s.vector(0).to_vec());
        let m = spherical_kmeans(&s, init, &ClusterParams::default()).unwrap();
        assert_eq!(m.iterations(), 1);
        assert!(m.converged());
        assert!((m.objective() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_orthogonal_groups() {
        let mut v = vec![unit(4, 0); 10];
        v.extend(vec![unit(4, 1); 10]);
        let s = store(v);
        let init = Matrix::from_flat(4, vec![0.9, 0.1, 0.1, 0.0, 0.2, 0.8, 0.0, 0.1]);
        let m = spherical_kmeans(&s, init, &ClusterParams::default()).unwrap();
        assert_eq!(m.cluster_count(), 2);
        assert!(m.assignment()[..10].iter().all(|&a| a == 0));
        assert!(m.assignment()[10..].iter().all(|&a| a == 1));
        assert!((m.objective() - 1.0).abs() < 1e-12);
        assert!(m.iterations() <= 10);
    }

    #[test]
    fn empty_clusters_dropped() {
        let s = store(vec![unit(3, 0); 5]);
        // Second centroid loses every tie to the first and is never chosen.
        let init = Matrix::from_flat(3, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let m = spherical_kmeans(&s, init, &ClusterParams::default()).unwrap();
        assert_eq!(m.cluster_count(), 1);
        assert_eq!(m.sizes(), vec![5]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = store(vec![vec![1.0, 1.0]]);
        let init = Matrix::from_flat(2, vec![1.0, 0.0, 0.0, 1.0]);
        let (a, _) = assign(s.vectors(), &init);
        assert_eq!(a, vec![0]);
    }

    #[test]
    fn errors() {
        let s = store(vec![unit(3, 0)]);
        assert!(matches!(
            spherical_kmeans(&s, Matrix::from_flat(2, vec![1.0, 0.0]), &ClusterParams::default()),
            Err(ClusterError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            spherical_kmeans(&EmbeddingStore::default(), Matrix::from_flat(3, unit(3, 0)), &ClusterParams::default()),
            Err(ClusterError::NoEmbeddings)
        ));
        let bad = ClusterParams { min_error: 0.0, ..ClusterParams::default() };
        assert!(matches!(bad.validate(), Err(ClusterError::InvalidParams(_))));
    }

    fn topic(id: &str, confidence: f64, is_leaf: bool) -> Topic {
        Topic { topic_id: id.into(), confidence, is_leaf }
    }

    #[test]
    fn topic_seed_is_normalized_mean() {
        let vecs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let s = store(vecs.clone());
        let recs: Vec<PaperRecord> = (0..4)
            .map(|i| {
                let mut r = PaperRecord::new(pid(i), "t");
                r.topics = match i {
                    0..=2 => vec![topic("leaf", 0.9, true), topic("root", 0.99, false)],
                    _ => vec![topic("leaf", 0.5, true)],
                };
                r
            })
            .collect();
        let corpus = Corpus::from_records(recs).unwrap();
        let seeds = init_centroids(&corpus, &s, &ClusterParams::default()).unwrap();
        assert_eq!(seeds.topics, vec!["leaf".to_string()]);
        assert_eq!(seeds.sample_sizes, vec![3]);
        let x = 1.0 / 3f64.sqrt();
        for v in seeds.centroids.row(0) {
            assert!((v - x).abs() < 1e-12);
        }
    }

    #[test]
    fn topic_sampling_caps_members() {
        let n = 50;
        let s = store((0..n).map(|i| vec![1.0, i as f64 / n as f64]).collect());
        let recs: Vec<PaperRecord> = (0..n)
            .map(|i| {
                let mut r = PaperRecord::new(pid(i), "t");
                r.topics = vec![topic("big", 0.95, true)];
                r
            })
            .collect();
        let corpus = Corpus::from_records(recs).unwrap();
        let params = ClusterParams { max_samples_per_topic: 7, ..ClusterParams::default() };
        let a = init_centroids(&corpus, &s, &params).unwrap();
        assert_eq!(a.sample_sizes, vec![7]);
        assert_eq!(a, init_centroids(&corpus, &s, &params).unwrap());
    }

    #[test]
    fn no_topics_requests_fallback() {
        let s = store(vec![unit(2, 0), unit(2, 1)]);
        let corpus = Corpus::from_records(vec![PaperRecord::new(pid(0), "a"), PaperRecord::new(pid(1), "b")]).unwrap();
        let err = init_centroids(&corpus, &s, &ClusterParams::default()).unwrap_err();
        assert!(matches!(err, ClusterError::NoQualifyingTopics { .. }));
        assert!(err.to_string().contains("farthest-point"));
        let c = init_centroids_farthest_point(&s, 2, &ClusterParams::default()).unwrap();
        assert_eq!(c.rows(), 2);
        for row in c.iter() {
            assert!((norm(row) - 1.0).abs() < 1e-12);
        }
        // Only two distinct directions exist.
        assert_eq!(init_centroids_farthest_point(&s, 5, &ClusterParams::default()).unwrap().rows(), 2);
    }

    #[test]
    fn partition_threshold() {
        let mut v = vec![unit(2, 0); 10];
        v.extend(vec![unit(2, 1); 50]);
        let s = store(v);
        let m = spherical_kmeans(&s, Matrix::from_flat(2, vec![1.0, 0.0, 0.0, 1.0]), &ClusterParams::default()).unwrap();
        let p = partition_for_search(&m, &ClusterParams { size_cap: 35, ..ClusterParams::default() });
        assert!(p.is_searchable(0));
        assert!(!p.is_searchable(1));
        assert_eq!(p.capped_count(), 50);
        assert_eq!(p.max_searchable_size(&m), 10);
        let all = partition_for_search(&m, &ClusterParams::default());
        assert_eq!(all.capped_count(), 0);
    }

    #[test]
    fn model_cache_round_trip() {
        let s = store((0..30).map(|i| vec![(i % 3) as f64, 1.0, (i % 5) as f64]).collect());
        let init = init_centroids_farthest_point(&s, 3, &ClusterParams::default()).unwrap();
        let m = spherical_kmeans(&s, init, &ClusterParams::default()).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(ClusterModel::read_from(buf.as_slice()).unwrap(), m);
        let mut tsv = Vec::new();
        m.write_assignments_tsv(&mut tsv).unwrap();
        assert_eq!(String::from_utf8(tsv).unwrap().lines().count(), 30);
    }
}
