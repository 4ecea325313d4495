//! One function per pipeline stage. Every artifact is written to a temporary file in the
//! target directory and renamed into place.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use paperrec::clustering::{
    init_centroids, init_centroids_farthest_point, partition_for_search, spherical_kmeans,
    ClusterError,
};
use paperrec::cocitation::{self, CoCitationCounter, CoCitationList};
use paperrec::corpus::{corpus_stats, parse_corpus, CorpusError};
use paperrec::embedding::{
    embed_corpus, fit_tfidf, load_word_embeddings, train_word_embeddings_with_report,
    EmbeddingError,
};
use paperrec::eval::{evaluate, read_survey, Aggregation, ColumnMap, EvalError};
use paperrec::recommend::{recommend_corpus, recommend_text, RecommendError};
use paperrec::{
    CitationIndex, ClusterModel, ContentIndex, Corpus, EmbeddingStore, TfIdfModel, WordEmbeddings,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Artifact, ConfigError, PipelineConfig};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("missing {artifact} artifact at {}: run {} first", path.display(), artifact.producer())]
    MissingArtifact { artifact: Artifact, path: PathBuf },
    #[error("{what} does not match the current embeddings: run {stage} first")]
    Stale { what: &'static str, stage: &'static str },
    #[error("input file {} does not exist", .0.display())]
    MissingInput(PathBuf),
    #[error("cannot {action} {}: {source}", path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Where `embed` gets its word vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum WordSource {
    Train,
    Load(PathBuf),
}

/// A stage invocation with its command-line parameters. `None` keeps the config value.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Ingest {
        corpus: PathBuf,
    },
    Cocite {
        top_k: Option<usize>,
    },
    Embed {
        source: WordSource,
    },
    Cluster {
        k: Option<usize>,
        cap: Option<usize>,
    },
    Recommend {
        theta: Option<f64>,
        tau: Option<f64>,
        top_k: Option<usize>,
    },
    Query {
        text: String,
        k: usize,
    },
    Eval {
        survey: PathBuf,
        columns: Option<String>,
        aggregation: Option<Aggregation>,
        k: Option<usize>,
    },
    Stats,
}

impl Stage {
    /// Folds the stage's flags into a copy of `config`.
    fn configure(&self, config: &PipelineConfig) -> PipelineConfig {
        let mut cfg = config.clone();
        match self {
            Stage::Cocite { top_k: Some(k) } => cfg.cocite_top_k = *k,
            Stage::Cluster { k, cap } => {
                if let Some(k) = k {
                    cfg.cluster.initial_k = *k;
                }
                if let Some(cap) = cap {
                    cfg.cluster.size_cap = *cap;
                }
            }
            Stage::Recommend { theta, tau, top_k } => {
                if let Some(t) = theta {
                    cfg.merge.theta = *t;
                }
                if let Some(t) = tau {
                    cfg.merge.tau = *t;
                }
                if let Some(k) = top_k {
                    cfg.merge.top_k = *k;
                }
            }
            Stage::Eval { aggregation, k, .. } => {
                if let Some(a) = aggregation {
                    cfg.aggregation = *a;
                }
                if let Some(k) = k {
                    cfg.eval_k = *k;
                }
            }
            _ => {}
        }
        cfg
    }
}

/// Runs one stage. Human-readable results (query hits, reports) go to `out`.
pub fn run_stage(stage: &Stage, config: &PipelineConfig, out: &mut (dyn Write + Send)) -> Result<(), StageError> {
    let cfg = stage.configure(config);
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| StageError::Invalid(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| match stage {
        Stage::Ingest { corpus } => ingest(&cfg, corpus),
        Stage::Cocite { .. } => cocite(&cfg),
        Stage::Embed { source } => embed(&cfg, source),
        Stage::Cluster { .. } => cluster(&cfg),
        Stage::Recommend { .. } => recommend(&cfg),
        Stage::Query { text, k } => query(&cfg, text, *k, out),
        Stage::Eval { survey, columns, .. } => eval(&cfg, survey, columns.as_deref(), out),
        Stage::Stats => stats(&cfg, out),
    })
}

fn require(cfg: &PipelineConfig, artifact: Artifact) -> Result<PathBuf, StageError> {
    let path = cfg.path(artifact);
    if path.is_file() {
        Ok(path)
    } else {
        Err(StageError::MissingArtifact { artifact, path })
    }
}

fn io_err<'a>(action: &'static str, path: &'a Path) -> impl FnOnce(io::Error) -> StageError + 'a {
    move |source| StageError::Io {
        action,
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, StageError> {
    File::open(path).map(BufReader::new).map_err(io_err("open", path))
}

/// Writes `path` through a temporary sibling that is renamed into place on success.
pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<&mut File>) -> io::Result<()>,
) -> Result<(), StageError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err("create directory", dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err("create temporary file in", dir))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(io_err("write", path))?;
        w.flush().map_err(io_err("write", path))?;
    }
    tmp.as_file().sync_all().map_err(io_err("sync", path))?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .map_err(io_err("rename into", path))?;
    Ok(())
}

fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus, StageError> {
    Ok(parse_corpus(require(cfg, Artifact::Corpus)?)?)
}

fn load_embeddings(cfg: &PipelineConfig) -> Result<EmbeddingStore, StageError> {
    let path = require(cfg, Artifact::Embeddings)?;
    EmbeddingStore::load(&path).map_err(io_err("read", &path))
}

fn load_model(cfg: &PipelineConfig, store: &EmbeddingStore) -> Result<ClusterModel, StageError> {
    let path = require(cfg, Artifact::Clusters)?;
    let model = ClusterModel::load(&path).map_err(io_err("read", &path))?;
    if !model.matches(store) {
        return Err(StageError::Stale {
            what: "cluster model",
            stage: "cluster",
        });
    }
    Ok(model)
}

fn ingest(cfg: &PipelineConfig, input: &Path) -> Result<(), StageError> {
    if !input.is_file() {
        return Err(StageError::MissingInput(input.to_path_buf()));
    }
    let corpus = parse_corpus(input)?;
    let index = CitationIndex::build(&corpus);
    let out = cfg.path(Artifact::Corpus);
    write_atomic(&out, |w| corpus.write_jsonl(w))?;
    info!(
        "ingest: papers={} citation_edges={} dangling_references={} -> {}",
        corpus.len(),
        index.edge_count(),
        index.dangling_count(),
        out.display()
    );
    Ok(())
}

/// Co-citation lists of every paper in index order, computed on the current pool.
fn all_cocitations(index: &CitationIndex) -> Vec<CoCitationList> {
    (0..index.len())
        .into_par_iter()
        .map_init(
            || CoCitationCounter::new(index.len()),
            |counter, pos| CoCitationList {
                source: index.id(pos).clone(),
                entries: counter
                    .counts_at(index, pos)
                    .into_iter()
                    .map(|(p, c)| (index.id(p).clone(), c))
                    .collect(),
            },
        )
        .collect()
}

fn cocite(cfg: &PipelineConfig) -> Result<(), StageError> {
    let corpus = load_corpus(cfg)?;
    let index = CitationIndex::build(&corpus);
    let lists = all_cocitations(&index)
        .iter()
        .map(|l| cocitation::top_cocited(l, cfg.cocite_top_k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| StageError::Invalid(e.to_string()))?;
    let covered = lists.iter().filter(|l| !l.is_empty()).count();
    let out = cfg.path(Artifact::Cocitations);
    write_atomic(&out, |w| cocitation::write_tsv(w, &lists))?;
    info!(
        "cocite: papers={} with_cocitations={} coverage={:.4} -> {}",
        lists.len(),
        covered,
        fraction(covered, lists.len()),
        out.display()
    );
    Ok(())
}

fn fraction(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

fn embed(cfg: &PipelineConfig, source: &WordSource) -> Result<(), StageError> {
    let corpus = load_corpus(cfg)?;
    let words_path = cfg.path(Artifact::WordVectors);
    let words = match source {
        WordSource::Train => {
            let (words, report) = train_word_embeddings_with_report(&corpus, &cfg.training)?;
            info!(
                "embed: trained vocabulary={} dim={} tokens={} epoch_losses={:?}",
                report.vocabulary_size,
                words.dim(),
                report.trained_tokens,
                report.epoch_losses
            );
            write_atomic(&words_path, |w| words.write_text(w))?;
            words
        }
        WordSource::Load(path) => {
            if !path.is_file() {
                return Err(StageError::MissingInput(path.clone()));
            }
            let words = load_word_embeddings(path)?;
            info!("embed: loaded {} word vectors of dim {}", words.len(), words.dim());
            if path != &words_path {
                write_atomic(&words_path, |w| words.write_text(w))?;
            }
            words
        }
    };
    let tfidf = fit_tfidf(&corpus, cfg.training.min_count)?;
    let embedded = embed_corpus(&corpus, &words, &tfidf);
    let tfidf_path = cfg.path(Artifact::TfIdf);
    write_atomic(&tfidf_path, |w| tfidf.write_to(w))?;
    let out = cfg.path(Artifact::Embeddings);
    write_atomic(&out, |w| embedded.store.write_to(w))?;
    info!(
        "embed: papers={} embedded={} unembeddable={} vocabulary={} -> {}",
        corpus.len(),
        embedded.store.len(),
        embedded.unembeddable.len(),
        tfidf.vocabulary().len(),
        out.display()
    );
    Ok(())
}

fn cluster(cfg: &PipelineConfig) -> Result<(), StageError> {
    let corpus = load_corpus(cfg)?;
    let store = load_embeddings(cfg)?;
    let params = &cfg.cluster;
    let initial = match init_centroids(&corpus, &store, params) {
        Ok(seeds) => {
            info!("cluster: seeded {} centroids from leaf topics", seeds.topics.len());
            seeds.centroids
        }
        Err(ClusterError::NoQualifyingTopics { threshold }) => {
            let k = params.initial_k.min(store.len());
            warn!("cluster: no leaf topic at confidence >= {threshold}; farthest-point seeding with k={k}");
            init_centroids_farthest_point(&store, k, params)?
        }
        Err(e) => return Err(e.into()),
    };
    let model = spherical_kmeans(&store, initial, params)?;
    let partition = partition_for_search(&model, params);
    let out = cfg.path(Artifact::Clusters);
    write_atomic(&out, |w| model.write_to(w))?;
    info!(
        "cluster: papers={} clusters={} iterations={} converged={} objective={:.6} \
         mean_size={:.1} max_size={} capped_clusters={} capped_papers={} similarity_computations={} -> {}",
        store.len(),
        model.cluster_count(),
        model.iterations(),
        model.converged(),
        model.objective(),
        model.mean_cluster_size(),
        model.max_cluster_size(),
        model.cluster_count() - partition.searchable_count(),
        partition.capped_count(),
        model.similarity_computations(),
        out.display()
    );
    Ok(())
}

fn recommend(cfg: &PipelineConfig) -> Result<(), StageError> {
    let corpus = load_corpus(cfg)?;
    let store = load_embeddings(cfg)?;
    let model = load_model(cfg, &store)?;
    let partition = partition_for_search(&model, model.params());
    let index = CitationIndex::build(&corpus);
    let content = ContentIndex::new(&store, &model, &partition)?;
    let run = recommend_corpus(&index, Some(&content), &cfg.merge)?;
    let out = cfg.path(Artifact::Recommendations);
    write_atomic(&out, |w| run.write_tsv(w))?;
    let s = &run.stats;
    let bound = store.len() as u64
        * (model.cluster_count() as u64 + partition.max_searchable_size(&model) as u64);
    info!(
        "recommend: papers={} covered={} coverage={:.4} with_content={} ccb_only={} \
         similarity_computations={} bound={} -> {}",
        s.papers,
        s.covered,
        fraction(s.covered, s.papers),
        s.with_content,
        s.ccb_only,
        s.similarity_computations,
        bound,
        out.display()
    );
    if s.similarity_computations > bound {
        warn!("recommend: similarity computations exceed n * (clusters + max searchable size)");
    }
    Ok(())
}

fn query(cfg: &PipelineConfig, text: &str, k: usize, out: &mut (dyn Write + Send)) -> Result<(), StageError> {
    if k == 0 {
        return Err(StageError::Invalid("k must be >= 1".into()));
    }
    let words_path = require(cfg, Artifact::WordVectors)?;
    let words: WordEmbeddings = load_word_embeddings(&words_path)?;
    let tfidf_path = require(cfg, Artifact::TfIdf)?;
    let tfidf = TfIdfModel::read_from(open(&tfidf_path)?).map_err(io_err("read", &tfidf_path))?;
    let store = load_embeddings(cfg)?;
    let model = load_model(cfg, &store)?;
    let partition = partition_for_search(&model, model.params());
    let content = ContentIndex::new(&store, &model, &partition)?;
    let hits = recommend_text(text, &words, &tfidf, &content, k)?;
    let write = |out: &mut (dyn Write + Send)| -> io::Result<()> {
        for (id, score) in &hits {
            writeln!(out, "{id}\t{score:.6}")?;
        }
        Ok(())
    };
    write(out).map_err(io_err("write", Path::new("<stdout>")))?;
    info!(
        "query: hits={} similarity_computations={}",
        hits.len(),
        content.similarity_computations()
    );
    Ok(())
}

fn eval(cfg: &PipelineConfig, survey: &Path, columns: Option<&str>, out: &mut (dyn Write + Send)) -> Result<(), StageError> {
    if !survey.is_file() {
        return Err(StageError::MissingInput(survey.to_path_buf()));
    }
    let map = match columns {
        Some(spec) => ColumnMap::parse(spec).map_err(StageError::Invalid)?,
        None => ColumnMap::default(),
    };
    let pairs = read_survey(open(survey)?, &map)?;
    let report = evaluate(&pairs, cfg.eval_k, cfg.aggregation)?;
    write!(out, "{report}").map_err(io_err("write", Path::new("<stdout>")))?;
    let hist = cfg.path(Artifact::Histogram);
    write_atomic(&hist, |w| report.write_histogram_csv(w))?;
    info!("eval: pairs={} -> {}", pairs.len(), hist.display());
    Ok(())
}

fn stats(cfg: &PipelineConfig, out: &mut (dyn Write + Send)) -> Result<(), StageError> {
    let corpus = load_corpus(cfg)?;
    let index = CitationIndex::build(&corpus);
    let cocited = all_cocitations(&index).iter().filter(|l| !l.is_empty()).count();
    let report = corpus_stats(&corpus, &index).with_cocited_fraction(fraction(cocited, index.len()));
    write!(out, "{report}").map_err(io_err("write", Path::new("<stdout>")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, |w| w.write_all(b"first")).unwrap();
        let failed = write_atomic(&path, |w| {
            w.write_all(b"half")?;
            Err(io::Error::other("interrupted"))
        });
        assert!(failed.is_err());
        assert_eq!(std::fs::read(&path).unwrap(), b"first");
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn missing_upstream_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::in_dir(dir.path(), 1);
        let e = run_stage(&Stage::Cocite { top_k: None }, &cfg, &mut io::sink()).unwrap_err();
        assert!(e.to_string().contains("run ingest first"), "{e}");
        let e = run_stage(&Stage::Query { text: "x".into(), k: 3 }, &cfg, &mut io::sink()).unwrap_err();
        assert!(e.to_string().contains("run embed first"), "{e}");
    }
}
