//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! criterion fails.

use std::any::Any;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use paperrec::clustering::{
    init_centroids, init_centroids_farthest_point, partition_for_search, spherical_kmeans,
};
use paperrec::cocitation::CoCitationCounter;
use paperrec::embedding::{
    embed_corpus, embed_paper, fit_tfidf, train_word_embeddings, PaperEmbedding, TermStats,
};
use paperrec::eval::{evaluate, read_survey, Aggregation, ColumnMap};
use paperrec::recommend::{map_cc_score, recommend_corpus};
use paperrec::synth::{generate_corpus, paper_id, planted_vectors, SynthConfig};
use paperrec::vector::{dot, norm, Matrix};
use paperrec::{
    CitationIndex, ClusterModel, ClusterParams, ContentIndex, Corpus, EmbeddingStore, MergeParams,
    PaperId, PaperRecord, TfIdfModel, TrainingParams, WordEmbeddings,
};
use paperrec_cli::{run_stage, Artifact, PipelineConfig, Stage, WordSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_graph(n: usize, p: f64, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |i: usize| PaperId::new(format!("g{i:03}")).unwrap();
    let records = (0..n)
        .map(|i| {
            let mut r = PaperRecord::new(id(i), "untitled");
            r.references = (0..n)
                .filter(|&j| j != i && rng.random::<f64>() < p)
                .map(id)
                .collect();
            r
        })
        .collect();
    Corpus::from_records(records).unwrap()
}

fn graphs() -> Vec<Corpus> {
    (0..50u64)
        .map(|s| random_graph(50 + (s as usize * 37) % 251, 0.05, s))
        .collect()
}

/// Dense `cc[i][j]` from an adjacency matrix built straight from the records.
fn brute_force_matrix(corpus: &Corpus) -> Vec<Vec<u32>> {
    let n = corpus.len();
    let mut cites = vec![vec![false; n]; n];
    for (k, r) in corpus.records().iter().enumerate() {
        for id in &r.references {
            if let Some(j) = corpus.position(id) {
                cites[k][j] = true;
            }
        }
    }
    let mut cc = vec![vec![0u32; n]; n];
    for row in &cites {
        for i in 0..n {
            if !row[i] {
                continue;
            }
            for j in 0..n {
                if j != i && row[j] {
                    cc[i][j] += 1;
                }
            }
        }
    }
    cc
}

fn sparse_matrix(corpus: &Corpus) -> Vec<Vec<u32>> {
    let index = CitationIndex::build(corpus);
    let mut counter = CoCitationCounter::new(index.len());
    (0..index.len())
        .map(|i| {
            let mut row = vec![0u32; index.len()];
            for (j, c) in counter.counts_at(&index, i) {
                row[j] = c;
            }
            row
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0usize;
    for (g, corpus) in graphs().iter().enumerate() {
        let want = brute_force_matrix(corpus);
        let got = sparse_matrix(corpus);
        for i in 0..corpus.len() {
            for j in 0..corpus.len() {
                ensure(got[i][j] == want[i][j], || {
                    format!("graph {g} pair ({i},{j}): sparse {} brute force {}", got[i][j], want[i][j])
                })?;
                pairs += 1;
            }
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:.2?}, limit 10s"))?;
    Ok(format!("50 graphs, {pairs} ordered pairs equal, {t:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut checked = 0usize;
    for (g, corpus) in graphs().iter().enumerate() {
        let cc = sparse_matrix(corpus);
        for (i, row) in cc.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                ensure(c == cc[j][i], || format!("graph {g}: cc({i},{j}) != cc({j},{i})"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} ordered pairs symmetric"))
}

fn criterion_3() -> Outcome {
    let p = MergeParams::default();
    ensure(map_cc_score(5, &p) == 0.5, || format!("sigma(5) = {}", map_cc_score(5, &p)))?;
    let direct = 1.0 / (1.0 + 2f64.exp());
    let s0 = map_cc_score(0, &p);
    ensure((s0 - direct).abs() <= 1e-9, || format!("sigma(0) = {s0}, direct {direct}"))?;
    for cc in 0..100u32 {
        let (a, b) = (map_cc_score(cc, &p), map_cc_score(cc + 1, &p));
        ensure(a < b, || {
            format!("not strictly increasing at cc={cc}->{}: {a:e} vs {b:e} (f64 saturation)", cc + 1)
        })?;
    }
    Ok("sigma(5)=0.5, sigma(0) matches, strictly increasing over 0..=100".into())
}

fn criterion_4() -> Outcome {
    let cfg = SynthConfig {
        papers: 2000,
        ..SynthConfig::default()
    };
    let corpus = Corpus::from_records(generate_corpus(&cfg)).unwrap();
    let params = TrainingParams {
        embedding_size: 64,
        ..TrainingParams::default()
    };
    let words = train_word_embeddings(&corpus, &params).map_err(|e| e.to_string())?;
    let tfidf = fit_tfidf(&corpus, params.min_count).map_err(|e| e.to_string())?;
    let store = embed_corpus(&corpus, &words, &tfidf).store;
    let mut worst = 0f64;
    for row in 0..store.len() {
        let err = (norm(store.vector(row)) - 1.0).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("paper {} has norm error {err:e}", store.id(row)))?;
    }

    let mut basis = WordEmbeddings::new(2);
    basis.insert("alpha", vec![1.0, 0.0]).unwrap();
    basis.insert("beta", vec![0.0, 1.0]).unwrap();
    let stats = ["alpha", "beta"]
        .iter()
        .map(|t| TermStats {
            term: t.to_string(),
            document_frequency: 3,
            corpus_frequency: 3,
        })
        .collect();
    let equal_idf = TfIdfModel::from_stats(10, stats);
    let mut rec = PaperRecord::new(PaperId::new("hand").unwrap(), "alpha");
    rec.abstract_text = Some("beta".into());
    let e = embed_paper(&rec, &basis, &equal_idf).map_err(|e| e.to_string())?;
    let want = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
    for (x, y) in e.vector.iter().zip(want) {
        ensure((x - y).abs() <= 1e-9, || format!("hand case {:?} vs {want:?}", e.vector))?;
    }
    Ok(format!(
        "{} embeddings, max norm error {worst:.1e}; hand case matches",
        store.len()
    ))
}

fn store_of(vectors: Vec<Vec<f64>>) -> EmbeddingStore {
    EmbeddingStore::from_embeddings(
        vectors
            .into_iter()
            .enumerate()
            .map(|(i, vector)| PaperEmbedding {
                paper: paper_id(i),
                vector,
            })
            .collect(),
    )
}

fn check_argmax(model: &ClusterModel, store: &EmbeddingStore) -> Result<(), String> {
    let c = model.centroids();
    for row in 0..store.len() {
        let v = store.vector(row);
        let best = (0..c.rows()).fold(0, |b, j| if dot(v, c.row(j)) > dot(v, c.row(b)) { j } else { b });
        ensure(model.cluster_of_row(row) == best, || {
            format!("row {row} assigned {} but argmax is {best}", model.cluster_of_row(row))
        })?;
    }
    Ok(())
}

fn criterion_5() -> Outcome {
    for seed in 0..20u64 {
        let (vectors, _) = planted_vectors(2000, 32, 20, 0.4, seed);
        let store = store_of(vectors);
        let params = ClusterParams {
            seed,
            ..ClusterParams::default()
        };
        let init = init_centroids_farthest_point(&store, 20, &params).map_err(|e| e.to_string())?;
        let model = spherical_kmeans(&store, init, &params).map_err(|e| e.to_string())?;
        let h = model.objective_history();
        ensure(h.windows(2).all(|w| w[1] >= w[0]), || format!("seed {seed}: objective fell {h:?}"))?;
        check_argmax(&model, &store).map_err(|e| format!("seed {seed}: {e}"))?;
    }

    // Two orthogonal groups, started from mixed centroids.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vectors: Vec<Vec<f64>> = (0..400)
        .map(|i| {
            let mut v = vec![0.0; 4];
            let base = if i % 2 == 0 { 0 } else { 2 };
            v[base] = 1.0;
            v[base + 1] = 0.2 * rng.random::<f64>();
            let n = norm(&v);
            v.iter().map(|x| x / n).collect()
        })
        .collect();
    let store = store_of(vectors);
    let s = 0.5f64.sqrt();
    let init = Matrix::from_flat(4, vec![s, 0.0, s, 0.0, s, 0.1, -s, 0.0]);
    let params = ClusterParams::default();
    let model = spherical_kmeans(&store, init, &params).map_err(|e| e.to_string())?;
    ensure(model.converged() && model.iterations() <= 10, || {
        format!("orthogonal fixture: converged={} after {}", model.converged(), model.iterations())
    })?;
    ensure(model.sizes() == vec![200, 200], || format!("orthogonal fixture sizes {:?}", model.sizes()))?;
    Ok(format!(
        "20 runs monotone and argmax; orthogonal fixture converged in {} iterations",
        model.iterations()
    ))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let corpus = Corpus::from_records(generate_corpus(&SynthConfig {
        papers: 5000,
        ..SynthConfig::default()
    }))
    .unwrap();
    let training = TrainingParams {
        embedding_size: 64,
        ..TrainingParams::default()
    };
    let words = train_word_embeddings(&corpus, &training).map_err(|e| e.to_string())?;
    let tfidf = fit_tfidf(&corpus, training.min_count).map_err(|e| e.to_string())?;
    let store = embed_corpus(&corpus, &words, &tfidf).store;
    let params = ClusterParams::default();
    let seeds = init_centroids(&corpus, &store, &params).map_err(|e| e.to_string())?;
    let model = spherical_kmeans(&store, seeds.centroids, &params).map_err(|e| e.to_string())?;
    let partition = partition_for_search(&model, &params);
    let content = ContentIndex::new(&store, &model, &partition).map_err(|e| e.to_string())?;
    let k = MergeParams::default().top_k;

    for row in 0..store.len() {
        let got = content.cb_neighbors(store.id(row), k).map_err(|e| e.to_string())?;
        let cluster = model.cluster_of_row(row);
        let mut want: Vec<(PaperId, f64)> = (0..store.len())
            .filter(|&r| r != row && model.cluster_of_row(r) == cluster)
            .map(|r| (store.id(r).clone(), dot(store.vector(row), store.vector(r))))
            .collect();
        want.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        want.truncate(k);
        ensure(got == want, || format!("paper {} differs from brute force", store.id(row)))?;
    }
    let searched = content.similarity_computations();

    let index = CitationIndex::build(&corpus);
    let fresh = ContentIndex::new(&store, &model, &partition).map_err(|e| e.to_string())?;
    let run = recommend_corpus(&index, Some(&fresh), &MergeParams::default()).map_err(|e| e.to_string())?;
    let n = store.len() as u64;
    let bound = n * (model.cluster_count() as u64 + partition.max_searchable_size(&model) as u64);
    let used = run.stats.similarity_computations;
    ensure(used <= bound && searched <= bound, || format!("{used} computations > bound {bound}"))?;
    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), || format!("took {t:.2?}, limit 60s"))?;
    Ok(format!(
        "{} papers exact; {used} computations <= {bound} (k'={}, max cluster {}); {t:.2?}",
        store.len(),
        model.cluster_count(),
        partition.max_searchable_size(&model)
    ))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn criterion_7() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/survey_small.csv");
    let pairs = read_survey(std::fs::File::open(&path).map_err(|e| e.to_string())?, &ColumnMap::default())
        .map_err(|e| e.to_string())?;
    let r = evaluate(&pairs, 10, Aggregation::Macro).map_err(|e| e.to_string())?;
    let checks = [
        ("ccb P@10-3", r.ccb.precision_3, 5.0 / 9.0),
        ("ccb P@10-4", r.ccb.precision_4, 5.0 / 18.0),
        ("cb P@10-3", r.cb.precision_3, 2.0 / 3.0),
        ("cb P@10-4", r.cb.precision_4, 0.5),
        ("combined P@10-3", r.combined.precision_3, 37.0 / 60.0),
        ("combined P@10-4", r.combined.precision_4, 7.0 / 15.0),
        ("ccb nDCG", r.ccb.ndcg, 0.8344765803606443),
        ("cb nDCG", r.cb.ndcg, 0.8581505674331285),
        ("combined nDCG", r.combined.ndcg, 0.7728535545079976),
    ];
    for (name, got, want) in checks {
        ensure(close(got, want), || format!("{name}: {got} vs hand value {want}"))?;
    }
    let two = paperrec::eval::ndcg(&[1, 5]).unwrap_or(f64::NAN);
    ensure(close(two, 0.6499594707105908), || format!("nDCG [1,5] = {two}"))?;
    Ok("survey dataset not available offline; hand-computed P@10 and nDCG fixtures match".into())
}

fn pipeline(work: &Path, input: &Path, source: WordSource) -> Result<Vec<u8>, String> {
    let cfg = PipelineConfig::in_dir(work.to_path_buf(), 1);
    let stages = [
        Stage::Ingest {
            corpus: input.to_path_buf(),
        },
        Stage::Cocite { top_k: None },
        Stage::Embed { source },
        Stage::Cluster { k: None, cap: None },
        Stage::Recommend {
            theta: None,
            tau: None,
            top_k: None,
        },
    ];
    for s in &stages {
        run_stage(s, &cfg, &mut std::io::sink()).map_err(|e| format!("{s:?}: {e}"))?;
    }
    std::fs::read(cfg.path(Artifact::Recommendations)).map_err(|e| e.to_string())
}

fn write_synthetic(path: &Path, papers: usize) -> Result<(), String> {
    let corpus = Corpus::from_records(generate_corpus(&SynthConfig {
        papers,
        ..SynthConfig::default()
    }))
    .map_err(|e| e.to_string())?;
    corpus
        .write_jsonl(std::fs::File::create(path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("corpus.jsonl");
    write_synthetic(&input, 10_000)?;
    let mut times = Vec::new();
    let mut outputs = Vec::new();
    for run in ["run1", "run2"] {
        let start = Instant::now();
        outputs.push(pipeline(&dir.path().join(run), &input, WordSource::Train)?);
        let t = start.elapsed();
        ensure(t < Duration::from_secs(300), || format!("{run} took {t:.2?}, limit 5 min"))?;
        times.push(t);
    }
    ensure(!outputs[0].is_empty() && outputs[0] == outputs[1], || {
        "recommendation TSVs differ between runs".into()
    })?;

    // Grow the corpus by 100 papers and refresh the downstream stages in run1.
    let grown = dir.path().join("corpus_grown.jsonl");
    write_synthetic(&grown, 10_100)?;
    let work = dir.path().join("run1");
    let cfg = PipelineConfig::in_dir(work.clone(), 1);
    let refresh = [
        Stage::Ingest { corpus: grown },
        Stage::Embed {
            source: WordSource::Train,
        },
        Stage::Cluster { k: None, cap: None },
        Stage::Recommend {
            theta: None,
            tau: None,
            top_k: None,
        },
    ];
    for s in &refresh {
        run_stage(s, &cfg, &mut std::io::sink()).map_err(|e| format!("refresh {s:?}: {e}"))?;
    }
    let tsv = std::fs::read_to_string(cfg.path(Artifact::Recommendations)).map_err(|e| e.to_string())?;
    let sources: std::collections::HashSet<&str> =
        tsv.lines().filter_map(|l| l.split('\t').next()).collect();
    let missing: Vec<String> = (10_000..10_100)
        .map(|i| paper_id(i).to_string())
        .filter(|id| !sources.contains(id.as_str()))
        .collect();
    ensure(missing.is_empty(), || format!("new papers without recommendations: {missing:?}"))?;
    Ok(format!(
        "runs {:.1?} and {:.1?}, TSVs identical ({} bytes); 100 new papers present after refresh",
        times[0],
        times[1],
        outputs[0].len()
    ))
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    let msg = p
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default();
    format!("panicked: {msg}")
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 co-citation equals brute force", criterion_1),
        ("2 co-citation symmetry", criterion_2),
        ("3 logistic map", criterion_3),
        ("4 embedding normalization", criterion_4),
        ("5 spherical k-means", criterion_5),
        ("6 clustered search exactness", criterion_6),
        ("7 evaluation metrics", criterion_7),
        ("8 end-to-end determinism and freshness", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| Err(panic_message(p)));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
