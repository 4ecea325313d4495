use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paperrec::synth::{generate_corpus, SynthConfig};
use paperrec::Corpus;
use paperrec_cli::{run_stage, Artifact, PipelineConfig, Stage, WordSource};

fn paperrec(work: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paperrec"))
        .arg("--work-dir")
        .arg(work)
        .args(["--set", "embedding_size=24", "--set", "epochs=2", "--set", "min_count=2"])
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_corpus(dir: &Path, papers: usize) -> PathBuf {
    let corpus = Corpus::from_records(generate_corpus(&SynthConfig {
        papers,
        ..SynthConfig::default()
    }))
    .unwrap();
    let path = dir.join("input.jsonl");
    corpus.write_jsonl(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn config(work: &Path, workers: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::in_dir(work.to_path_buf(), workers);
    cfg.apply_text("embedding_size = 24\nepochs = 2\nmin_count = 2\n").unwrap();
    cfg
}

fn full_run(cfg: &PipelineConfig, input: &Path) -> Vec<u8> {
    let stages = [
        Stage::Ingest {
            corpus: input.to_path_buf(),
        },
        Stage::Cocite { top_k: None },
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
    for s in &stages {
        run_stage(s, cfg, &mut std::io::sink()).unwrap();
    }
    std::fs::read(cfg.path(Artifact::Recommendations)).unwrap()
}

#[test]
fn zero_top_k_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = paperrec(dir.path(), &["recommend", "--top-k", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("top_k must be >= 1"));
}

#[test]
fn cocite_before_ingest_names_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let out = paperrec(dir.path(), &["cocite"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("run ingest first"));
}

#[test]
fn missing_input_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = paperrec(dir.path(), &["ingest", "--corpus", "no/such/file.jsonl"]);
    assert!(!out.status.success());
}

#[test]
fn runs_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_corpus(dir.path(), 600);
    let a = full_run(&config(&dir.path().join("a"), 1), &input);
    let b = full_run(&config(&dir.path().join("b"), 1), &input);
    let c = full_run(&config(&dir.path().join("c"), 3), &input);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(a, c);
    for name in ["cocitations.tsv", "embeddings.bin", "clusters.bin", "words.txt"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(name)).unwrap(),
            std::fs::read(dir.path().join("c").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn binary_pipeline_query_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_corpus(dir.path(), 300);
    let work = dir.path().join("w");
    for args in [
        vec!["ingest", "--corpus", input.to_str().unwrap()],
        vec!["embed", "--train"],
        vec!["cluster"],
        vec!["recommend", "--theta", "0.5", "--tau", "3", "--top-k", "5"],
    ] {
        let out = paperrec(&work, &args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let recs = std::fs::read_to_string(work.join("recommendations.tsv")).unwrap();
    let mut per_source = std::collections::HashMap::new();
    for line in recs.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 4);
        *per_source.entry(cols[0].to_string()).or_insert(0) += 1;
    }
    assert!(per_source.values().all(|&n| n <= 5));

    let corpus = Corpus::from_reader(std::io::BufReader::new(std::fs::File::open(&input).unwrap())).unwrap();
    let first = &corpus.records()[0];
    let out = paperrec(&work, &["query", "--text", &first.title, "--k", "4"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 4);
    for line in stdout.lines() {
        let (_, score) = line.split_once('\t').unwrap();
        assert!(score.parse::<f64>().unwrap() <= 1.0);
    }

    let out = paperrec(&work, &["stats"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("papers=300"));
}

#[test]
fn eval_stage_reports_and_writes_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let survey = dir.path().join("survey.csv");
    std::fs::write(
        &survey,
        "Paper,Rec,Kind,Score,Grade\nA,x,cocit,0.9,5\nA,y,content,0.5,2\nB,z,content,0.4,4\n",
    )
    .unwrap();
    let map = "source_id=Paper,target_id=Rec,method=Kind,system_score=Score,user_grade=Grade,\
               method:cocit=ccb,method:content=cb";
    let out = paperrec(
        dir.path(),
        &["eval", "--survey", survey.to_str().unwrap(), "--map", map, "--aggregation", "micro"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("aggregation=micro"), "{report}");
    let hist = std::fs::read_to_string(dir.path().join("eval_histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 51);
}
