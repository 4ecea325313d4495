//! Seeded synthetic corpora with planted topic structure, for tests and benchmarks.
//!
//! Each paper draws one topic; its title, keywords and abstract mix that topic's words
//! with shared background words, and it cites earlier papers mostly from its own topic,
//! biased toward the oldest (most cited) ones. Paper `i` is generated from its own
//! sub-stream of the seed, so the first `n` papers of a larger corpus equal a corpus of
//! size `n` generated with the same config.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{PaperId, PaperRecord, Topic};
use crate::vector::normalize;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub papers: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub background_words: usize,
    pub title_words: (usize, usize),
    pub abstract_words: (usize, usize),
    /// Probability that a paper has an abstract.
    pub abstract_prob: f64,
    /// Share of title/abstract words drawn from the paper's topic.
    pub topic_word_share: f64,
    /// Probability that a paper has any references.
    pub reference_prob: f64,
    pub max_references: usize,
    /// Share of references drawn from the same topic.
    pub same_topic_citations: f64,
    /// Probability that a reference points outside the corpus.
    pub dangling_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            papers: 1000,
            topics: 20,
            words_per_topic: 30,
            background_words: 200,
            title_words: (5, 10),
            abstract_words: (20, 45),
            abstract_prob: 0.8,
            topic_word_share: 0.7,
            reference_prob: 0.6,
            max_references: 12,
            same_topic_citations: 0.85,
            dangling_prob: 0.03,
            seed: 7,
        }
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ter", "sen", "dor", "val", "qui", "ne", "ra", "zu", "pel", "tor", "gan",
    "bi", "mos", "fer", "lin", "cal", "dex", "or", "vy", "plu", "sto", "ram", "gen", "hal", "ix",
];

fn make_words(rng: &mut ChaCha8Rng, count: usize, seen: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let parts = rng.random_range(2..=4);
        let w: String = (0..parts)
            .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

pub fn paper_id(i: usize) -> PaperId {
    PaperId::new(format!("P{i:07}")).expect("generated ids are valid")
}

/// Topic of each paper in a corpus generated with `cfg`.
pub fn paper_topic(cfg: &SynthConfig, i: usize) -> usize {
    paper_rng(cfg, i).random_range(0..cfg.topics)
}

fn paper_rng(cfg: &SynthConfig, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64 + 1);
    rng
}

pub fn generate_corpus(cfg: &SynthConfig) -> Vec<PaperRecord> {
    assert!(cfg.topics > 0 && cfg.words_per_topic > 0 && cfg.background_words > 0);
    let mut vocab_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen = HashSet::new();
    let background = make_words(&mut vocab_rng, cfg.background_words, &mut seen);
    let topic_words: Vec<Vec<String>> = (0..cfg.topics)
        .map(|_| make_words(&mut vocab_rng, cfg.words_per_topic, &mut seen))
        .collect();

    let mut by_topic: Vec<Vec<usize>> = vec![Vec::new(); cfg.topics];
    let mut out = Vec::with_capacity(cfg.papers);
    for i in 0..cfg.papers {
        let mut rng = paper_rng(cfg, i);
        let topic = rng.random_range(0..cfg.topics);
        let words = &topic_words[topic];
        let pick = |rng: &mut ChaCha8Rng| -> String {
            if rng.random::<f64>() < cfg.topic_word_share {
                words[rng.random_range(0..words.len())].clone()
            } else {
                background[rng.random_range(0..background.len())].clone()
            }
        };
        let title_len = rng.random_range(cfg.title_words.0..=cfg.title_words.1);
        let title: Vec<String> = (0..title_len).map(|_| pick(&mut rng)).collect();
        let mut rec = PaperRecord::new(paper_id(i), title.join(" "));
        let keywords = rng.random_range(0..=3);
        rec.keywords = (0..keywords)
            .map(|_| words[rng.random_range(0..words.len())].clone())
            .collect();
        if rng.random::<f64>() < cfg.abstract_prob {
            let len = rng.random_range(cfg.abstract_words.0..=cfg.abstract_words.1);
            let body: Vec<String> = (0..len).map(|_| pick(&mut rng)).collect();
            rec.abstract_text = Some(format!("{}.", body.join(" ")));
        }
        rec.topics = vec![
            Topic {
                topic_id: format!("leaf{topic:04}"),
                confidence: 0.6 + 0.4 * rng.random::<f64>(),
                is_leaf: true,
            },
            Topic {
                topic_id: format!("field{:03}", topic / 5),
                confidence: 0.95,
                is_leaf: false,
            },
        ];
        if i > 0 && rng.random::<f64>() < cfg.reference_prob {
            let count = rng.random_range(1..=cfg.max_references);
            for _ in 0..count {
                if rng.random::<f64>() < cfg.dangling_prob {
                    rec.references
                        .push(PaperId::new(format!("EXT{}", rng.random_range(0..1_000_000u32))).unwrap());
                    continue;
                }
                let pool = if rng.random::<f64>() < cfg.same_topic_citations && !by_topic[topic].is_empty() {
                    &by_topic[topic]
                } else {
                    &by_topic[rng.random_range(0..cfg.topics)]
                };
                if pool.is_empty() {
                    continue;
                }
                // Squaring favors early papers, giving a long-tailed citation count.
                let u: f64 = rng.random();
                let j = pool[((u * u) * pool.len() as f64) as usize];
                rec.references.push(paper_id(j));
            }
        }
        by_topic[topic].push(i);
        out.push(rec);
    }
    out
}

/// `n` unit vectors in `dim` dimensions scattered around `clusters` random unit centers.
/// Returns the vectors and each vector's planted center.
pub fn planted_vectors(
    n: usize,
    dim: usize,
    clusters: usize,
    noise: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 {
        // Box-Muller
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| {
            let mut c: Vec<f64> = (0..dim).map(|_| gauss(&mut rng)).collect();
            normalize(&mut c);
            c
        })
        .collect();
    let mut labels = Vec::with_capacity(n);
    let vectors = (0..n)
        .map(|_| {
            let c = rng.random_range(0..clusters);
            labels.push(c);
            let mut v: Vec<f64> = centers[c].iter().map(|x| x + noise * gauss(&mut rng)).collect();
            if !normalize(&mut v) {
                v = centers[c].clone();
            }
            v
        })
        .collect();
    (vectors, labels)
}
