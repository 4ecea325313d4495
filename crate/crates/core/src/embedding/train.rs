//! Skip-gram word vectors trained with negative sampling.
//!
//! Follows the classic word2vec recipe: frequent-word subsampling, a randomly shrunk
//! context window per center word, negatives drawn from the unigram distribution raised
//! to the 3/4 power, and a linearly decaying learning rate. Training is single-threaded
//! and driven by one seeded ChaCha stream, so a fixed seed gives bit-identical vectors.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{record_tokens, EmbeddingError, WordEmbeddings};
use crate::corpus::Corpus;

/// Only skip-gram is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    SkipGram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingParams {
    pub method: Method,
    pub embedding_size: usize,
    pub window: usize,
    /// Training epochs.
    pub max_iterations: usize,
    pub min_count: u64,
    /// Subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub negatives: usize,
    pub learning_rate: f32,
    pub seed: u64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self {
            method: Method::SkipGram,
            embedding_size: 256,
            window: 10,
            max_iterations: 10,
            min_count: 10,
            subsample: 1e-5,
            negatives: 10,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

impl TrainingParams {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let fail = |m: &str| Err(EmbeddingError::InvalidParams(m.to_string()));
        if self.embedding_size == 0 {
            return fail("embedding_size must be >= 1");
        }
        if self.window == 0 {
            return fail("window must be >= 1");
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be >= 1");
        }
        if self.min_count == 0 {
            return fail("min_count must be >= 1");
        }
        if self.subsample.is_nan() || self.subsample < 0.0 {
            return fail("subsample must be >= 0");
        }
        if self.negatives == 0 {
            return fail("negatives must be >= 1");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail("learning_rate must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub vocabulary_size: usize,
    /// Mean negative-sampling loss per positive pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    /// Tokens that survived subsampling, summed over epochs.
    pub trained_tokens: u64,
}

pub fn train_word_embeddings(
    corpus: &Corpus,
    params: &TrainingParams,
) -> Result<WordEmbeddings, EmbeddingError> {
    train_word_embeddings_with_report(corpus, params).map(|(w, _)| w)
}

/// Trains on the title, keyword and abstract token stream of every paper. Context windows
/// do not cross paper boundaries.
pub fn train_word_embeddings_with_report(
    corpus: &Corpus,
    params: &TrainingParams,
) -> Result<(WordEmbeddings, TrainingReport), EmbeddingError> {
    if corpus.is_empty() {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let sentences: Vec<Vec<String>> = corpus.records().iter().map(record_tokens).collect();
    train_on_sentences(&sentences, params)
}

struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
}

fn build_vocab(sentences: &[Vec<String>], min_count: u64) -> Vocab {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Vocab {
        words: kept.iter().map(|(w, _)| w.to_string()).collect(),
        counts: kept.iter().map(|&(_, c)| c).collect(),
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

#[inline]
fn dot32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let i = c * 8;
        for l in 0..8 {
            acc[l] += a[i + l] * b[i + l];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains skip-gram vectors on pre-tokenized sentences.
pub fn train_on_sentences(
    sentences: &[Vec<String>],
    params: &TrainingParams,
) -> Result<(WordEmbeddings, TrainingReport), EmbeddingError> {
    params.validate()?;
    let vocab = build_vocab(sentences, params.min_count);
    if vocab.words.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary {
            min_count: params.min_count,
        });
    }
    let index: HashMap<&str, u32> = vocab
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i as u32))
        .collect();
    let encoded: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .filter(|s: &Vec<u32>| s.len() > 1)
        .collect();
    let total_words: u64 = vocab.counts.iter().sum();

    let dim = params.embedding_size;
    let v = vocab.words.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut input: Vec<f32> = (0..v * dim)
        .map(|_| (rng.random::<f32>() - 0.5) / dim as f32)
        .collect();
    let mut output = vec![0.0f32; v * dim];
    let negatives = NegativeTable::new(&vocab.counts);

    let keep_prob: Vec<f64> = vocab
        .counts
        .iter()
        .map(|&c| {
            if params.subsample <= 0.0 {
                1.0
            } else {
                let threshold = params.subsample * total_words as f64;
                ((c as f64 / threshold).sqrt() + 1.0) * threshold / c as f64
            }
        })
        .collect();

    let corpus_words: u64 = encoded.iter().map(|s| s.len() as u64).sum();
    let schedule_total = (params.max_iterations as u64 * corpus_words + 1) as f64;
    let lr0 = params.learning_rate;
    let mut seen: u64 = 0;
    let mut report = TrainingReport {
        vocabulary_size: v,
        epoch_losses: Vec::with_capacity(params.max_iterations),
        trained_tokens: 0,
    };
    let mut hidden_grad = vec![0.0f32; dim];
    let mut kept: Vec<u32> = Vec::new();

    for _ in 0..params.max_iterations {
        let mut loss_sum = 0.0f64;
        let mut pairs = 0u64;
        for sentence in &encoded {
            let progress = seen as f64 / schedule_total;
            let lr = (lr0 * (1.0 - progress as f32)).max(lr0 * 1e-4);
            seen += sentence.len() as u64;

            kept.clear();
            kept.extend(
                sentence
                    .iter()
                    .copied()
                    .filter(|&w| rng.random::<f64>() < keep_prob[w as usize]),
            );
            report.trained_tokens += kept.len() as u64;

            for (pos, &center) in kept.iter().enumerate() {
                let reach = params.window - rng.random_range(0..params.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (ctx_pos, &ctx) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    let ctx = ctx as usize;
                    hidden_grad.iter_mut().for_each(|g| *g = 0.0);
                    let ctx_vec = ctx * dim..(ctx + 1) * dim;
                    for d in 0..=params.negatives {
                        let (target, label) = if d == 0 {
                            (center as usize, 1.0f32)
                        } else {
                            let t = negatives.draw(&mut rng);
                            if t == center as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out_vec = target * dim..(target + 1) * dim;
                        let f = dot32(&input[ctx_vec.clone()], &output[out_vec.clone()]);
                        let p = sigmoid(f);
                        let likelihood = if label > 0.5 { p } else { 1.0 - p };
                        loss_sum -= f64::from(likelihood.max(1e-7)).ln();
                        let g = (label - p) * lr;
                        let (inp, out) = (&input[ctx_vec.clone()], &mut output[out_vec]);
                        for k in 0..dim {
                            hidden_grad[k] += g * out[k];
                            out[k] += g * inp[k];
                        }
                    }
                    for (x, g) in input[ctx_vec].iter_mut().zip(&hidden_grad) {
                        *x += g;
                    }
                    pairs += 1;
                }
            }
        }
        report
            .epoch_losses
            .push(if pairs == 0 { 0.0 } else { loss_sum / pairs as f64 });
    }

    let mut words = WordEmbeddings::new(dim);
    for (i, w) in vocab.words.iter().enumerate() {
        let vec: Vec<f64> = input[i * dim..(i + 1) * dim].iter().map(|&x| f64::from(x)).collect();
        match words.insert(w, vec) {
            Ok(()) | Err(EmbeddingError::ZeroVector(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((words, report))
}
