use paperrec::embedding::{
    embed_corpus, embed_paper, fit_tfidf, tokenize, TermStats, TfIdfModel, WordEmbeddings,
};
use paperrec::synth::{generate_corpus, SynthConfig};
use paperrec::vector::norm;
use paperrec::{Corpus, PaperId, PaperRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TERMS: &[&str] = &["graph", "neural", "protein", "quantum", "market", "soil", "ocean", "lattice"];

fn random_words(terms: &[String], dim: usize, seed: u64) -> WordEmbeddings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = WordEmbeddings::new(dim);
    for t in terms {
        let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        words.insert(t, v).unwrap();
    }
    words
}

fn small_model() -> (WordEmbeddings, TfIdfModel) {
    let terms: Vec<String> = TERMS.iter().map(|s| s.to_string()).collect();
    let stats = terms
        .iter()
        .enumerate()
        .map(|(i, t)| TermStats {
            term: t.clone(),
            document_frequency: i as u32 + 1,
            corpus_frequency: 50,
        })
        .collect();
    (random_words(&terms, 12, 3), TfIdfModel::from_stats(40, stats))
}

/// Straight-line evaluation: one weighted add per token occurrence, in text order.
fn oracle_embedding(rec: &PaperRecord, words: &WordEmbeddings, tfidf: &TfIdfModel) -> Option<Vec<f64>> {
    let mut d = vec![0.0; words.dim()];
    let mut add = |text: &str, weight: f64| {
        for tok in tokenize(text) {
            if let (Some(idf), Some(v)) = (tfidf.idf(&tok), words.get(&tok)) {
                for (x, y) in d.iter_mut().zip(v) {
                    *x += weight * idf * y;
                }
            }
        }
    };
    add(&rec.title, 2.0);
    for k in &rec.keywords {
        add(k, 2.0);
    }
    if let Some(a) = &rec.abstract_text {
        add(a, 1.0);
    }
    let n = norm(&d);
    (n > 0.0).then(|| d.iter().map(|x| x / n).collect())
}

fn record(title: &[usize], keywords: &[usize], abs: &[usize]) -> PaperRecord {
    let join = |ix: &[usize]| ix.iter().map(|&i| TERMS[i]).collect::<Vec<_>>().join(" ");
    let mut r = PaperRecord::new(PaperId::new("x1").unwrap(), join(title));
    r.keywords = keywords.iter().map(|&i| TERMS[i].to_string()).collect();
    r.abstract_text = Some(join(abs));
    r
}

fn term_lists() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
    let idx = || proptest::collection::vec(0..TERMS.len(), 0..8);
    (idx(), idx(), proptest::collection::vec(0..TERMS.len(), 1..20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_straight_line_sum((t, k, a) in term_lists()) {
        let (words, tfidf) = small_model();
        let rec = record(&t, &k, &a);
        let got = embed_paper(&rec, &words, &tfidf).unwrap();
        let want = oracle_embedding(&rec, &words, &tfidf).unwrap();
        prop_assert!((norm(&got.vector) - 1.0).abs() < 1e-12);
        for (x, y) in got.vector.iter().zip(&want) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn token_order_does_not_matter((t, k, a) in term_lists(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let (words, tfidf) = small_model();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut t2, mut k2, mut a2) = (t.clone(), k.clone(), a.clone());
        t2.shuffle(&mut rng);
        k2.shuffle(&mut rng);
        a2.shuffle(&mut rng);
        let x = embed_paper(&record(&t, &k, &a), &words, &tfidf).unwrap();
        let y = embed_paper(&record(&t2, &k2, &a2), &words, &tfidf).unwrap();
        prop_assert_eq!(x.vector, y.vector);
    }

    #[test]
    fn idf_scaling_cancels((t, k, a) in term_lists(), factor in 0.01f64..100.0) {
        let (words, tfidf) = small_model();
        let rec = record(&t, &k, &a);
        let base = embed_paper(&rec, &words, &tfidf).unwrap().vector;
        let doubled = embed_paper(&rec, &words, &tfidf.scaled(2.0)).unwrap().vector;
        prop_assert_eq!(&base, &doubled);
        let scaled = embed_paper(&rec, &words, &tfidf.scaled(factor)).unwrap().vector;
        for (x, y) in base.iter().zip(&scaled) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn corpus_embeddings_are_unit_and_independent_of_neighbors() {
    let records = generate_corpus(&SynthConfig {
        papers: 400,
        ..SynthConfig::default()
    });
    let corpus = Corpus::from_records(records.clone()).unwrap();
    let tfidf = fit_tfidf(&corpus, 1).unwrap();
    let terms: Vec<String> = tfidf.vocabulary().iter().map(|s| s.term.clone()).collect();
    let words = random_words(&terms, 16, 8);
    let all = embed_corpus(&corpus, &words, &tfidf);
    assert!(all.unembeddable.is_empty());
    assert_eq!(all.store.len(), 400);
    for row in 0..all.store.len() {
        assert!((norm(all.store.vector(row)) - 1.0).abs() < 1e-6);
    }

    // Duplicating a paper under a new id leaves every other embedding untouched.
    let mut copy = records[17].clone();
    copy.id = PaperId::new("Zcopy").unwrap();
    let mut grown = records;
    grown.push(copy);
    let grown = Corpus::from_records(grown).unwrap();
    let again = embed_corpus(&grown, &words, &tfidf);
    for id in all.store.ids() {
        assert_eq!(all.store.get(id), again.store.get(id));
    }
    assert_eq!(
        again.store.get(&PaperId::new("Zcopy").unwrap()),
        all.store.get(&paperrec::synth::paper_id(17))
    );
}
