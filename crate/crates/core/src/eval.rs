//! Graded-relevance evaluation: P@K and exponential-gain nDCG.
//!
//! Survey rows are grouped per source paper and method bucket. Pairs tagged `both` count
//! in the co-citation and the content bucket, and once in the combined bucket (every pair
//! of a source). Each group is ranked by system score and scored; group scores are then
//! averaged per bucket.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::PaperId;
use crate::recommend::Provenance;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read survey: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    InvalidRow { line: u64, message: String },
    #[error("survey is missing column {0:?}")]
    MissingColumn(String),
    #[error("survey contains no graded pairs")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradedRecommendation {
    pub source: PaperId,
    pub target: PaperId,
    pub method: Provenance,
    pub system_score: f64,
    /// 1 (not relevant) to 5 (very relevant).
    pub user_grade: u8,
}

/// Fraction of the first `min(k, len)` grades at or above `threshold`. `None` for an empty
/// list or `k == 0`.
pub fn precision_at_k(grades: &[u8], threshold: u8, k: usize) -> Option<f64> {
    let (hits, depth) = precision_counts(grades, threshold, k)?;
    Some(hits as f64 / depth as f64)
}

fn precision_counts(grades: &[u8], threshold: u8, k: usize) -> Option<(usize, usize)> {
    let depth = k.min(grades.len());
    if depth == 0 {
        return None;
    }
    Some((grades[..depth].iter().filter(|&&g| g >= threshold).count(), depth))
}

fn dcg(grades: impl IntoIterator<Item = u8>) -> f64 {
    grades
        .into_iter()
        .enumerate()
        .map(|(i, g)| (2f64.powi(i32::from(g)) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

fn dcg_pair(grades: &[u8]) -> Option<(f64, f64)> {
    if grades.is_empty() {
        return None;
    }
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    Some((dcg(grades.iter().copied()), dcg(ideal)))
}

/// nDCG with gain `2^grade - 1` and discount `log2(rank + 1)`, over the whole list.
/// `None` for an empty list.
pub fn ndcg(grades: &[u8]) -> Option<f64> {
    let (d, ideal) = dcg_pair(grades)?;
    Some(if ideal > 0.0 { d / ideal } else { 1.0 })
}

/// How per-list results are combined into one number per bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean of per-group scores.
    #[default]
    Macro,
    /// Pooled counts: total hits over total depth, total DCG over total ideal DCG.
    Micro,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Self::Macro),
            "micro" => Ok(Self::Micro),
            other => Err(format!("unknown aggregation {other:?}; expected macro or micro")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BucketMetrics {
    pub groups: usize,
    pub pairs: usize,
    /// P@K with grade >= 3 as relevant.
    pub precision_3: f64,
    /// P@K with grade >= 4 as relevant.
    pub precision_4: f64,
    pub ndcg: f64,
}

pub const SCORE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub aggregation: Aggregation,
    pub ccb: BucketMetrics,
    pub cb: BucketMetrics,
    pub combined: BucketMetrics,
    /// `histogram[grade - 1][bin]`, bins of width 0.1 over the system score.
    pub histogram: [[u64; SCORE_BINS]; 5],
}

fn score_bin(score: f64) -> usize {
    ((score * SCORE_BINS as f64).floor() as usize).min(SCORE_BINS - 1)
}

fn bucket_metrics(groups: &[Vec<u8>], k: usize, aggregation: Aggregation) -> BucketMetrics {
    let mut m = BucketMetrics {
        groups: groups.len(),
        pairs: groups.iter().map(Vec::len).sum(),
        ..Default::default()
    };
    if groups.is_empty() {
        return m;
    }
    match aggregation {
        Aggregation::Macro => {
            let n = groups.len() as f64;
            let mean = |f: &dyn Fn(&[u8]) -> f64| groups.iter().map(|g| f(g)).sum::<f64>() / n;
            m.precision_3 = mean(&|g| precision_at_k(g, 3, k).expect("groups are non-empty"));
            m.precision_4 = mean(&|g| precision_at_k(g, 4, k).expect("groups are non-empty"));
            m.ndcg = mean(&|g| ndcg(g).expect("groups are non-empty"));
        }
        Aggregation::Micro => {
            let pooled = |t: u8| {
                let (hits, depth) = groups
                    .iter()
                    .filter_map(|g| precision_counts(g, t, k))
                    .fold((0, 0), |(h, d), (gh, gd)| (h + gh, d + gd));
                hits as f64 / depth as f64
            };
            m.precision_3 = pooled(3);
            m.precision_4 = pooled(4);
            let (d, i) = groups
                .iter()
                .filter_map(|g| dcg_pair(g))
                .fold((0.0, 0.0), |(d, i), (gd, gi)| (d + gd, i + gi));
            m.ndcg = d / i;
        }
    }
    m
}

/// Scores graded pairs. Each group is ranked by system score descending (ties by target
/// id) and cut at `k` for precision; nDCG uses the whole group.
pub fn evaluate(
    pairs: &[GradedRecommendation],
    k: usize,
    aggregation: Aggregation,
) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
    enum Bucket {
        Ccb,
        Cb,
        Combined,
    }
    let mut groups: BTreeMap<(Bucket, &PaperId), Vec<&GradedRecommendation>> = BTreeMap::new();
    let mut histogram = [[0u64; SCORE_BINS]; 5];
    for p in pairs {
        let buckets: &[Bucket] = match p.method {
            Provenance::Ccb => &[Bucket::Ccb, Bucket::Combined],
            Provenance::Cb => &[Bucket::Cb, Bucket::Combined],
            Provenance::Both => &[Bucket::Ccb, Bucket::Cb, Bucket::Combined],
        };
        for &b in buckets {
            groups.entry((b, &p.source)).or_default().push(p);
        }
        histogram[usize::from(p.user_grade - 1)][score_bin(p.system_score)] += 1;
    }
    let mut graded: BTreeMap<Bucket, Vec<Vec<u8>>> = BTreeMap::new();
    for ((bucket, _), mut list) in groups {
        list.sort_by(|a, b| {
            b.system_score
                .total_cmp(&a.system_score)
                .then_with(|| a.target.cmp(&b.target))
        });
        graded
            .entry(bucket)
            .or_default()
            .push(list.iter().map(|p| p.user_grade).collect());
    }
    let metrics = |b| bucket_metrics(graded.get(&b).map_or(&[][..], Vec::as_slice), k, aggregation);
    Ok(EvalReport {
        k,
        aggregation,
        ccb: metrics(Bucket::Ccb),
        cb: metrics(Bucket::Cb),
        combined: metrics(Bucket::Combined),
        histogram,
    })
}

/// Names of the survey columns holding each canonical field, plus method aliases.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub source: String,
    pub target: String,
    pub method: String,
    pub system_score: String,
    pub user_grade: String,
    /// Extra method labels, e.g. `("cocitation", Ccb)`; matched case-insensitively.
    pub method_aliases: Vec<(String, Provenance)>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            source: "source_id".into(),
            target: "target_id".into(),
            method: "method".into(),
            system_score: "system_score".into(),
            user_grade: "user_grade".into(),
            method_aliases: Vec::new(),
        }
    }
}

impl ColumnMap {
    /// Parses `field=column` pairs separated by commas, e.g.
    /// `source_id=PaperId,target_id=RecId,method=Type`. Method aliases use
    /// `method:<label>=<ccb|cb|both>`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut map = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected field=column, got {part:?}"))?;
            let (key, value) = (key.trim(), value.trim().to_string());
            if let Some(label) = key.strip_prefix("method:") {
                map.method_aliases.push((label.to_string(), value.parse()?));
                continue;
            }
            let slot = match key {
                "source_id" => &mut map.source,
                "target_id" => &mut map.target,
                "method" => &mut map.method,
                "system_score" => &mut map.system_score,
                "user_grade" => &mut map.user_grade,
                other => return Err(format!("unknown survey field {other:?}")),
            };
            *slot = value;
        }
        Ok(map)
    }

    fn method(&self, raw: &str) -> Result<Provenance, String> {
        let raw = raw.trim();
        self.method_aliases
            .iter()
            .find(|(label, _)| label.eq_ignore_ascii_case(raw))
            .map(|(_, p)| *p)
            .map_or_else(|| raw.parse(), Ok)
    }
}

/// Reads a survey CSV with a header row.
pub fn read_survey(reader: impl Read, columns: &ColumnMap) -> Result<Vec<GradedRecommendation>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| EvalError::InvalidRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EvalError::MissingColumn(name.to_string()))
    };
    let (c_src, c_tgt, c_method, c_score, c_grade) = (
        col(&columns.source)?,
        col(&columns.target)?,
        col(&columns.method)?,
        col(&columns.system_score)?,
        col(&columns.user_grade)?,
    );
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| EvalError::InvalidRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| EvalError::InvalidRow { line, message };
        let field = |i: usize| record.get(i).unwrap_or("");
        let source = PaperId::new(field(c_src)).map_err(|e| bad(e.to_string()))?;
        let target = PaperId::new(field(c_tgt)).map_err(|e| bad(e.to_string()))?;
        let method = columns.method(field(c_method)).map_err(bad)?;
        let system_score: f64 = field(c_score)
            .parse()
            .map_err(|_| bad(format!("system score {:?} is not a number", field(c_score))))?;
        if !(0.0..=1.0).contains(&system_score) {
            return Err(bad(format!("system score {system_score} outside [0, 1]")));
        }
        let grade: f64 = field(c_grade)
            .parse()
            .map_err(|_| bad(format!("grade {:?} is not a number", field(c_grade))))?;
        if grade.fract() != 0.0 || !(1.0..=5.0).contains(&grade) {
            return Err(bad(format!("grade {grade} outside 1..=5")));
        }
        out.push(GradedRecommendation {
            source,
            target,
            method,
            system_score,
            user_grade: grade as u8,
        });
    }
    Ok(out)
}

/// Reads the canonical survey CSV at `path` and evaluates it with macro averaging.
pub fn evaluate_survey(path: impl AsRef<Path>, per_source_k: usize) -> Result<EvalReport, EvalError> {
    let pairs = read_survey(File::open(path)?, &ColumnMap::default())?;
    evaluate(&pairs, per_source_k, Aggregation::Macro)
}

impl EvalReport {
    /// `grade,bin_low,count` rows.
    pub fn write_histogram_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "grade,bin_low,count")?;
        for (g, row) in self.histogram.iter().enumerate() {
            for (b, count) in row.iter().enumerate() {
                writeln!(w, "{},{:.1},{}", g + 1, b as f64 / SCORE_BINS as f64, count)?;
            }
        }
        Ok(())
    }

    /// Pairs per grade, summed over score bins.
    pub fn grade_totals(&self) -> [u64; 5] {
        self.histogram.map(|row| row.iter().sum())
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k={}", self.k)?;
        writeln!(
            f,
            "aggregation={}",
            match self.aggregation {
                Aggregation::Macro => "macro",
                Aggregation::Micro => "micro",
            }
        )?;
        for (name, m) in [("ccb", &self.ccb), ("cb", &self.cb), ("combined", &self.combined)] {
            writeln!(f, "{name}.groups={}", m.groups)?;
            writeln!(f, "{name}.pairs={}", m.pairs)?;
            writeln!(f, "{name}.p@{}-3={:.3}", self.k, m.precision_3)?;
            writeln!(f, "{name}.p@{}-4={:.3}", self.k, m.precision_4)?;
            writeln!(f, "{name}.ndcg={:.3}", m.ndcg)?;
        }
        Ok(())
    }
}
