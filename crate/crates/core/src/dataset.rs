//! QA dataset files: JSONL I/O, dedup, seeded split and merge, stats, and
//! adapters for external benchmark files.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::generate::{QaSample, SampleKind};
use crate::hash::{derive_seed, short_id};
use crate::scorer::tokenize;

pub fn write_jsonl_to<W: Write>(samples: &[QaSample], mut out: W) -> std::io::Result<()> {
    for sample in samples {
        serde_json::to_writer(&mut out, sample)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_jsonl(samples: &[QaSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl_to(samples, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Reads samples, rejecting bad JSON, out-of-range labels and repeated ids.
/// Blank lines are skipped. Errors carry 1-based line numbers.
pub fn read_jsonl_from<R: BufRead>(reader: R) -> Result<Vec<QaSample>> {
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: QaSample =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if sample.correct_index >= sample.answers.len() {
            return Err(Error::parse(
                line_no,
                format!(
                    "label {} out of range for {} answers",
                    sample.correct_index,
                    sample.answers.len()
                ),
            ));
        }
        if !ids.insert(sample.id.clone()) {
            return Err(Error::parse(line_no, format!("duplicate id {:?}", sample.id)));
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<QaSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl_from(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Keeps the first sample for each (question, answer multiset, correct
/// answer) key.
pub fn dedup(samples: Vec<QaSample>) -> Vec<QaSample> {
    let mut seen = HashSet::new();
    samples
        .into_iter()
        .filter(|s| {
            let mut answers = s.answers.clone();
            answers.sort();
            seen.insert((s.question.clone(), answers, s.correct_answer().to_string()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.95,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// `round(fraction * n)`, clamped so both sides are non-empty.
    pub fn train_size(&self, n: usize) -> usize {
        let raw = (self.train_fraction * n as f64).round() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Seeded shuffle, then the first `train_size` samples go to training.
pub fn split<T: Clone>(samples: &[T], config: &SplitConfig) -> Result<(Vec<T>, Vec<T>)> {
    config.validate()?;
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let n_train = config.train_size(samples.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Concatenates sources, keeping `round(weight * len)` seeded picks of each
/// (in original order). Colliding ids are re-hashed with the source index.
pub fn merge_sources(sources: Vec<Vec<QaSample>>, weights: &[f64], seed: u64) -> Result<Vec<QaSample>> {
    if sources.is_empty() {
        return Err(Error::InvalidConfig("merge needs at least one source".into()));
    }
    if !weights.is_empty() && weights.len() != sources.len() {
        return Err(Error::InvalidConfig(format!(
            "{} weights for {} sources",
            weights.len(),
            sources.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::InvalidConfig(format!("merge weight {w} outside [0, 1]")));
    }

    let mut merged = Vec::new();
    let mut ids: HashSet<String> = HashSet::new();
    for (source, samples) in sources.into_iter().enumerate() {
        let weight = weights.get(source).copied().unwrap_or(1.0);
        let keep = (weight * samples.len() as f64).round() as usize;
        let chosen: Vec<QaSample> = if keep >= samples.len() {
            samples
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("merge{source}")));
            let mut idx: Vec<usize> = (0..samples.len()).collect();
            idx.shuffle(&mut rng);
            let mut idx: Vec<usize> = idx[..keep].to_vec();
            idx.sort_unstable();
            let mut slots: Vec<Option<QaSample>> = samples.into_iter().map(Some).collect();
            idx.iter().map(|&i| slots[i].take().expect("unique index")).collect()
        };
        for mut sample in chosen {
            let tag = format!("src{source}");
            let mut attempt = 0u32;
            while ids.contains(&sample.id) {
                let salt = attempt.to_string();
                sample.id = short_id([tag.as_str(), salt.as_str(), sample.id.as_str()]);
                attempt += 1;
            }
            ids.insert(sample.id.clone());
            merged.push(sample);
        }
    }
    Ok(merged)
}

pub fn merge<P: AsRef<Path>>(paths: &[P], weights: &[f64], seed: u64) -> Result<Vec<QaSample>> {
    let sources = paths.iter().map(read_jsonl).collect::<Result<Vec<_>>>()?;
    merge_sources(sources, weights, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkFormat {
    /// CommonsenseQA: `question.stem`, `question.choices[].{label,text}`, `answerKey`.
    Csqa,
    /// Two-way choice: `goal`, `sol1`, `sol2`, integer `label`.
    PiqaStyleBinary,
}

impl FromStr for BenchmarkFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csqa" => Ok(BenchmarkFormat::Csqa),
            "piqa" | "piqa-style-binary" => Ok(BenchmarkFormat::PiqaStyleBinary),
            other => Err(Error::InvalidConfig(format!("unknown benchmark format {other:?}"))),
        }
    }
}

fn str_field<'a>(value: &'a Value, pointer: &str, line: usize) -> Result<&'a str> {
    value
        .pointer(pointer)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse(line, format!("missing string field {pointer}")))
}

fn benchmark_id(value: &Value, raw: &str) -> String {
    match value.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => short_id(["benchmark", raw]),
    }
}

fn adapt_csqa(value: &Value, raw: &str, line: usize) -> Result<QaSample> {
    let stem = str_field(value, "/question/stem", line)?;
    let key = str_field(value, "/answerKey", line)?;
    let choices = value
        .pointer("/question/choices")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(line, "missing question.choices"))?;
    let mut answers = Vec::with_capacity(choices.len());
    let mut label = None;
    for (i, choice) in choices.iter().enumerate() {
        let text = str_field(choice, "/text", line)?;
        let choice_label = str_field(choice, "/label", line)?;
        if choice_label == key {
            label = Some(i);
        }
        answers.push(text.to_string());
    }
    let correct_index =
        label.ok_or_else(|| Error::parse(line, format!("answerKey {key:?} matches no choice")))?;
    Ok(QaSample {
        id: benchmark_id(value, raw),
        question: stem.to_string(),
        answers,
        correct_index,
        kind: SampleKind::Benchmark,
        provenance: Vec::new(),
    })
}

fn adapt_binary(value: &Value, raw: &str, line: usize) -> Result<QaSample> {
    let goal = str_field(value, "/goal", line)?;
    let sol1 = str_field(value, "/sol1", line)?;
    let sol2 = str_field(value, "/sol2", line)?;
    let label = value
        .get("label")
        .and_then(|v| v.as_u64().or_else(|| v.as_str().and_then(|s| s.trim().parse().ok())))
        .filter(|&l| l < 2)
        .ok_or_else(|| Error::parse(line, "missing or invalid label (expected 0 or 1)"))?;
    Ok(QaSample {
        id: benchmark_id(value, raw),
        question: goal.to_string(),
        answers: vec![sol1.to_string(), sol2.to_string()],
        correct_index: label as usize,
        kind: SampleKind::Benchmark,
        provenance: Vec::new(),
    })
}

pub fn adapt_benchmark_from<R: BufRead>(reader: R, format: BenchmarkFormat) -> Result<Vec<QaSample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let raw = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&raw).map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push(match format {
            BenchmarkFormat::Csqa => adapt_csqa(&value, &raw, line_no)?,
            BenchmarkFormat::PiqaStyleBinary => adapt_binary(&value, &raw, line_no)?,
        });
    }
    Ok(out)
}

pub fn adapt_benchmark(path: impl AsRef<Path>, format: BenchmarkFormat) -> Result<Vec<QaSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    adapt_benchmark_from(BufReader::new(file), format)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub samples: usize,
    pub by_kind: BTreeMap<String, usize>,
    /// Number of answers -> number of samples.
    pub answer_counts: BTreeMap<usize, usize>,
    /// Distinct surfaces across answers and provenance heads/tails.
    pub distinct_entities: usize,
    pub mean_question_tokens: f64,
}

pub fn stats(samples: &[QaSample]) -> DatasetStats {
    let mut report = DatasetStats {
        samples: samples.len(),
        ..DatasetStats::default()
    };
    let mut entities: BTreeSet<&str> = BTreeSet::new();
    let mut question_tokens = 0usize;
    for s in samples {
        *report.by_kind.entry(s.kind.to_string()).or_default() += 1;
        *report.answer_counts.entry(s.answers.len()).or_default() += 1;
        entities.extend(s.answers.iter().map(String::as_str));
        for [h, _, t] in &s.provenance {
            entities.insert(h);
            entities.insert(t);
        }
        question_tokens += tokenize(&s.question).len();
    }
    report.distinct_entities = entities.len();
    if !samples.is_empty() {
        report.mean_question_tokens = question_tokens as f64 / samples.len() as f64;
    }
    report
}
