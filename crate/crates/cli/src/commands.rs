use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use khop::dataset::{self, SplitConfig};
use khop::generate;
use khop::graph::GraphStats;
use khop::ingest::{self, IngestConfig, IngestReport};
use khop::loss::{infonce, LossConfig, ScoredBatch};
use khop::records::{self, MetricsRecord};
use khop::scorer::{argmin, build_candidate_sequence, select_answer, MaskedScorer, TokenSequence};
use khop::{BigramScorer64, GenConfig, KnowledgeGraph, MaskToken, QaSample, TemplateTable, UniformScorer64};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{
    cache, AdaptArgs, DumpArgs, EvaluateArgs, GenerateArgs, IngestArgs, MergeArgs, ScoreArgs, ScorerSpec,
    SplitArgs, StatsArgs, TrainBigramArgs,
};

fn report(value: &impl Serialize) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_samples(samples: &[QaSample], path: &Path) -> Result<()> {
    dataset::write_jsonl(samples, path)?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<QaSample>> {
    Ok(dataset::read_jsonl(path)?)
}

fn ingest_config(dump: &DumpArgs) -> IngestConfig {
    let mut config = IngestConfig::new(dump.format);
    config.language = dump.language.clone();
    config.min_weight = dump.min_weight;
    config.excluded_relations = dump.exclude_relations.iter().cloned().collect();
    config
}

fn load_dump(path: &Path, dump: &DumpArgs) -> Result<(KnowledgeGraph, IngestReport)> {
    eprintln!("khop: reading {}", path.display());
    let (kg, report) = ingest::load(path, &ingest_config(dump))?;
    eprintln!(
        "khop: kept {} of {} rows ({} triples, {} entities)",
        report.rows_kept,
        report.rows_read,
        kg.triple_count(),
        kg.entity_count()
    );
    Ok((kg, report))
}

#[derive(Serialize)]
struct IngestOutput {
    report: IngestReport,
    graph: GraphStats,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let (kg, ingest_report) = load_dump(&args.input, &args.dump)?;
    cache::write(&kg, &args.output)?;
    let out = IngestOutput {
        report: ingest_report,
        graph: kg.stats(),
    };
    let mut manifest = RunManifest::new("ingest", args, None)?;
    manifest.input(&args.input)?;
    manifest.counters(&out)?;
    manifest.finish(&[&args.output])?;
    report(&out)
}

#[derive(Serialize)]
struct GenerateOutput {
    samples: usize,
    graph: GraphStats,
    ingest: Option<IngestReport>,
    generation: generate::GenStats,
    template_rows_rejected: Vec<khop::templates::RejectedRow>,
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("generate", args, Some(args.seed))?;
    let (kg, ingest_report) = match (&args.graph, &args.input) {
        (Some(graph), _) => {
            manifest.input(graph)?;
            (cache::read(graph)?, None)
        }
        (None, Some(input)) => {
            manifest.input(input)?;
            let (kg, report) = load_dump(input, &args.dump)?;
            (kg, Some(report))
        }
        (None, None) => bail!("either --graph or --input is required"),
    };
    let (table, rejected) = match &args.templates {
        Some(path) => {
            manifest.input(path)?;
            TemplateTable::load(path)?
        }
        None => (TemplateTable::conceptnet_default(), Vec::new()),
    };
    for row in &rejected {
        eprintln!("khop: template row {} rejected: {}", row.row, row.reason);
    }
    let config = GenConfig {
        n_distractors: args.n_distractors as usize,
        seed: args.seed,
        max_samples_per_key: (!args.no_cap).then_some(args.max_per_key as usize),
        hard_negatives: !args.no_hard_negatives,
        enable_compositive: !args.no_compositive,
        enable_conjunctive: !args.no_conjunctive,
        enable_single_hop: !args.no_single_hop,
        mask: MaskToken::new(args.mask.clone())?,
    };
    let (samples, stats) = generate::generate(&kg, &table, &config)?;
    eprintln!("khop: generated {} samples", samples.len());
    write_samples(&samples, &args.output)?;
    let out = GenerateOutput {
        samples: samples.len(),
        graph: kg.stats(),
        ingest: ingest_report,
        generation: stats,
        template_rows_rejected: rejected,
    };
    manifest.counters(&out)?;
    manifest.finish(&[&args.output])?;
    report(&out)
}

#[derive(Serialize)]
struct SplitOutput {
    train: usize,
    valid: usize,
}

pub fn split(args: &SplitArgs) -> Result<()> {
    let samples = read_samples(&args.input)?;
    let config = SplitConfig {
        train_fraction: args.train_fraction,
        seed: args.seed,
    };
    let (train, valid) = dataset::split(&samples, &config)?;
    write_samples(&train, &args.train_output)?;
    write_samples(&valid, &args.valid_output)?;
    let out = SplitOutput {
        train: train.len(),
        valid: valid.len(),
    };
    let mut manifest = RunManifest::new("split", args, Some(args.seed))?;
    manifest.input(&args.input)?;
    manifest.counters(&out)?;
    manifest.finish(&[&args.train_output, &args.valid_output])?;
    report(&out)
}

#[derive(Serialize)]
struct MergeOutput {
    samples: usize,
    duplicates_removed: usize,
}

pub fn merge(args: &MergeArgs) -> Result<()> {
    let mut merged = dataset::merge(&args.inputs, &args.weights, args.seed)?;
    let before = merged.len();
    if args.dedup {
        merged = dataset::dedup(merged);
    }
    write_samples(&merged, &args.output)?;
    let out = MergeOutput {
        samples: merged.len(),
        duplicates_removed: before - merged.len(),
    };
    let mut manifest = RunManifest::new("merge", args, Some(args.seed))?;
    for input in &args.inputs {
        manifest.input(input)?;
    }
    manifest.counters(&out)?;
    manifest.finish(&[&args.output])?;
    report(&out)
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    report(&dataset::stats(&read_samples(&args.input)?))
}

pub fn adapt(args: &AdaptArgs) -> Result<()> {
    let samples = dataset::adapt_benchmark(&args.input, args.format)?;
    write_samples(&samples, &args.output)?;
    let mut manifest = RunManifest::new("adapt", args, None)?;
    manifest.input(&args.input)?;
    let stats = dataset::stats(&samples);
    manifest.counters(&stats)?;
    manifest.finish(&[&args.output])?;
    report(&stats)
}

fn positive_sequences(samples: &[QaSample], mask: &MaskToken) -> Result<Vec<TokenSequence>> {
    samples
        .iter()
        .map(|s| Ok(build_candidate_sequence(s, s.correct_index, mask)?))
        .collect()
}

fn candidate_scores<S: MaskedScorer<f64>>(scorer: &S, samples: &[QaSample], mask: &MaskToken) -> Result<Vec<Vec<f64>>> {
    samples
        .par_iter()
        .map(|s| Ok(select_answer(scorer, s, mask)?.scores))
        .collect()
}

/// `None` for samples with a single answer, which have no negatives.
fn sample_loss(scores: &[f64], label: usize, config: &LossConfig<f64>) -> Result<Option<f64>> {
    if scores.len() < 2 {
        return Ok(None);
    }
    Ok(Some(infonce(&ScoredBatch::from_candidates(scores, label)?, config)))
}

fn mean_loss(samples: &[QaSample], scores: &[Vec<f64>], config: &LossConfig<f64>) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, sc) in samples.iter().zip(scores) {
        if let Some(l) = sample_loss(sc, s.correct_index, config)? {
            total += l;
            count += 1;
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

#[derive(Serialize)]
struct TrainBigramOutput {
    sequences: usize,
    vocab_size: usize,
    metrics: MetricsRecord,
}

pub fn train_bigram(args: &TrainBigramArgs) -> Result<()> {
    let mask = MaskToken::new(args.mask.clone())?;
    let config = LossConfig::new(args.tau)?;
    let train = read_samples(&args.train)?;
    let model = BigramScorer64::train(&positive_sequences(&train, &mask)?);
    model.save(&args.output)?;
    eprintln!("khop: counted {} sequences, vocabulary {}", train.len(), model.vocab_size());

    let train_loss = mean_loss(&train, &candidate_scores(&model, &train, &mask)?, &config)?;
    let valid_loss = match &args.valid {
        Some(path) => {
            let valid = read_samples(path)?;
            mean_loss(&valid, &candidate_scores(&model, &valid, &mask)?, &config)?
        }
        None => None,
    };
    let metrics = MetricsRecord {
        step: 1,
        train_loss: train_loss.unwrap_or(f64::NAN),
        valid_loss,
    };
    if metrics.train_loss.is_nan() {
        bail!("training set has no sample with two or more answers");
    }
    let mut manifest = RunManifest::new("train-bigram", args, None)?;
    manifest.input(&args.train)?;
    if let Some(valid) = &args.valid {
        manifest.input(valid)?;
    }
    let mut outputs: Vec<&Path> = vec![&args.output];
    if let Some(path) = &args.metrics {
        let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
        records::write_metrics(std::slice::from_ref(&metrics), BufWriter::new(file))?;
        outputs.push(path);
    }
    let out = TrainBigramOutput {
        sequences: train.len(),
        vocab_size: model.vocab_size(),
        metrics,
    };
    manifest.counters(&out)?;
    manifest.finish(&outputs)?;
    report(&out)
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    id: &'a str,
    scores: &'a [f64],
    predicted: usize,
    label: usize,
    loss: Option<f64>,
}

#[derive(Serialize)]
struct ScoreOutput {
    samples: usize,
    correct: usize,
    accuracy: Option<f64>,
    mean_loss: Option<f64>,
    tau: f64,
}

fn read_external(path: &Path, samples: &[QaSample]) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let records = records::read_scores(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    Ok(records::align_scores(samples, records)?)
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let mask = MaskToken::new(args.mask.clone())?;
    let config = LossConfig::new(args.tau)?;
    let samples = read_samples(&args.dataset)?;
    let mut manifest = RunManifest::new("score", args, None)?;
    manifest.input(&args.dataset)?;
    let scores = match &args.scorer {
        ScorerSpec::Uniform(v) => candidate_scores(&UniformScorer64::new(*v)?, &samples, &mask)?,
        ScorerSpec::Bigram(path) => {
            manifest.input(path)?;
            candidate_scores(&BigramScorer64::load(path)?, &samples, &mask)?
        }
        ScorerSpec::External(path) => {
            manifest.input(path)?;
            read_external(path, &samples)?
        }
    };

    let file = File::create(&args.output).with_context(|| format!("writing {}", args.output.display()))?;
    let mut out = BufWriter::new(file);
    let mut correct = 0;
    for (s, sc) in samples.iter().zip(&scores) {
        let predicted = argmin(sc).context("sample has no answers")?;
        correct += usize::from(predicted == s.correct_index);
        let line = ScoreLine {
            id: &s.id,
            scores: sc,
            predicted,
            label: s.correct_index,
            loss: sample_loss(sc, s.correct_index, &config)?,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    drop(out);

    let summary = ScoreOutput {
        samples: samples.len(),
        correct,
        accuracy: (!samples.is_empty()).then(|| correct as f64 / samples.len() as f64),
        mean_loss: mean_loss(&samples, &scores, &config)?,
        tau: args.tau,
    };
    manifest.counters(&summary)?;
    manifest.finish(&[&args.output])?;
    report(&summary)
}

#[derive(Default, Serialize)]
struct KindAccuracy {
    samples: usize,
    correct: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct TauPoint {
    tau: f64,
    mean_loss: Option<f64>,
}

#[derive(Serialize)]
struct EvaluateOutput {
    samples: usize,
    correct: usize,
    accuracy: f64,
    per_kind: BTreeMap<String, KindAccuracy>,
    tau: f64,
    mean_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_sweep: Option<Vec<TauPoint>>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let samples = read_samples(&args.dataset)?;
    if samples.is_empty() {
        bail!("dataset {} is empty", args.dataset.display());
    }
    let scores = read_external(&args.scores, &samples)?;
    let mut per_kind: BTreeMap<String, KindAccuracy> = BTreeMap::new();
    let mut correct = 0;
    for (s, sc) in samples.iter().zip(&scores) {
        let hit = argmin(sc) == Some(s.correct_index);
        correct += usize::from(hit);
        let entry = per_kind.entry(s.kind.to_string()).or_default();
        entry.samples += 1;
        entry.correct += usize::from(hit);
    }
    for k in per_kind.values_mut() {
        k.accuracy = k.correct as f64 / k.samples as f64;
    }
    let tau_sweep = match &args.tau_grid {
        Some(grid) => Some(
            grid.values()
                .into_iter()
                .map(|tau| {
                    Ok(TauPoint {
                        tau,
                        mean_loss: mean_loss(&samples, &scores, &LossConfig::new(tau)?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    report(&EvaluateOutput {
        samples: samples.len(),
        correct,
        accuracy: correct as f64 / samples.len() as f64,
        per_kind,
        tau: args.tau,
        mean_loss: mean_loss(&samples, &scores, &LossConfig::new(args.tau)?)?,
        tau_sweep,
    })
}
