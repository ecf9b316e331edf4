//! Multi-hop QA synthesis.
//!
//! Three generators share one sample format:
//!
//! * **compositive**: a two-edge path `(e1h, r1, key)`, `(key, r2, e2t)`.
//!   Distractors are other `r1`-tails of `e1h` that do *not* continue to
//!   `e2t` through `r2`.
//! * **conjunctive**: two edges leaving the same `key`, `(key, r1, e1t)` and
//!   `(key, r2, e2t)` with `e1t != e2t`. Distractors reach exactly one of
//!   the two `(relation, tail)` pairs.
//! * **single hop**: one triple with its tail masked and random other tails
//!   as distractors.
//!
//! The question is the two rendered sentences joined by a space, with every
//! occurrence of the key entity replaced by the mask token. Paths that
//! cannot supply `n_distractors` valid distractors are skipped, never padded.
//!
//! Every random choice draws from an RNG seeded by `(config.seed, sample id)`
//! or `(config.seed, kind, key)`, so each kind's output is independent of
//! which other kinds are enabled and of thread scheduling.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::hash::{derive_seed, short_id};
use crate::sampling::{choose_excluding, Reservoir};
use crate::scorer::{contains_phrase, tokenize};
use crate::templates::{MaskToken, TemplateTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Compositive,
    Conjunctive,
    SingleHop,
    Benchmark,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Compositive => "compositive",
            SampleKind::Conjunctive => "conjunctive",
            SampleKind::SingleHop => "single_hop",
            SampleKind::Benchmark => "benchmark",
        }
    }
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compositive" => Ok(SampleKind::Compositive),
            "conjunctive" => Ok(SampleKind::Conjunctive),
            "single_hop" => Ok(SampleKind::SingleHop),
            "benchmark" => Ok(SampleKind::Benchmark),
            other => Err(Error::InvalidConfig(format!("unknown sample kind {other:?}"))),
        }
    }
}

/// One multiple-choice question. Field order is the JSONL column order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSample {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(rename = "label")]
    pub correct_index: usize,
    pub kind: SampleKind,
    /// Source triples as `[head, relation, tail]` surfaces.
    pub provenance: Vec<[String; 3]>,
}

impl QaSample {
    pub fn correct_answer(&self) -> &str {
        &self.answers[self.correct_index]
    }

    /// Checks the index bound and that answers are pairwise distinct.
    pub fn validate(&self) -> Result<()> {
        if self.correct_index >= self.answers.len() {
            return Err(Error::AnswerIndex {
                index: self.correct_index,
                len: self.answers.len(),
            });
        }
        let mut sorted: Vec<&str> = self.answers.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "sample {} has duplicate answers",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_distractors: usize,
    pub seed: u64,
    /// `None` disables the per-key cap.
    pub max_samples_per_key: Option<usize>,
    pub hard_negatives: bool,
    pub enable_compositive: bool,
    pub enable_conjunctive: bool,
    pub enable_single_hop: bool,
    pub mask: MaskToken,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_distractors: 2,
            seed: 0,
            max_samples_per_key: Some(10),
            hard_negatives: true,
            enable_compositive: true,
            enable_conjunctive: true,
            enable_single_hop: true,
            mask: MaskToken::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_distractors == 0 {
            return Err(Error::InvalidConfig("n_distractors must be >= 1".into()));
        }
        if self.max_samples_per_key == Some(0) {
            return Err(Error::InvalidConfig("max_samples_per_key must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindStats {
    /// Structurally valid paths (or triples, for single hop) examined.
    pub candidates: u64,
    pub skipped_insufficient_distractors: u64,
    pub skipped_answer_leak: u64,
    /// Valid samples dropped by the per-key cap.
    pub capped: u64,
    pub emitted: u64,
}

impl KindStats {
    fn merge(&mut self, other: &KindStats) {
        self.candidates += other.candidates;
        self.skipped_insufficient_distractors += other.skipped_insufficient_distractors;
        self.skipped_answer_leak += other.skipped_answer_leak;
        self.capped += other.capped;
        self.emitted += other.emitted;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStats {
    pub compositive: KindStats,
    pub conjunctive: KindStats,
    pub single_hop: KindStats,
}

/// `(e1h, r1, key)` followed by `(key, r2, e2t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositivePath {
    pub first: Triple,
    pub second: Triple,
}

impl CompositivePath {
    pub fn key(&self) -> EntityId {
        self.first.tail
    }
}

/// `(key, r1, e1t)` and `(key, r2, e2t)` in canonical `(relation, tail)` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjunctivePair {
    pub first: Triple,
    pub second: Triple,
}

impl ConjunctivePair {
    pub fn key(&self) -> EntityId {
        self.first.head
    }
}

fn triple(kg: &KnowledgeGraph, head: EntityId, rel: RelationId, tail: EntityId) -> Triple {
    Triple {
        head,
        rel,
        tail,
        weight: kg.weight(head, rel, tail).unwrap_or(0.0),
    }
}

/// Entities `e3` with `(e1h, r1, e3)`, `e3 != key`, `e3 != e1h` and no
/// `(e3, r2, e2t)` edge, sorted by handle.
pub fn compositive_distractors(kg: &KnowledgeGraph, path: &CompositivePath) -> Vec<EntityId> {
    compositive_candidates(kg, path).collect()
}

fn compositive_candidates<'a>(
    kg: &'a KnowledgeGraph,
    path: &CompositivePath,
) -> impl Iterator<Item = EntityId> + 'a {
    let CompositivePath { first, second } = *path;
    kg.outgoing(first.head, first.rel)
        .iter()
        .copied()
        .filter(move |&e3| {
            e3 != first.tail && e3 != first.head && !kg.contains(e3, second.rel, second.tail)
        })
}

/// Entities `e3 != key` with exactly one of `(e3, r1, e1t)` and
/// `(e3, r2, e2t)`, sorted by handle.
pub fn conjunctive_distractors(kg: &KnowledgeGraph, pair: &ConjunctivePair) -> Vec<EntityId> {
    let a = kg.incoming(pair.first.tail, pair.first.rel);
    let b = kg.incoming(pair.second.tail, pair.second.rel);
    let key = pair.key();
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
                continue;
            }
            (Some(x), Some(y)) if x < y => {
                i += 1;
                *x
            }
            (Some(x), None) => {
                i += 1;
                *x
            }
            (_, Some(y)) => {
                j += 1;
                *y
            }
            (None, None) => unreachable!(),
        };
        if next != key {
            out.push(next);
        }
    }
    out
}

fn sorted_intersection(a: &[EntityId], b: &[EntityId]) -> Vec<EntityId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Structurally valid compositive paths through `key`, in `(r1, e1h)` x
/// `(r2, e2t)` handle order.
pub fn compositive_paths_through(kg: &KnowledgeGraph, key: EntityId) -> Vec<CompositivePath> {
    let outs: Vec<(RelationId, EntityId)> = kg.out_edges(key).filter(|&(_, t)| t != key).collect();
    let mut paths = Vec::new();
    for (r1, e1h) in kg.in_edges(key) {
        if e1h == key {
            continue;
        }
        for &(r2, e2t) in &outs {
            if e2t == e1h {
                continue;
            }
            paths.push(CompositivePath {
                first: triple(kg, e1h, r1, key),
                second: triple(kg, key, r2, e2t),
            });
        }
    }
    paths
}

/// Structurally valid conjunctive pairs on `key`, canonical order.
pub fn conjunctive_pairs_on(kg: &KnowledgeGraph, key: EntityId) -> Vec<ConjunctivePair> {
    let outs: Vec<(RelationId, EntityId)> = kg.out_edges(key).filter(|&(_, t)| t != key).collect();
    let mut pairs = Vec::new();
    for (i, &(r1, t1)) in outs.iter().enumerate() {
        for &(r2, t2) in &outs[i + 1..] {
            if t1 == t2 {
                continue;
            }
            pairs.push(ConjunctivePair {
                first: triple(kg, key, r1, t1),
                second: triple(kg, key, r2, t2),
            });
        }
    }
    pairs
}

/// Rejects mask tokens that occur inside an entity surface or template text.
pub fn validate_mask(kg: &KnowledgeGraph, table: &TemplateTable, mask: &MaskToken) -> Result<()> {
    let token = mask.as_str();
    if let Some(surface) = kg.entity_surfaces().iter().find(|s| s.contains(token)) {
        return Err(Error::InvalidMask {
            token: token.to_string(),
            reason: format!("occurs in entity {surface:?}"),
        });
    }
    let relations: Vec<&str> = kg.relations().map(|r| kg.relation_name(r)).collect();
    if let Some(text) = table
        .literal_texts(relations.iter().copied())
        .into_iter()
        .find(|t| t.contains(token))
    {
        return Err(Error::InvalidMask {
            token: token.to_string(),
            reason: format!("occurs in template text {text:?}"),
        });
    }
    Ok(())
}

/// True when `answer` occurs as a whole-word phrase in `question`.
pub fn leaks_answer(question: &str, answer: &str) -> bool {
    contains_phrase(&tokenize(question), &tokenize(answer))
}

/// A sample whose distractors are still to be drawn.
struct Pending {
    kind: SampleKind,
    provenance: Vec<Triple>,
    question: String,
    answer: EntityId,
    /// Hard-negative candidates, or `None` for a uniform random draw.
    candidates: Option<Vec<EntityId>>,
    /// Entities a random draw must avoid.
    excluded: Vec<EntityId>,
}

struct Generator<'a> {
    kg: &'a KnowledgeGraph,
    table: &'a TemplateTable,
    config: &'a GenConfig,
    all_entities: Vec<EntityId>,
    tails: Vec<EntityId>,
}

impl<'a> Generator<'a> {
    fn new(kg: &'a KnowledgeGraph, table: &'a TemplateTable, config: &'a GenConfig) -> Result<Self> {
        config.validate()?;
        validate_mask(kg, table, &config.mask)?;
        Ok(Generator {
            kg,
            table,
            config,
            all_entities: kg.entities().collect(),
            tails: kg.distinct_tails(),
        })
    }

    fn masked(&self, t: &Triple, key: EntityId) -> String {
        self.table
            .render_masked(self.kg, t, key, &self.config.mask)
            .expect("key is part of the triple")
    }

    fn question(&self, first: &Triple, second: &Triple, key: EntityId) -> String {
        format!("{} {}", self.masked(first, key), self.masked(second, key))
    }

    fn random_pool_has(&self, pool: &[EntityId], excluded: &[EntityId]) -> bool {
        let mut distinct: Vec<EntityId> = excluded
            .iter()
            .copied()
            .filter(|e| pool.binary_search(e).is_ok())
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        pool.len() - distinct.len() >= self.config.n_distractors
    }

    fn compositive_pending(&self, path: &CompositivePath, stats: &mut KindStats) -> Option<Pending> {
        let n = self.config.n_distractors;
        let (first, second) = (path.first, path.second);
        let key = path.key();
        let (candidates, excluded) = if self.config.hard_negatives {
            if compositive_candidates(self.kg, path).take(n).count() < n {
                stats.skipped_insufficient_distractors += 1;
                return None;
            }
            (Some(compositive_distractors(self.kg, path)), Vec::new())
        } else {
            let mut excluded = vec![key, first.head, second.tail];
            excluded.extend(sorted_intersection(
                self.kg.outgoing(first.head, first.rel),
                self.kg.incoming(second.tail, second.rel),
            ));
            if !self.random_pool_has(&self.all_entities, &excluded) {
                stats.skipped_insufficient_distractors += 1;
                return None;
            }
            (None, excluded)
        };
        self.finish_pending(SampleKind::Compositive, vec![first, second], key, candidates, excluded, stats)
    }

    fn conjunctive_pending(&self, pair: &ConjunctivePair, stats: &mut KindStats) -> Option<Pending> {
        let n = self.config.n_distractors;
        let (first, second) = (pair.first, pair.second);
        let key = pair.key();
        let (candidates, excluded) = if self.config.hard_negatives {
            let candidates = conjunctive_distractors(self.kg, pair);
            if candidates.len() < n {
                stats.skipped_insufficient_distractors += 1;
                return None;
            }
            (Some(candidates), Vec::new())
        } else {
            let mut excluded = vec![key, first.tail, second.tail];
            excluded.extend(sorted_intersection(
                self.kg.incoming(first.tail, first.rel),
                self.kg.incoming(second.tail, second.rel),
            ));
            if !self.random_pool_has(&self.all_entities, &excluded) {
                stats.skipped_insufficient_distractors += 1;
                return None;
            }
            (None, excluded)
        };
        self.finish_pending(SampleKind::Conjunctive, vec![first, second], key, candidates, excluded, stats)
    }

    fn single_hop_pending(&self, t: &Triple, stats: &mut KindStats) -> Option<Pending> {
        let mut excluded = vec![t.tail, t.head];
        excluded.extend_from_slice(self.kg.outgoing(t.head, t.rel));
        if !self.random_pool_has(&self.tails, &excluded) {
            stats.skipped_insufficient_distractors += 1;
            return None;
        }
        self.finish_pending(SampleKind::SingleHop, vec![*t], t.tail, None, excluded, stats)
    }

    fn finish_pending(
        &self,
        kind: SampleKind,
        provenance: Vec<Triple>,
        answer: EntityId,
        candidates: Option<Vec<EntityId>>,
        excluded: Vec<EntityId>,
        stats: &mut KindStats,
    ) -> Option<Pending> {
        let question = match provenance.as_slice() {
            [first, second] => self.question(first, second, answer),
            [only] => self.masked(only, answer),
            _ => unreachable!("one or two provenance triples"),
        };
        if leaks_answer(&question, self.kg.entity_surface(answer)) {
            stats.skipped_answer_leak += 1;
            return None;
        }
        Some(Pending {
            kind,
            provenance,
            question,
            answer,
            candidates,
            excluded,
        })
    }

    fn realize(&self, pending: Pending) -> QaSample {
        let kg = self.kg;
        let provenance: Vec<[String; 3]> = pending
            .provenance
            .iter()
            .map(|t| {
                [
                    kg.entity_surface(t.head).to_string(),
                    kg.relation_name(t.rel).to_string(),
                    kg.entity_surface(t.tail).to_string(),
                ]
            })
            .collect();
        let id = short_id(
            std::iter::once(pending.kind.as_str())
                .chain(provenance.iter().flat_map(|p| p.iter().map(String::as_str))),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &id));
        let n = self.config.n_distractors;
        let distractors: Vec<EntityId> = match &pending.candidates {
            Some(candidates) => candidates.choose_multiple(&mut rng, n).copied().collect(),
            None => {
                let pool = match pending.kind {
                    SampleKind::SingleHop => &self.tails,
                    _ => &self.all_entities,
                };
                choose_excluding(pool, &pending.excluded, n, &mut rng)
                    .expect("availability checked before realizing")
            }
        };
        let correct_index = rng.random_range(0..=distractors.len());
        let mut answers: Vec<String> = distractors
            .iter()
            .map(|&e| kg.entity_surface(e).to_string())
            .collect();
        answers.insert(correct_index, kg.entity_surface(pending.answer).to_string());
        QaSample {
            id,
            question: pending.question,
            answers,
            correct_index,
            kind: pending.kind,
            provenance,
        }
    }

    /// Runs one kind over every key entity in parallel and concatenates the
    /// per-key results in handle order.
    fn run_kind<F>(&self, kind: SampleKind, per_key: F) -> (Vec<QaSample>, KindStats)
    where
        F: Fn(EntityId, &mut dyn FnMut(Pending), &mut KindStats) + Sync,
    {
        let results: Vec<(Vec<QaSample>, KindStats)> = self
            .all_entities
            .par_iter()
            .map(|&key| {
                let mut stats = KindStats::default();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    self.config.seed,
                    &format!("{}\u{1f}{}", kind.as_str(), self.kg.entity_surface(key)),
                ));
                let mut reservoir = Reservoir::new(self.config.max_samples_per_key.unwrap_or(usize::MAX));
                let mut kept: Vec<Pending> = Vec::new();
                let capped = self.config.max_samples_per_key.is_some();
                per_key(
                    key,
                    &mut |p| {
                        if capped {
                            reservoir.offer(p, &mut rng);
                        } else {
                            kept.push(p);
                        }
                    },
                    &mut stats,
                );
                if capped {
                    let seen = reservoir.seen();
                    kept = reservoir.into_sorted();
                    stats.capped += (seen - kept.len()) as u64;
                }
                let samples: Vec<QaSample> = kept.into_iter().map(|p| self.realize(p)).collect();
                stats.emitted += samples.len() as u64;
                (samples, stats)
            })
            .collect();

        let mut samples = Vec::new();
        let mut total = KindStats::default();
        for (s, stats) in results {
            samples.extend(s);
            total.merge(&stats);
        }
        (samples, total)
    }

    fn compositive(&self) -> (Vec<QaSample>, KindStats) {
        self.run_kind(SampleKind::Compositive, |key, emit, stats| {
            for path in compositive_paths_through(self.kg, key) {
                stats.candidates += 1;
                if let Some(p) = self.compositive_pending(&path, stats) {
                    emit(p);
                }
            }
        })
    }

    fn conjunctive(&self) -> (Vec<QaSample>, KindStats) {
        self.run_kind(SampleKind::Conjunctive, |key, emit, stats| {
            for pair in conjunctive_pairs_on(self.kg, key) {
                stats.candidates += 1;
                if let Some(p) = self.conjunctive_pending(&pair, stats) {
                    emit(p);
                }
            }
        })
    }

    fn single_hop(&self) -> (Vec<QaSample>, KindStats) {
        self.run_kind(SampleKind::SingleHop, |tail, emit, stats| {
            for (rel, head) in self.kg.in_edges(tail) {
                if head == tail {
                    continue;
                }
                stats.candidates += 1;
                if let Some(p) = self.single_hop_pending(&triple(self.kg, head, rel, tail), stats) {
                    emit(p);
                }
            }
        })
    }
}

/// Compositive samples; ignores `enable_compositive`.
pub fn gen_compositive(
    kg: &KnowledgeGraph,
    table: &TemplateTable,
    config: &GenConfig,
) -> Result<(Vec<QaSample>, KindStats)> {
    Ok(Generator::new(kg, table, config)?.compositive())
}

/// Conjunctive samples; ignores `enable_conjunctive`.
pub fn gen_conjunctive(
    kg: &KnowledgeGraph,
    table: &TemplateTable,
    config: &GenConfig,
) -> Result<(Vec<QaSample>, KindStats)> {
    Ok(Generator::new(kg, table, config)?.conjunctive())
}

/// Single-hop samples; ignores `enable_single_hop`.
pub fn gen_single_hop(
    kg: &KnowledgeGraph,
    table: &TemplateTable,
    config: &GenConfig,
) -> Result<(Vec<QaSample>, KindStats)> {
    Ok(Generator::new(kg, table, config)?.single_hop())
}

/// Every enabled kind, in the order compositive, conjunctive, single hop.
pub fn generate(
    kg: &KnowledgeGraph,
    table: &TemplateTable,
    config: &GenConfig,
) -> Result<(Vec<QaSample>, GenStats)> {
    let generator = Generator::new(kg, table, config)?;
    let mut samples = Vec::new();
    let mut stats = GenStats::default();
    if config.enable_compositive {
        let (s, k) = generator.compositive();
        samples.extend(s);
        stats.compositive = k;
    }
    if config.enable_conjunctive {
        let (s, k) = generator.conjunctive();
        samples.extend(s);
        stats.conjunctive = k;
    }
    if config.enable_single_hop {
        let (s, k) = generator.single_hop();
        samples.extend(s);
        stats.single_hop = k;
    }
    Ok((samples, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RawTriple;

    fn kg(rows: &[(&str, &str, &str)]) -> KnowledgeGraph {
        KnowledgeGraph::build(rows.iter().map(|&(h, r, t)| RawTriple::new(h, r, t, 1.0))).unwrap()
    }

    fn uncapped() -> GenConfig {
        GenConfig {
            max_samples_per_key: None,
            ..GenConfig::default()
        }
    }

    fn figure_one() -> KnowledgeGraph {
        kg(&[
            ("revolving door", "AtLocation", "bank"),
            ("bank", "RelatedTo", "security"),
            ("revolving door", "AtLocation", "mall"),
            ("revolving door", "AtLocation", "hotel"),
        ])
    }

    #[test]
    fn lone_path_without_distractors_is_skipped() {
        let g = kg(&[
            ("revolving door", "AtLocation", "bank"),
            ("bank", "RelatedTo", "security"),
        ]);
        let (samples, stats) =
            gen_compositive(&g, &TemplateTable::conceptnet_default(), &uncapped()).unwrap();
        assert!(samples.is_empty());
        assert_eq!(stats.candidates, 1);
        assert_eq!(stats.skipped_insufficient_distractors, 1);
    }

    #[test]
    fn figure_one_fixture_yields_bank_sample() {
        let g = figure_one();
        let (samples, _) =
            gen_compositive(&g, &TemplateTable::conceptnet_default(), &uncapped()).unwrap();
        assert_eq!(samples.len(), 1);
        let s = &samples[0];
        assert_eq!(s.correct_answer(), "bank");
        let mut answers = s.answers.clone();
        answers.sort();
        assert_eq!(answers, ["bank", "hotel", "mall"]);
        assert_eq!(
            s.question,
            "you are likely to find revolving door in [MASK]. [MASK] is related to security."
        );
        assert_eq!(s.kind, SampleKind::Compositive);
        assert_eq!(s.provenance.len(), 2);
    }

    #[test]
    fn candidate_with_continuing_edge_is_excluded() {
        let mut rows = vec![
            ("revolving door", "AtLocation", "bank"),
            ("bank", "RelatedTo", "security"),
            ("revolving door", "AtLocation", "mall"),
            ("revolving door", "AtLocation", "hotel"),
        ];
        rows.push(("mall", "RelatedTo", "security"));
        let g = kg(&rows);
        let path = CompositivePath {
            first: triple(&g, g.entity_id("revolving door").unwrap(), g.relation_id("AtLocation").unwrap(), g.entity_id("bank").unwrap()),
            second: triple(&g, g.entity_id("bank").unwrap(), g.relation_id("RelatedTo").unwrap(), g.entity_id("security").unwrap()),
        };
        assert_eq!(compositive_distractors(&g, &path), vec![g.entity_id("hotel").unwrap()]);
    }

    #[test]
    fn gym_conjunctive_example() {
        let g = kg(&[
            ("gym", "UsedFor", "basketball"),
            ("gym", "UsedFor", "football"),
            ("court", "UsedFor", "basketball"),
        ]);
        let config = GenConfig {
            n_distractors: 1,
            ..uncapped()
        };
        let (samples, stats) =
            gen_conjunctive(&g, &TemplateTable::conceptnet_default(), &config).unwrap();
        assert_eq!(stats.candidates, 1);
        assert_eq!(samples.len(), 1);
        let s = &samples[0];
        assert_eq!(s.correct_answer(), "gym");
        let mut answers = s.answers.clone();
        answers.sort();
        assert_eq!(answers, ["court", "gym"]);
        assert_eq!(
            s.question,
            "[MASK] is used for basketball. [MASK] is used for football."
        );
    }

    #[test]
    fn conjunctive_xor_excludes_both_and_neither() {
        let g = kg(&[
            ("gym", "UsedFor", "basketball"),
            ("gym", "UsedFor", "football"),
            ("stadium", "UsedFor", "basketball"),
            ("stadium", "UsedFor", "football"),
            ("lake", "UsedFor", "swimming"),
        ]);
        let used = g.relation_id("UsedFor").unwrap();
        let gym = g.entity_id("gym").unwrap();
        let pair = ConjunctivePair {
            first: triple(&g, gym, used, g.entity_id("basketball").unwrap()),
            second: triple(&g, gym, used, g.entity_id("football").unwrap()),
        };
        assert!(conjunctive_distractors(&g, &pair).is_empty());
        let (samples, stats) = gen_conjunctive(
            &g,
            &TemplateTable::conceptnet_default(),
            &GenConfig { n_distractors: 1, ..uncapped() },
        )
        .unwrap();
        assert!(samples.is_empty());
        assert_eq!(stats.skipped_insufficient_distractors, 2);
    }

    #[test]
    fn single_triple_graph_skips_single_hop() {
        let g = kg(&[("a", "r", "b")]);
        let (samples, _) = gen_single_hop(&g, &TemplateTable::empty(), &uncapped()).unwrap();
        assert!(samples.is_empty());
    }

    #[test]
    fn single_hop_has_distinct_answers() {
        let g = kg(&[
            ("revolving door", "AtLocation", "bank"),
            ("bank", "RelatedTo", "security"),
            ("shopper", "AtLocation", "mall"),
            ("guard", "AtLocation", "station"),
        ]);
        let (samples, _) =
            gen_single_hop(&g, &TemplateTable::conceptnet_default(), &uncapped()).unwrap();
        let s = samples
            .iter()
            .find(|s| s.provenance[0][0] == "revolving door")
            .unwrap();
        assert_eq!(s.answers.len(), 3);
        assert_eq!(s.correct_answer(), "bank");
        s.validate().unwrap();
        assert!(!s.answers.iter().any(|a| a == "revolving door"));
    }

    #[test]
    fn fixed_seed_is_reproducible_and_seed_matters() {
        let g = figure_one();
        let table = TemplateTable::conceptnet_default();
        let a = generate(&g, &table, &GenConfig { seed: 7, ..GenConfig::default() }).unwrap();
        let b = generate(&g, &table, &GenConfig { seed: 7, ..GenConfig::default() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mask_colliding_with_entity_is_rejected() {
        let g = kg(&[("[mask] thing", "r", "b")]);
        let config = GenConfig {
            mask: MaskToken::new("[mask]").unwrap(),
            ..GenConfig::default()
        };
        assert!(matches!(
            generate(&g, &TemplateTable::empty(), &config),
            Err(Error::InvalidMask { .. })
        ));
    }

    #[test]
    fn answer_leak_is_skipped() {
        // "door" appears in the head surface of the first triple.
        let g = kg(&[
            ("door frame", "PartOf", "door"),
            ("door", "RelatedTo", "house"),
            ("door frame", "PartOf", "window"),
            ("door frame", "PartOf", "wall"),
        ]);
        let (samples, stats) =
            gen_compositive(&g, &TemplateTable::conceptnet_default(), &uncapped()).unwrap();
        assert!(samples.is_empty());
        assert_eq!(stats.skipped_answer_leak, 1);
    }

    #[test]
    fn cap_limits_samples_per_key() {
        let mut rows = Vec::new();
        let heads: Vec<String> = (0..6).map(|i| format!("h{i}")).collect();
        let mids: Vec<String> = (0..4).map(|i| format!("m{i}")).collect();
        for h in &heads {
            for m in &mids {
                rows.push((h.as_str(), "AtLocation", m.as_str()));
            }
        }
        rows.push(("m0", "RelatedTo", "t0"));
        let g = kg(&rows);
        let table = TemplateTable::conceptnet_default();
        let (all, _) = gen_compositive(&g, &table, &uncapped()).unwrap();
        assert_eq!(all.len(), 6);
        let capped = GenConfig {
            max_samples_per_key: Some(2),
            ..GenConfig::default()
        };
        let (some, stats) = gen_compositive(&g, &table, &capped).unwrap();
        assert_eq!(some.len(), 2);
        assert_eq!(stats.capped, 4);
        assert!(some.iter().all(|s| all.contains(s)));
    }

    #[test]
    fn random_negatives_avoid_question_entities() {
        let g = figure_one();
        let config = GenConfig {
            hard_negatives: false,
            ..uncapped()
        };
        let (samples, _) =
            gen_compositive(&g, &TemplateTable::conceptnet_default(), &config).unwrap();
        assert_eq!(samples.len(), 1);
        let s = &samples[0];
        assert!(!s.answers.iter().any(|a| a == "revolving door" || a == "security"));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let g = figure_one();
        let table = TemplateTable::empty();
        for config in [
            GenConfig { n_distractors: 0, ..GenConfig::default() },
            GenConfig { max_samples_per_key: Some(0), ..GenConfig::default() },
        ] {
            assert!(generate(&g, &table, &config).is_err());
        }
    }
}
