//! Multi-hop commonsense QA synthesis from knowledge-graph triple dumps.
//!
//! The pipeline is:
//!
//! 1. [`ingest`] parses ConceptNet assertion dumps (or a generic TSV) into
//!    a [`graph::KnowledgeGraph`].
//! 2. [`generate`] enumerates two-hop structures (compositive paths and
//!    conjunctive forks) plus single-hop triples and turns them into
//!    [`generate::QaSample`]s, verbalized through a [`templates::TemplateTable`].
//! 3. [`dataset`] serializes, deduplicates, splits and merges samples.
//! 4. [`scorer`] scores every answer candidate by pseudo-log-likelihood under a
//!    [`scorer::MaskedScorer`] and picks the lowest-scoring one.
//! 5. [`loss`] turns candidate scores into the InfoNCE contrastive objective.
//!
//! [`records`] holds the line formats shared with external scoring tools.
//!
//! Scoring and loss code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod dataset;
pub mod error;
pub mod generate;
pub mod graph;
pub mod ingest;
pub mod loss;
pub mod records;
pub mod scalar;
pub mod scorer;
pub mod templates;

mod hash;
mod sampling;

pub use error::{Error, Result};
pub use generate::{GenConfig, QaSample, SampleKind};
pub use graph::{EntityId, KnowledgeGraph, RelationId, Triple};
pub use scalar::Scalar;
pub use templates::{MaskToken, TemplateTable};

/// Double-precision loss configuration.
pub type LossConfig64 = loss::LossConfig<f64>;
/// Single-precision loss configuration.
pub type LossConfig32 = loss::LossConfig<f32>;
/// Double-precision candidate-score batch.
pub type ScoredBatch64 = loss::ScoredBatch<f64>;
/// Single-precision candidate-score batch.
pub type ScoredBatch32 = loss::ScoredBatch<f32>;
/// Double-precision bigram scorer.
pub type BigramScorer64 = scorer::BigramScorer<f64>;
/// Single-precision bigram scorer.
pub type BigramScorer32 = scorer::BigramScorer<f32>;
/// Double-precision uniform scorer.
pub type UniformScorer64 = scorer::UniformScorer<f64>;
/// Single-precision uniform scorer.
pub type UniformScorer32 = scorer::UniformScorer<f32>;
/// Double-precision answer selection.
pub type Selection64 = scorer::Selection<f64>;
