//! Pseudo-log-likelihood answer scoring.
//!
//! A candidate sequence is scored by masking each position in turn and
//! averaging the negative log-probability the scorer assigns to the true
//! token there:
//!
//! ```text
//! S(T) = -(1/m) * sum_j log P(t_j | t_1..t_{j-1}, t_{j+1}..t_m)
//! ```
//!
//! The answer with the lowest score wins. [`MaskedScorer`] abstracts the
//! model; this crate ships a constant [`UniformScorer`] and a Laplace
//! smoothed [`BigramScorer`]. Real masked language models plug in through
//! externally computed score files.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::marker::PhantomData;
use std::path::Path;

use crate::error::{Error, Result};
use crate::generate::{QaSample, SampleKind};
use crate::scalar::Scalar;
use crate::templates::MaskToken;

const SPLIT_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':'];

/// Lowercases, splits on whitespace and peels trailing punctuation into
/// separate tokens (`"bank."` becomes `"bank"`, `"."`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let core = word.trim_end_matches(SPLIT_PUNCT);
        if !core.is_empty() {
            tokens.push(core.to_string());
        }
        for c in word[core.len()..].chars() {
            tokens.push(c.to_string());
        }
    }
    tokens
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// A non-empty sequence of non-empty word tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if tokens.iter().any(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidConfig("tokens must be non-empty words".into()));
        }
        Ok(TokenSequence { tokens })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::new(tokenize(text))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, j: usize) -> &str {
        &self.tokens[j]
    }
}

/// Conditional log-probability of a token given every other token.
pub trait MaskedScorer<F: Scalar>: Sync {
    /// `log P(t_j | rest)`; always `<= 0`.
    fn log_prob(&self, seq: &TokenSequence, j: usize) -> F;
}

impl<F: Scalar, S: MaskedScorer<F> + ?Sized> MaskedScorer<F> for &S {
    fn log_prob(&self, seq: &TokenSequence, j: usize) -> F {
        (**self).log_prob(seq, j)
    }
}

/// Assigns `1/V` to every token. `V` may be any real `>= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformScorer<F> {
    vocab_size: F,
}

impl<F: Scalar> UniformScorer<F> {
    pub fn new(vocab_size: F) -> Result<Self> {
        if !vocab_size.is_finite() || vocab_size < F::one() {
            return Err(Error::InvalidConfig(format!(
                "vocabulary size must be finite and >= 1, got {vocab_size}"
            )));
        }
        Ok(UniformScorer { vocab_size })
    }

    pub fn with_vocab(vocab_size: usize) -> Result<Self> {
        Self::new(F::of_usize(vocab_size))
    }

    pub fn vocab_size(&self) -> F {
        self.vocab_size
    }
}

impl<F: Scalar> MaskedScorer<F> for UniformScorer<F> {
    fn log_prob(&self, _seq: &TokenSequence, _j: usize) -> F {
        -self.vocab_size.ln()
    }
}

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;
const FIRST_WORD: u32 = 3;

/// Add-one smoothed bigram model, queried as a masked scorer.
///
/// The vocabulary is every training word plus `<unk>` (size `V`). Each
/// context (a word or `<s>`) predicts one of `V + 1` outcomes (a word or
/// `</s>`):
///
/// ```text
/// P(b | a) = (c(a, b) + 1) / (c(a) + V + 1)
/// ```
///
/// The masked conditional at position `j` with neighbours `p`, `n` is
/// `P(w | p) P(n | w)` normalized over all `w` in the vocabulary.
#[derive(Clone, Debug)]
pub struct BigramScorer<F> {
    ids: HashMap<String, u32>,
    names: Vec<String>,
    pair_counts: HashMap<(u32, u32), u64>,
    context_totals: HashMap<u32, u64>,
    successors: HashMap<u32, Vec<(u32, u64)>>,
    predecessors: HashMap<u32, Vec<(u32, u64)>>,
    /// Sum over vocabulary words of `1 / (c(w) + V + 1)`.
    inverse_mass: f64,
    _scalar: PhantomData<F>,
}

impl<F: Scalar> BigramScorer<F> {
    /// Counts bigrams (with sentence boundaries) over `corpus`.
    pub fn train<'a, I>(corpus: I) -> Self
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for seq in corpus {
            let mut prev = BOS;
            for tok in seq.tokens() {
                *counts.entry((prev.to_string(), tok.clone())).or_default() += 1;
                prev = tok;
            }
            *counts.entry((prev.to_string(), EOS.to_string())).or_default() += 1;
        }
        Self::from_counts(counts)
    }

    fn from_counts(counts: BTreeMap<(String, String), u64>) -> Self {
        let mut ids: HashMap<String, u32> = HashMap::new();
        let mut names = vec![UNK.to_string(), BOS.to_string(), EOS.to_string()];
        ids.insert(UNK.into(), UNK_ID);
        ids.insert(BOS.into(), BOS_ID);
        ids.insert(EOS.into(), EOS_ID);
        let mut words: Vec<&String> = counts
            .keys()
            .flat_map(|(a, b)| [a, b])
            .filter(|w| !matches!(w.as_str(), BOS | EOS | UNK))
            .collect();
        words.sort_unstable();
        words.dedup();
        for w in words {
            ids.insert(w.clone(), names.len() as u32);
            names.push(w.clone());
        }

        let mut pair_counts = HashMap::new();
        let mut context_totals: HashMap<u32, u64> = HashMap::new();
        let mut successors: HashMap<u32, Vec<(u32, u64)>> = HashMap::new();
        let mut predecessors: HashMap<u32, Vec<(u32, u64)>> = HashMap::new();
        for ((a, b), c) in counts {
            let (a, b) = (ids[&a], ids[&b]);
            *pair_counts.entry((a, b)).or_default() += c;
            *context_totals.entry(a).or_default() += c;
            successors.entry(a).or_default().push((b, c));
            predecessors.entry(b).or_default().push((a, c));
        }

        let mut scorer = BigramScorer {
            ids,
            names,
            pair_counts,
            context_totals,
            successors,
            predecessors,
            inverse_mass: 0.0,
            _scalar: PhantomData,
        };
        scorer.inverse_mass = scorer
            .vocabulary_ids()
            .map(|w| 1.0 / scorer.outcome_denominator(w))
            .sum();
        scorer
    }

    /// Vocabulary size `V`, including `<unk>`.
    pub fn vocab_size(&self) -> usize {
        self.names.len() - 2
    }

    fn vocabulary_ids(&self) -> impl Iterator<Item = u32> {
        std::iter::once(UNK_ID).chain(FIRST_WORD..self.names.len() as u32)
    }

    fn word_id(&self, token: &str) -> u32 {
        match self.ids.get(token) {
            Some(&id) if id >= FIRST_WORD => id,
            _ => UNK_ID,
        }
    }

    fn count(&self, a: u32, b: u32) -> u64 {
        self.pair_counts.get(&(a, b)).copied().unwrap_or(0)
    }

    fn outcome_denominator(&self, context: u32) -> f64 {
        let total = self.context_totals.get(&context).copied().unwrap_or(0);
        (total + self.vocab_size() as u64 + 1) as f64
    }

    /// `P(b | a)` with add-one smoothing.
    pub fn transition(&self, a: &str, b: &str) -> f64 {
        let a = if a == BOS { BOS_ID } else { self.word_id(a) };
        let b = if b == EOS { EOS_ID } else { self.word_id(b) };
        (self.count(a, b) as f64 + 1.0) / self.outcome_denominator(a)
    }

    /// Unnormalized `P(w | prev) P(next | w)` with the `prev` denominator
    /// dropped (it is shared by every `w`).
    fn joint(&self, prev: u32, w: u32, next: u32) -> f64 {
        (self.count(prev, w) as f64 + 1.0) * (self.count(w, next) as f64 + 1.0)
            / self.outcome_denominator(w)
    }

    /// `sum_w joint(prev, w, next)` over the vocabulary, using sparse counts.
    fn partition(&self, prev: u32, next: u32) -> f64 {
        // (c_pw + 1)(c_wn + 1) = c_pw c_wn + c_pw + c_wn + 1
        let mut total = self.inverse_mass;
        if let Some(succ) = self.successors.get(&prev) {
            for &(w, c_pw) in succ {
                if w == EOS_ID {
                    continue;
                }
                let c_wn = self.count(w, next) as f64;
                total += (c_pw as f64 * c_wn + c_pw as f64) / self.outcome_denominator(w);
            }
        }
        if let Some(pred) = self.predecessors.get(&next) {
            for &(w, c_wn) in pred {
                if w == BOS_ID {
                    continue;
                }
                total += c_wn as f64 / self.outcome_denominator(w);
            }
        }
        total
    }

    fn neighbours(&self, seq: &TokenSequence, j: usize) -> (u32, u32) {
        let prev = if j == 0 {
            BOS_ID
        } else {
            self.word_id(seq.get(j - 1))
        };
        let next = if j + 1 == seq.len() {
            EOS_ID
        } else {
            self.word_id(seq.get(j + 1))
        };
        (prev, next)
    }

    /// Writes `token \t token \t count` rows, sorted.
    pub fn write_counts<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<(&str, &str, u64)> = self
            .pair_counts
            .iter()
            .map(|(&(a, b), &c)| (self.names[a as usize].as_str(), self.names[b as usize].as_str(), c))
            .collect();
        rows.sort_unstable();
        for (a, b, c) in rows {
            writeln!(out, "{a}\t{b}\t{c}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_counts(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_counts<R: BufRead>(reader: R) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [a, b, c] = fields.as_slice() else {
                return Err(Error::parse(line_no, "expected token<TAB>token<TAB>count"));
            };
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad count {c:?}")))?;
            if a.is_empty() || b.is_empty() {
                return Err(Error::parse(line_no, "empty token"));
            }
            *counts.entry((a.to_string(), b.to_string())).or_default() += c;
        }
        Ok(Self::from_counts(counts))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_counts(std::io::BufReader::new(file))
    }
}

impl<F: Scalar> MaskedScorer<F> for BigramScorer<F> {
    fn log_prob(&self, seq: &TokenSequence, j: usize) -> F {
        let (prev, next) = self.neighbours(seq, j);
        let w = self.word_id(seq.get(j));
        let p = self.joint(prev, w, next) / self.partition(prev, next);
        F::of(p.ln().min(0.0))
    }
}

/// Mean negative log-probability over all positions.
pub fn pll_score<F: Scalar, S: MaskedScorer<F> + ?Sized>(scorer: &S, seq: &TokenSequence) -> Result<F> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let total: F = (0..seq.len()).map(|j| scorer.log_prob(seq, j)).sum();
    Ok(-total / F::of_usize(seq.len()))
}

/// Candidate text for answer `index`: the question with every mask replaced
/// by the answer, or (for benchmark samples) the answer appended.
pub fn candidate_text(sample: &QaSample, index: usize, mask: &MaskToken) -> Result<String> {
    let answer = sample.answers.get(index).ok_or(Error::AnswerIndex {
        index,
        len: sample.answers.len(),
    })?;
    if sample.kind != SampleKind::Benchmark && sample.question.contains(mask.as_str()) {
        Ok(sample.question.replace(mask.as_str(), answer))
    } else {
        Ok(format!("{} {}", sample.question, answer))
    }
}

pub fn build_candidate_sequence(sample: &QaSample, index: usize, mask: &MaskToken) -> Result<TokenSequence> {
    TokenSequence::from_text(&candidate_text(sample, index, mask)?)
}

/// Chosen answer plus every candidate's score.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection<F> {
    pub index: usize,
    pub scores: Vec<F>,
}

/// Lowest score wins; ties go to the lowest index.
pub fn argmin<F: Scalar>(scores: &[F]) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if s.partial_cmp(&b) != Some(std::cmp::Ordering::Less) => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

pub fn select_answer<F: Scalar, S: MaskedScorer<F> + ?Sized>(
    scorer: &S,
    sample: &QaSample,
    mask: &MaskToken,
) -> Result<Selection<F>> {
    let scores = (0..sample.answers.len())
        .map(|i| pll_score(scorer, &build_candidate_sequence(sample, i, mask)?))
        .collect::<Result<Vec<F>>>()?;
    let index = argmin(&scores).ok_or(Error::AnswerIndex { index: 0, len: 0 })?;
    Ok(Selection { index, scores })
}
