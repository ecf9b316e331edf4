//! Relation templates that verbalize triples into sentences.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, Triple};

const HEAD: &str = "{head}";
const TAIL: &str = "{tail}";

/// Default ConceptNet relation table shipped with the crate.
pub const CONCEPTNET_TEMPLATES: &str = include_str!("../data/conceptnet_templates.tsv");

/// Placeholder text standing in for the hidden entity in a question.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MaskToken(String);

impl MaskToken {
    pub fn new(token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidMask {
                token,
                reason: "must be non-empty and contain no whitespace".into(),
            });
        }
        Ok(MaskToken(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for MaskToken {
    fn default() -> Self {
        MaskToken("[MASK]".to_string())
    }
}

impl fmt::Display for MaskToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for MaskToken {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        MaskToken::new(value)
    }
}

impl From<MaskToken> for String {
    fn from(value: MaskToken) -> Self {
        value.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Text(String),
    Head,
    Tail,
}

/// A validated pattern with exactly one `{head}` and one `{tail}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    source: String,
    segments: Vec<Segment>,
}

impl Pattern {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let source = text.trim().to_lowercase();
        let heads = source.matches(HEAD).count();
        let tails = source.matches(TAIL).count();
        if heads != 1 || tails != 1 {
            return Err(format!(
                "pattern needs exactly one {HEAD} and one {TAIL} (found {heads} and {tails})"
            ));
        }
        let mut segments = Vec::new();
        let mut rest = source.as_str();
        while !rest.is_empty() {
            let next = [(rest.find(HEAD), Segment::Head), (rest.find(TAIL), Segment::Tail)]
                .into_iter()
                .filter_map(|(pos, seg)| pos.map(|p| (p, seg)))
                .min_by_key(|(p, _)| *p);
            match next {
                Some((pos, seg)) => {
                    if pos > 0 {
                        segments.push(Segment::Text(rest[..pos].to_string()));
                    }
                    segments.push(seg);
                    rest = &rest[pos + HEAD.len()..];
                }
                None => {
                    segments.push(Segment::Text(rest.to_string()));
                    rest = "";
                }
            }
        }
        Ok(Pattern { source, segments })
    }

    fn fallback(relation: &str) -> Self {
        Pattern::parse(&format!("{HEAD} {} {TAIL}", decamel(relation)))
            .expect("fallback pattern is well formed")
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    fn fill(&self, head: &str, tail: &str) -> String {
        let mut out = String::with_capacity(self.source.len() + head.len() + tail.len() + 1);
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Head => out.push_str(head),
                Segment::Tail => out.push_str(tail),
            }
        }
        if !out.ends_with('.') {
            out.push('.');
        }
        out
    }

    fn literal_text(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Text(t) => Some(t.as_str()),
            _ => None,
        })
    }
}

/// Splits camel case and path separators into lowercase words:
/// `AtLocation` -> `at location`, `dbpedia/genre` -> `dbpedia genre`.
pub fn decamel(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 4);
    let mut prev: Option<char> = None;
    for c in name.chars() {
        if c == '_' || c == '/' || c == '-' || c.is_whitespace() {
            out.push(' ');
        } else {
            if c.is_uppercase() && prev.is_some_and(|p| p.is_lowercase() || p.is_ascii_digit()) {
                out.push(' ');
            }
            out.extend(c.to_lowercase());
        }
        prev = Some(c);
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A row rejected while loading a template file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub row: usize,
    pub reason: String,
}

/// Relation name to sentence pattern, with a de-camel-cased fallback.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TemplateTable {
    patterns: BTreeMap<String, Pattern>,
}

impl TemplateTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn conceptnet_default() -> Self {
        let (table, rejected) =
            Self::parse(CONCEPTNET_TEMPLATES).expect("shipped template table parses");
        debug_assert!(rejected.is_empty());
        table
    }

    /// Parses `relation \t pattern` rows. Blank lines and `#` comments are
    /// ignored. Rows with a bad pattern are rejected (and reported);
    /// duplicate relations are a hard error.
    pub fn parse(text: &str) -> Result<(Self, Vec<RejectedRow>)> {
        let mut patterns = BTreeMap::new();
        let mut first_seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut rejected = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let row = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let Some((relation, pattern)) = line.split_once('\t') else {
                rejected.push(RejectedRow {
                    row,
                    reason: "expected relation<TAB>pattern".into(),
                });
                continue;
            };
            let relation = relation.trim().to_string();
            if relation.is_empty() {
                rejected.push(RejectedRow {
                    row,
                    reason: "empty relation name".into(),
                });
                continue;
            }
            if let Some(&first) = first_seen.get(&relation) {
                return Err(Error::DuplicateTemplate {
                    relation,
                    first,
                    second: row,
                });
            }
            first_seen.insert(relation.clone(), row);
            match Pattern::parse(pattern) {
                Ok(p) => {
                    patterns.insert(relation, p);
                }
                Err(reason) => rejected.push(RejectedRow { row, reason }),
            }
        }
        Ok((TemplateTable { patterns }, rejected))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<RejectedRow>)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn pattern(&self, relation: &str) -> Pattern {
        self.patterns
            .get(relation)
            .cloned()
            .unwrap_or_else(|| Pattern::fallback(relation))
    }

    /// All literal (non-placeholder) text of the table's patterns, plus the
    /// fallback wording for `relations`.
    pub fn literal_texts<'a>(&self, relations: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut out: Vec<String> = self
            .patterns
            .values()
            .flat_map(|p| p.literal_text().map(str::to_string).collect::<Vec<_>>())
            .collect();
        for rel in relations {
            if !self.patterns.contains_key(rel) {
                out.extend(Pattern::fallback(rel).literal_text().map(str::to_string));
            }
        }
        out
    }

    pub fn render_surfaces(&self, relation: &str, head: &str, tail: &str) -> String {
        match self.patterns.get(relation) {
            Some(p) => p.fill(head, tail),
            None => Pattern::fallback(relation).fill(head, tail),
        }
    }

    pub fn render(&self, kg: &KnowledgeGraph, triple: &Triple) -> String {
        self.render_surfaces(
            kg.relation_name(triple.rel),
            kg.entity_surface(triple.head),
            kg.entity_surface(triple.tail),
        )
    }

    /// Renders `triple` with every slot holding `masked` replaced by `mask`.
    pub fn render_masked(
        &self,
        kg: &KnowledgeGraph,
        triple: &Triple,
        masked: EntityId,
        mask: &MaskToken,
    ) -> Result<String> {
        if triple.head != masked && triple.tail != masked {
            return Err(Error::NotInTriple {
                entity: kg.entity_surface(masked).to_string(),
            });
        }
        let slot = |e: EntityId| {
            if e == masked {
                mask.as_str()
            } else {
                kg.entity_surface(e)
            }
        };
        Ok(self.render_surfaces(kg.relation_name(triple.rel), slot(triple.head), slot(triple.tail)))
    }
}
