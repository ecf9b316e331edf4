//! Triple-dump parsing: ConceptNet 5.x assertion CSVs and a generic TSV.
//!
//! Per-row problems never abort a load; they are tallied in an
//! [`IngestReport`]. Only I/O failures are fatal.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_surface, GraphBuilder, KnowledgeGraph, RawTriple};

/// Lines parsed per parallel batch.
const CHUNK_LINES: usize = 64 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DumpFormat {
    ConceptnetCsv,
    GenericTsv,
}

impl FromStr for DumpFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conceptnet-csv" => Ok(DumpFormat::ConceptnetCsv),
            "generic-tsv" => Ok(DumpFormat::GenericTsv),
            other => Err(Error::InvalidConfig(format!("unknown dump format {other:?}"))),
        }
    }
}

impl fmt::Display for DumpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DumpFormat::ConceptnetCsv => "conceptnet-csv",
            DumpFormat::GenericTsv => "generic-tsv",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub format: DumpFormat,
    /// Language segment both ConceptNet node URIs must carry.
    pub language: String,
    pub min_weight: f64,
    pub excluded_relations: BTreeSet<String>,
}

impl IngestConfig {
    pub fn new(format: DumpFormat) -> Self {
        IngestConfig {
            format,
            language: "en".to_string(),
            min_weight: 1.0,
            excluded_relations: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.min_weight.is_finite() || self.min_weight < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "min_weight must be finite and >= 0, got {}",
                self.min_weight
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SkipReason {
    Language,
    Weight,
    Relation,
    Malformed(String),
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::Language => f.write_str("language"),
            SkipReason::Weight => f.write_str("weight"),
            SkipReason::Relation => f.write_str("excluded relation"),
            SkipReason::Malformed(why) => write!(f, "malformed: {why}"),
        }
    }
}

/// Row counters. `rows_read` always equals the sum of the other five.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_kept: u64,
    pub rows_skipped_language: u64,
    pub rows_skipped_weight: u64,
    pub rows_skipped_relation: u64,
    pub rows_malformed: u64,
}

impl IngestReport {
    pub fn record(&mut self, outcome: &std::result::Result<RawTriple, SkipReason>) {
        self.rows_read += 1;
        match outcome {
            Ok(_) => self.rows_kept += 1,
            Err(SkipReason::Language) => self.rows_skipped_language += 1,
            Err(SkipReason::Weight) => self.rows_skipped_weight += 1,
            Err(SkipReason::Relation) => self.rows_skipped_relation += 1,
            Err(SkipReason::Malformed(_)) => self.rows_malformed += 1,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.rows_read
            == self.rows_kept
                + self.rows_skipped_language
                + self.rows_skipped_weight
                + self.rows_skipped_relation
                + self.rows_malformed
    }
}

#[derive(Deserialize)]
struct AssertionMeta {
    weight: f64,
}

fn malformed(why: impl Into<String>) -> SkipReason {
    SkipReason::Malformed(why.into())
}

/// Splits `/c/<lang>/<term>[/...]` into language and normalized term.
fn parse_concept_uri(uri: &str) -> std::result::Result<(&str, String), SkipReason> {
    let mut parts = uri.split('/');
    let (Some(""), Some("c"), Some(lang), Some(term)) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(malformed(format!("bad concept URI {uri:?}")));
    };
    if lang.is_empty() {
        return Err(malformed(format!("concept URI without language {uri:?}")));
    }
    let term = normalize_surface(term);
    if term.is_empty() {
        return Err(malformed(format!("concept URI without term {uri:?}")));
    }
    Ok((lang, term))
}

fn apply_filters(
    triple: RawTriple,
    config: &IngestConfig,
) -> std::result::Result<RawTriple, SkipReason> {
    if config.excluded_relations.contains(&triple.relation) {
        return Err(SkipReason::Relation);
    }
    if triple.weight < config.min_weight {
        return Err(SkipReason::Weight);
    }
    Ok(triple)
}

/// Parses one ConceptNet assertion row:
/// `assertion-uri \t /r/Rel \t /c/lang/start \t /c/lang/end \t {json with "weight"}`.
pub fn parse_conceptnet_row(
    line: &str,
    config: &IngestConfig,
) -> std::result::Result<RawTriple, SkipReason> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.splitn(6, '\t').collect();
    if fields.len() < 5 {
        return Err(malformed(format!("expected 5 fields, found {}", fields.len())));
    }
    let relation = fields[1]
        .strip_prefix("/r/")
        .map(|r| r.trim_end_matches('/'))
        .filter(|r| !r.is_empty())
        .ok_or_else(|| malformed(format!("bad relation URI {:?}", fields[1])))?;
    let (start_lang, head) = parse_concept_uri(fields[2])?;
    let (end_lang, tail) = parse_concept_uri(fields[3])?;
    let meta: AssertionMeta = serde_json::from_str(fields[4])
        .map_err(|e| malformed(format!("metadata: {e}")))?;
    if !meta.weight.is_finite() || meta.weight < 0.0 {
        return Err(malformed(format!("negative weight {}", meta.weight)));
    }
    if start_lang != config.language || end_lang != config.language {
        return Err(SkipReason::Language);
    }
    apply_filters(
        RawTriple {
            head,
            relation: relation.to_string(),
            tail,
            weight: meta.weight,
        },
        config,
    )
}

/// Parses `head \t relation \t tail [\t weight]`; weight defaults to 1.0.
pub fn parse_generic_row(
    line: &str,
    config: &IngestConfig,
) -> std::result::Result<RawTriple, SkipReason> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 3 {
        return Err(malformed(format!("expected at least 3 fields, found {}", fields.len())));
    }
    let head = normalize_surface(fields[0]);
    let relation = fields[1].trim();
    let tail = normalize_surface(fields[2]);
    if head.is_empty() || tail.is_empty() || relation.is_empty() {
        return Err(malformed("empty head, relation or tail"));
    }
    let weight = match fields.get(3).map(|w| w.trim()) {
        None | Some("") => 1.0,
        Some(w) => w
            .parse::<f64>()
            .ok()
            .filter(|w| w.is_finite() && *w >= 0.0)
            .ok_or_else(|| malformed(format!("bad weight {w:?}")))?,
    };
    apply_filters(
        RawTriple {
            head,
            relation: relation.to_string(),
            tail,
            weight,
        },
        config,
    )
}

pub fn parse_row(line: &str, config: &IngestConfig) -> std::result::Result<RawTriple, SkipReason> {
    match config.format {
        DumpFormat::ConceptnetCsv => parse_conceptnet_row(line, config),
        DumpFormat::GenericTsv => parse_generic_row(line, config),
    }
}

fn parse_bytes(line: &[u8], config: &IngestConfig) -> std::result::Result<RawTriple, SkipReason> {
    match std::str::from_utf8(line) {
        Ok(text) => parse_row(text, config),
        Err(_) => Err(malformed("invalid UTF-8")),
    }
}

fn is_blank(line: &[u8]) -> bool {
    line.iter().all(|b| b.is_ascii_whitespace())
}

/// Streams rows from `reader` into a graph. Blank lines are ignored and
/// not counted.
pub fn load_reader<R: BufRead>(
    mut reader: R,
    config: &IngestConfig,
) -> std::io::Result<(KnowledgeGraph, IngestReport)> {
    let mut builder = GraphBuilder::new();
    let mut report = IngestReport::default();
    let mut chunk: Vec<Vec<u8>> = Vec::with_capacity(CHUNK_LINES);
    let mut done = false;

    while !done {
        chunk.clear();
        while chunk.len() < CHUNK_LINES {
            let mut line = Vec::new();
            if reader.read_until(b'\n', &mut line)? == 0 {
                done = true;
                break;
            }
            if !is_blank(&line) {
                chunk.push(line);
            }
        }
        let outcomes: Vec<_> = chunk.par_iter().map(|line| parse_bytes(line, config)).collect();
        for outcome in outcomes {
            let outcome = match outcome {
                Ok(triple) => match builder.add_raw(&triple) {
                    Ok(()) => Ok(triple),
                    Err(e) => Err(malformed(e.to_string())),
                },
                Err(skip) => Err(skip),
            };
            report.record(&outcome);
        }
    }
    Ok((builder.build(), report))
}

/// Opens `path` (gzip detected by magic bytes) and loads it.
pub fn load(path: impl AsRef<Path>, config: &IngestConfig) -> Result<(KnowledgeGraph, IngestReport)> {
    config.validate()?;
    let path = path.as_ref();
    let io_err = |e| Error::io(path, e);
    let file = File::open(path).map_err(io_err)?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let gzipped = reader.fill_buf().map_err(io_err)?.starts_with(&[0x1f, 0x8b]);
    if gzipped {
        let decoder = MultiGzDecoder::new(reader);
        load_reader(BufReader::with_capacity(1 << 20, decoder), config).map_err(io_err)
    } else {
        load_reader(reader, config).map_err(io_err)
    }
}

/// Reads the whole of `path`, transparently gunzipping it.
pub fn read_maybe_gzip(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cn() -> IngestConfig {
        IngestConfig::new(DumpFormat::ConceptnetCsv)
    }

    fn row(rel: &str, start: &str, end: &str, weight: &str) -> String {
        format!(
            "/a/[{rel}/,{start}/,{end}/]\t{rel}\t{start}\t{end}\t{{\"dataset\": \"/d/conceptnet/4/en\", \"weight\": {weight}}}"
        )
    }

    #[test]
    fn conceptnet_row_yields_normalized_triple() {
        let line = row("/r/AtLocation", "/c/en/revolving_door", "/c/en/bank", "1.0");
        let t = parse_conceptnet_row(&line, &cn()).unwrap();
        assert_eq!(t, RawTriple::new("revolving door", "AtLocation", "bank", 1.0));
    }

    #[test]
    fn conceptnet_uri_suffixes_are_ignored() {
        let line = row("/r/IsA", "/c/en/Bank/n/wn/group", "/c/en/institution/n", "2.0");
        let t = parse_conceptnet_row(&line, &cn()).unwrap();
        assert_eq!((t.head.as_str(), t.tail.as_str()), ("bank", "institution"));
    }

    #[test]
    fn foreign_language_is_skipped() {
        let line = row("/r/RelatedTo", "/c/fr/porte", "/c/en/door", "1.0");
        assert_eq!(parse_conceptnet_row(&line, &cn()), Err(SkipReason::Language));
    }

    #[test]
    fn low_weight_is_skipped() {
        let line = row("/r/RelatedTo", "/c/en/a", "/c/en/b", "0.5");
        assert_eq!(parse_conceptnet_row(&line, &cn()), Err(SkipReason::Weight));
    }

    #[test]
    fn excluded_relation_is_skipped() {
        let mut config = cn();
        config.excluded_relations.insert("ExternalURL".into());
        let line = row("/r/ExternalURL", "/c/en/a", "/c/en/b", "1.0");
        assert_eq!(parse_conceptnet_row(&line, &config), Err(SkipReason::Relation));
    }

    #[test]
    fn conceptnet_malformed_rows() {
        let config = cn();
        for line in [
            "only\tfour\tfields\there".to_string(),
            row("/r/IsA", "/c/en/a", "/c/en/b", "\"heavy\""),
            "/a/x\t/r/IsA\t/c/en/a\t/c/en/b\tnot json".to_string(),
            row("IsA", "/c/en/a", "/c/en/b", "1.0"),
            row("/r/IsA", "/c/en", "/c/en/b", "1.0"),
            row("/r/IsA", "/d/en/a", "/c/en/b", "1.0"),
        ] {
            assert!(
                matches!(parse_conceptnet_row(&line, &config), Err(SkipReason::Malformed(_))),
                "{line}"
            );
        }
    }

    #[test]
    fn generic_rows() {
        let config = IngestConfig::new(DumpFormat::GenericTsv);
        assert_eq!(
            parse_generic_row("bank\tRelatedTo\tsecurity", &config).unwrap(),
            RawTriple::new("bank", "RelatedTo", "security", 1.0)
        );
        assert_eq!(parse_generic_row("a\tr\tb\t2.5", &config).unwrap().weight, 2.5);
        assert!(matches!(parse_generic_row("a\tr", &config), Err(SkipReason::Malformed(_))));
        assert!(matches!(
            parse_generic_row("a\tr\tb\tx", &config),
            Err(SkipReason::Malformed(_))
        ));
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let (kg, report) = load_reader(&b""[..], &cn()).unwrap();
        assert!(kg.is_empty());
        assert_eq!(report, IngestReport::default());
    }

    #[test]
    fn six_row_fixture_counts() {
        let text = [
            row("/r/AtLocation", "/c/en/revolving_door", "/c/en/bank", "1.0"),
            row("/r/RelatedTo", "/c/en/bank", "/c/en/security", "1.0"),
            row("/r/AtLocation", "/c/en/revolving_door", "/c/en/mall", "2.0"),
            row("/r/AtLocation", "/c/en/revolving_door", "/c/en/hotel", "1.5"),
            "garbage row".to_string(),
            row("/r/RelatedTo", "/c/fr/porte", "/c/fr/banque", "1.0"),
        ]
        .join("\n");
        let (kg, report) = load_reader(text.as_bytes(), &cn()).unwrap();
        assert_eq!(report.rows_read, 6);
        assert_eq!(report.rows_kept, 4);
        assert_eq!(report.rows_malformed, 1);
        assert_eq!(report.rows_skipped_language, 1);
        assert!(report.is_consistent());
        assert_eq!(kg.triple_count(), 4);
    }

    #[test]
    fn invalid_utf8_is_malformed() {
        let bytes = b"a\tr\tb\n\xff\xfe\tr\tc\n";
        let (kg, report) =
            load_reader(&bytes[..], &IngestConfig::new(DumpFormat::GenericTsv)).unwrap();
        assert_eq!(kg.triple_count(), 1);
        assert_eq!(report.rows_malformed, 1);
    }

    #[test]
    fn negative_min_weight_is_rejected() {
        let mut config = cn();
        config.min_weight = -1.0;
        assert!(config.validate().is_err());
    }
}
