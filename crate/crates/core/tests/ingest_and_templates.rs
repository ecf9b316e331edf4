mod common;

use std::io::Write;

use common::{figure_one, independent_kept_count, write_conceptnet_dump};
use flate2::write::GzEncoder;
use flate2::Compression;
use khop::generate::generate;
use khop::ingest::{load, load_reader, DumpFormat, IngestConfig};
use khop::templates::decamel;
use khop::{GenConfig, KnowledgeGraph, MaskToken, SampleKind, TemplateTable};
use proptest::prelude::*;

#[test]
fn synthetic_dump_matches_independent_filter() {
    let mut dump = Vec::new();
    write_conceptnet_dump(&mut dump, 20_000, 1).unwrap();
    let config = IngestConfig::new(DumpFormat::ConceptnetCsv);
    let (kg, report) = load_reader(dump.as_slice(), &config).unwrap();
    assert!(report.is_consistent());
    assert_eq!(report.rows_read, 20_000);
    let text = String::from_utf8(dump).unwrap();
    assert_eq!(report.rows_kept as usize, independent_kept_count(&text, 1.0));
    assert!(report.rows_malformed > 0 && report.rows_skipped_language > 0 && report.rows_skipped_weight > 0);
    assert!(kg.triple_count() as u64 <= report.rows_kept);
}

#[test]
fn gzip_and_plain_files_load_identically() {
    let mut dump = Vec::new();
    write_conceptnet_dump(&mut dump, 2_000, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("dump.csv");
    let gz = dir.path().join("dump.csv.gz");
    std::fs::write(&plain, &dump).unwrap();
    let mut enc = GzEncoder::new(std::fs::File::create(&gz).unwrap(), Compression::fast());
    enc.write_all(&dump).unwrap();
    enc.finish().unwrap();
    let config = IngestConfig::new(DumpFormat::ConceptnetCsv);
    let (a, ra) = load(&plain, &config).unwrap();
    let (b, rb) = load(&gz, &config).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.raw_triples().collect::<Vec<_>>(), b.raw_triples().collect::<Vec<_>>());
}

#[test]
fn generic_tsv_rows() {
    let text = "a\tr\tb\n\nc\tr\td\t2.5\nbad row\ne\tr\tf\tnope\n";
    let config = IngestConfig::new(DumpFormat::GenericTsv);
    let (kg, report) = load_reader(text.as_bytes(), &config).unwrap();
    assert_eq!((report.rows_read, report.rows_kept, report.rows_malformed), (4, 2, 2));
    let (c, r, d) = (kg.entity_id("c").unwrap(), kg.relation_id("r").unwrap(), kg.entity_id("d").unwrap());
    assert_eq!(kg.weight(c, r, d), Some(2.5));
}

#[test]
fn excluded_relations_and_weights() {
    let text = "a\tExternalURL\tb\t1\nc\tIsA\td\t0.5\ne\tIsA\tf\t3\n";
    let mut config = IngestConfig::new(DumpFormat::GenericTsv);
    config.excluded_relations.insert("ExternalURL".into());
    let (_, report) = load_reader(text.as_bytes(), &config).unwrap();
    assert_eq!(report.rows_skipped_relation, 1);
    assert_eq!(report.rows_skipped_weight, 1);
    assert_eq!(report.rows_kept, 1);
}

#[test]
fn figure_one_fixture() {
    let kg = KnowledgeGraph::build(figure_one()).unwrap();
    let table = TemplateTable::conceptnet_default();
    let (samples, _) = generate(&kg, &table, &GenConfig::default()).unwrap();
    let comp: Vec<_> = samples.iter().filter(|s| s.kind == SampleKind::Compositive).collect();
    assert_eq!(comp.len(), 1);
    let s = comp[0];
    assert_eq!(s.correct_answer(), "bank");
    let mut others: Vec<&str> = s.answers.iter().map(String::as_str).filter(|a| *a != "bank").collect();
    others.sort();
    assert_eq!(others, ["hotel", "mall"]);
    assert_eq!(
        s.question,
        "you are likely to find revolving door in [MASK]. [MASK] is related to security."
    );
}

#[test]
fn shipped_templates_cover_common_relations() {
    let table = TemplateTable::conceptnet_default();
    assert!(table.len() >= 10);
    for rel in ["AtLocation", "UsedFor", "IsA", "RelatedTo", "PartOf", "CapableOf"] {
        let text = table.render_surfaces(rel, "x", "y");
        assert!(text.contains('x') && text.contains('y') && text.ends_with('.'), "{rel}: {text}");
        assert!(!text.contains("{head}") && !text.contains("{tail}"));
    }
    assert_eq!(table.render_surfaces("SomeNewRelation", "x", "y"), "x some new relation y.");
    assert_eq!(decamel("HasFirstSubevent"), "has first subevent");
}

#[test]
fn duplicate_template_rows_name_both_rows() {
    let err = TemplateTable::parse("A\t{head} a {tail}\nB\t{head} b {tail}\nA\t{head} c {tail}\n").unwrap_err();
    assert!(matches!(err, khop::Error::DuplicateTemplate { first: 1, second: 3, .. }));
    let (table, rejected) = TemplateTable::parse("A\t{head} only\nB\t{head} b {tail}\n").unwrap();
    assert_eq!(table.len(), 1);
    assert_eq!(rejected[0].row, 1);
}

proptest! {
    #[test]
    fn rendered_text_contains_both_surfaces(h in "[a-z]{1,8}( [a-z]{1,8})?", t in "[a-z]{1,8}") {
        let table = TemplateTable::conceptnet_default();
        for rel in ["AtLocation", "UsedFor", "IsA", "Desires", "Unknown"] {
            let text = table.render_surfaces(rel, &h, &t);
            prop_assert!(text.contains(h.as_str()) && text.contains(t.as_str()));
        }
    }

    #[test]
    fn mask_tokens_reject_whitespace(s in "[a-z]{0,3}[ \t][a-z]{0,3}") {
        prop_assert!(MaskToken::new(s).is_err());
    }
}
