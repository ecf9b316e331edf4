mod common;

use std::collections::BTreeSet;

use common::{random_graph, Oracle};
use khop::graph::{normalize_surface, RawTriple};
use khop::KnowledgeGraph;
use proptest::prelude::*;

fn edges_strategy() -> impl Strategy<Value = Vec<RawTriple>> {
    prop::collection::vec((0u8..30, 0u8..4, 0u8..30, 0u8..5), 1..300).prop_map(|rows| {
        rows.into_iter()
            .map(|(h, r, t, w)| RawTriple::new(&format!("n{h}"), &format!("r{r}"), &format!("n{t}"), f64::from(w)))
            .collect()
    })
}

proptest! {
    #[test]
    fn index_agrees_with_linear_scan(raw in edges_strategy()) {
        let oracle = Oracle::new(&raw);
        let kg = KnowledgeGraph::build(raw.clone()).unwrap();
        prop_assert_eq!(kg.triple_count(), oracle.edges.len());
        prop_assert_eq!(kg.entity_count(), oracle.entities.len());
        prop_assert_eq!(kg.stats().duplicates_collapsed, raw.len() - oracle.edges.len());

        for e in kg.entities() {
            let h = kg.entity_surface(e);
            for r in kg.relations() {
                let rel = kg.relation_name(r);
                let tails: BTreeSet<String> = kg.outgoing(e, r).iter().map(|&t| kg.entity_surface(t).to_string()).collect();
                prop_assert_eq!(tails, oracle.tails(h, rel).into_iter().collect::<BTreeSet<_>>());
                let heads: BTreeSet<String> = kg.incoming(e, r).iter().map(|&x| kg.entity_surface(x).to_string()).collect();
                prop_assert_eq!(heads, oracle.heads(rel, h).into_iter().collect::<BTreeSet<_>>());
            }
        }
        for (h, r, t) in &oracle.edges {
            let (hi, ri, ti) = (kg.entity_id(h).unwrap(), kg.relation_id(r).unwrap(), kg.entity_id(t).unwrap());
            prop_assert!(kg.contains(hi, ri, ti));
            let max_w = raw
                .iter()
                .filter(|x| (&x.head, &x.relation, &x.tail) == (h, r, t))
                .map(|x| x.weight)
                .fold(f64::MIN, f64::max);
            prop_assert_eq!(kg.weight(hi, ri, ti), Some(max_w));
        }
        let listed: Vec<(String, String, String)> = kg
            .raw_triples()
            .map(|t| (t.head, t.relation, t.tail))
            .collect();
        let mut sorted = listed.clone();
        sorted.sort();
        prop_assert_eq!(&sorted, &oracle.edges);
    }

    #[test]
    fn insertion_order_does_not_matter(raw in edges_strategy()) {
        let a = KnowledgeGraph::build(raw.clone()).unwrap();
        let mut reversed = raw;
        reversed.reverse();
        let b = KnowledgeGraph::build(reversed).unwrap();
        prop_assert_eq!(a.raw_triples().collect::<Vec<_>>(), b.raw_triples().collect::<Vec<_>>());
        prop_assert_eq!(a.entity_surfaces(), b.entity_surfaces());
    }

    #[test]
    fn normalization_is_idempotent(s in "[ a-zA-Z_]{0,20}") {
        let once = normalize_surface(&s);
        prop_assert_eq!(normalize_surface(&once), once);
    }
}

#[test]
fn random_graphs_respect_size_bounds() {
    for seed in 0..200 {
        let raw = random_graph(seed);
        assert!(raw.len() <= 300);
        let kg = KnowledgeGraph::build(raw).unwrap();
        assert!(kg.entity_count() <= 50 && kg.relation_count() <= 5);
    }
}

#[test]
fn rejects_bad_rows() {
    assert!(KnowledgeGraph::build([RawTriple::new("a", "r", "b", f64::NAN)]).is_err());
    assert!(KnowledgeGraph::build([RawTriple::new("a", "r", "b", -1.0)]).is_err());
    assert!(KnowledgeGraph::build([RawTriple::new("  ", "r", "b", 1.0)]).is_err());
    assert!(KnowledgeGraph::build([RawTriple::new("a", " ", "b", 1.0)]).is_err());
    let empty = KnowledgeGraph::build(Vec::new()).unwrap();
    assert!(empty.is_empty());
    assert_eq!(empty.entity_id("a"), None);
}
