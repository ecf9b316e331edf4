//! Test-only fixtures and brute-force oracles, shared with the CLI tests
//! through a `#[path]` include.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use khop::graph::RawTriple;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Edge = (String, String, String);

/// `(e1h, r1, key, r2, e2t)` for compositive paths, `(key, r1, e1t, r2, e2t)`
/// for conjunctive pairs.
pub type PathKey = (String, String, String, String, String);

pub fn fixture(rows: &[(&str, &str, &str)]) -> Vec<RawTriple> {
    rows.iter().map(|&(h, r, t)| RawTriple::new(h, r, t, 1.0)).collect()
}

pub fn figure_one() -> Vec<RawTriple> {
    fixture(&[
        ("revolving door", "AtLocation", "bank"),
        ("revolving door", "AtLocation", "mall"),
        ("revolving door", "AtLocation", "hotel"),
        ("bank", "RelatedTo", "security"),
    ])
}

/// Up to 50 entities, 5 relations and 300 triples (before dedup).
pub fn random_graph(seed: u64) -> Vec<RawTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entities = rng.random_range(2..=50usize);
    let relations = rng.random_range(1..=5usize);
    let triples = rng.random_range(1..=300usize);
    (0..triples)
        .map(|_| {
            let h = rng.random_range(0..entities);
            let t = rng.random_range(0..entities);
            let r = rng.random_range(0..relations);
            RawTriple::new(&format!("e{h}"), &format!("r{r}"), &format!("e{t}"), 1.0)
        })
        .collect()
}

/// Linear-scan view of a triple list. Knows nothing about the graph index.
pub struct Oracle {
    pub edges: Vec<Edge>,
    set: HashSet<Edge>,
    pub entities: BTreeSet<String>,
}

impl Oracle {
    pub fn new(raw: &[RawTriple]) -> Self {
        let mut edges: Vec<Edge> = raw
            .iter()
            .map(|t| (t.head.clone(), t.relation.clone(), t.tail.clone()))
            .collect();
        edges.sort();
        edges.dedup();
        let entities = edges
            .iter()
            .flat_map(|(h, _, t)| [h.clone(), t.clone()])
            .collect();
        let set = edges.iter().cloned().collect();
        Oracle { edges, set, entities }
    }

    pub fn contains(&self, h: &str, r: &str, t: &str) -> bool {
        self.set.contains(&(h.to_string(), r.to_string(), t.to_string()))
    }

    pub fn tails(&self, h: &str, r: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(eh, er, _)| eh == h && er == r)
            .map(|(_, _, t)| t.clone())
            .collect()
    }

    pub fn heads(&self, r: &str, t: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(_, er, et)| er == r && et == t)
            .map(|(h, _, _)| h.clone())
            .collect()
    }

    pub fn compositive_ok(&self, path: &PathKey, e3: &str) -> bool {
        let (e1h, r1, key, r2, e2t) = path;
        self.contains(e1h, r1, e3) && e3 != key && e3 != e1h && !self.contains(e3, r2, e2t)
    }

    pub fn conjunctive_ok(&self, pair: &PathKey, e3: &str) -> bool {
        let (key, r1, e1t, r2, e2t) = pair;
        e3 != key && (self.contains(e3, r1, e1t) != self.contains(e3, r2, e2t))
    }

    /// Every compositive path with its full distractor set.
    pub fn compositive(&self) -> BTreeMap<PathKey, BTreeSet<String>> {
        let mut out = BTreeMap::new();
        for (e1h, r1, key) in &self.edges {
            for (k2, r2, e2t) in &self.edges {
                if k2 != key || key == e1h || key == e2t || e2t == e1h {
                    continue;
                }
                let path = (e1h.clone(), r1.clone(), key.clone(), r2.clone(), e2t.clone());
                let distractors = self
                    .entities
                    .iter()
                    .filter(|e3| self.compositive_ok(&path, e3))
                    .cloned()
                    .collect();
                out.insert(path, distractors);
            }
        }
        out
    }

    /// Every conjunctive pair (ordered by relation, then tail) with its full
    /// distractor set.
    pub fn conjunctive(&self) -> BTreeMap<PathKey, BTreeSet<String>> {
        let mut out = BTreeMap::new();
        for (key, r1, e1t) in &self.edges {
            for (k2, r2, e2t) in &self.edges {
                if k2 != key || (r1, e1t) >= (r2, e2t) || e1t == e2t || key == e1t || key == e2t {
                    continue;
                }
                let pair = (key.clone(), r1.clone(), e1t.clone(), r2.clone(), e2t.clone());
                let distractors = self
                    .entities
                    .iter()
                    .filter(|e3| self.conjunctive_ok(&pair, e3))
                    .cloned()
                    .collect();
                out.insert(pair, distractors);
            }
        }
        out
    }
}

pub fn path_key(provenance: &[[String; 3]]) -> PathKey {
    let [a, b] = provenance else {
        panic!("expected two provenance triples, got {}", provenance.len());
    };
    (a[0].clone(), a[1].clone(), a[2].clone(), b[1].clone(), b[2].clone())
}

pub fn conjunctive_key(provenance: &[[String; 3]]) -> PathKey {
    let [a, b] = provenance else {
        panic!("expected two provenance triples, got {}", provenance.len());
    };
    assert_eq!(a[0], b[0], "conjunctive triples share a head");
    (a[0].clone(), a[1].clone(), a[2].clone(), b[1].clone(), b[2].clone())
}

fn zipf_pick(rng: &mut ChaCha8Rng, n: usize, s: f64) -> usize {
    let weights: Vec<f64> = (1..=n).map(|k| 1.0 / (k as f64).powf(s)).collect();
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        x -= w;
        if x <= 0.0 {
            return i;
        }
    }
    n - 1
}

/// Typed synthetic commonsense graph. Each relation links a fixed head type
/// to a fixed tail type. Head and tail popularity both follow a Zipf law,
/// but over independent orderings, so popular tails are not automatically
/// popular heads.
pub fn typed_graph(seed: u64, triples: usize) -> Vec<RawTriple> {
    const TYPES: [(&str, usize); 5] = [
        ("object", 240),
        ("place", 120),
        ("activity", 120),
        ("person", 80),
        ("property", 80),
    ];
    const RELATIONS: [(&str, usize, usize); 8] = [
        ("AtLocation", 0, 1),
        ("UsedFor", 0, 2),
        ("HasProperty", 0, 4),
        ("CapableOf", 3, 2),
        ("Desires", 3, 0),
        ("LocatedNear", 1, 1),
        ("HasSubevent", 2, 2),
        ("RelatedTo", 1, 4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tail_order: Vec<Vec<usize>> = TYPES
        .iter()
        .map(|&(_, n)| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(triples);
    while out.len() < triples {
        let (rel, ht, tt) = RELATIONS[rng.random_range(0..RELATIONS.len())];
        let (hname, hn) = TYPES[ht];
        let (tname, tn) = TYPES[tt];
        let h = format!("{hname}{}", zipf_pick(&mut rng, hn, 1.0));
        let t = format!("{tname}{}", tail_order[tt][zipf_pick(&mut rng, tn, 1.0)]);
        if h == t || !seen.insert((h.clone(), rel, t.clone())) {
            continue;
        }
        out.push(RawTriple::new(&h, rel, &t, 1.0));
    }
    out
}

/// Writes a ConceptNet-style assertions dump with a mix of kept, foreign
/// language, low-weight and malformed rows.
pub fn write_conceptnet_dump<W: Write>(out: &mut W, rows: usize, seed: u64) -> std::io::Result<()> {
    const RELS: [&str; 6] = ["AtLocation", "UsedFor", "IsA", "PartOf", "RelatedTo", "HasA"];
    const LANGS: [&str; 4] = ["en", "en", "en", "fr"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..rows {
        let rel = RELS[rng.random_range(0..RELS.len())];
        let h = rng.random_range(0..200_000u32);
        let t = rng.random_range(0..200_000u32);
        let hl = LANGS[rng.random_range(0..LANGS.len())];
        let tl = LANGS[rng.random_range(0..LANGS.len())];
        let weight = [0.5, 1.0, 1.0, 2.0, 3.5][rng.random_range(0..5)];
        match rng.random_range(0..100u32) {
            0 => writeln!(out, "/a/[broken{i}]\t/r/{rel}\t/c/en/x{h}")?,
            1 => writeln!(out, "/a/[{i}]\t/r/{rel}\t/c/en/x{h}\t/c/en/y{t}\t{{not json")?,
            _ => writeln!(
                out,
                "/a/[/r/{rel}/,/c/{hl}/x{h}/,/c/{tl}/y{t}/]\t/r/{rel}\t/c/{hl}/x{h}/n\t/c/{tl}/y{t}\t{{\"dataset\": \"/d/synthetic\", \"weight\": {weight}}}"
            )?,
        }
    }
    Ok(())
}

/// Independent row filter: five tab-separated fields, `/r/` relation, both
/// nodes `/c/en/...`, JSON metadata whose weight is at least `min_weight`.
pub fn independent_kept_count(text: &str, min_weight: f64) -> usize {
    text.lines()
        .filter(|line| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 5 || !fields[1].starts_with("/r/") {
                return false;
            }
            if !fields[2].starts_with("/c/en/") || !fields[3].starts_with("/c/en/") {
                return false;
            }
            match serde_json::from_str::<serde_json::Value>(fields[4]) {
                Ok(meta) => meta["weight"].as_f64().is_some_and(|w| w >= min_weight),
                Err(_) => false,
            }
        })
        .count()
}
