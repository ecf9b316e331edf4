//! Immutable, indexed in-memory triple store.
//!
//! Entities and relations are interned to dense `u32` handles. After
//! [`GraphBuilder::build`] the handles are canonical: they follow the sorted
//! order of the surface strings, so the same set of triples always produces
//! the same handles regardless of input order.
//!
//! Adjacency is stored in two CSR layouts, one keyed by head (sorted by
//! relation, then tail) and one keyed by tail (sorted by relation, then
//! head). `outgoing(h, r)` and `incoming(t, r)` are therefore contiguous
//! sorted slices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(u32);

macro_rules! handle_impl {
    ($ty:ident) => {
        impl $ty {
            pub fn from_index(index: usize) -> Self {
                $ty(u32::try_from(index).expect("handle overflows u32"))
            }

            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

handle_impl!(EntityId);
handle_impl!(RelationId);

/// One directed edge of a built graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
    pub weight: f64,
}

/// A triple spelled out with strings, as produced by ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub weight: f64,
}

impl RawTriple {
    pub fn new(head: &str, relation: &str, tail: &str, weight: f64) -> Self {
        RawTriple {
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
            weight,
        }
    }
}

/// Lowercases, maps underscores to spaces and collapses whitespace runs.
pub fn normalize_surface(raw: &str) -> String {
    let lowered = raw.to_lowercase().replace('_', " ");
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub triples: usize,
    pub entities: usize,
    pub relations: usize,
    pub duplicates_collapsed: usize,
    pub self_loops: usize,
}

#[derive(Default)]
struct Interner {
    lookup: std::collections::HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, name: String) -> u32 {
        if let Some(&id) = self.lookup.get(&name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("interner overflows u32");
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    /// Sorted names plus the old-handle -> new-handle map.
    fn into_canonical(self) -> (Vec<String>, Vec<u32>) {
        let mut order: Vec<u32> = (0..self.names.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| self.names[a as usize].cmp(&self.names[b as usize]));
        let mut remap = vec![0u32; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut names = self.names;
        let sorted = order
            .iter()
            .map(|&old| std::mem::take(&mut names[old as usize]))
            .collect();
        (sorted, remap)
    }
}

/// Single-writer accumulator for a [`KnowledgeGraph`].
#[derive(Default)]
pub struct GraphBuilder {
    entities: Interner,
    relations: Interner,
    edges: Vec<(u32, u32, u32, f64)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one edge. Entity surfaces are normalized; relation names are
    /// only trimmed.
    pub fn add(&mut self, head: &str, relation: &str, tail: &str, weight: f64) -> Result<()> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidWeight(weight));
        }
        let head_surface = normalize_surface(head);
        if head_surface.is_empty() {
            return Err(Error::EmptySurface(head.to_string()));
        }
        let tail_surface = normalize_surface(tail);
        if tail_surface.is_empty() {
            return Err(Error::EmptySurface(tail.to_string()));
        }
        let relation = relation.trim();
        if relation.is_empty() {
            return Err(Error::EmptyRelation);
        }
        let h = self.entities.intern(head_surface);
        let t = self.entities.intern(tail_surface);
        let r = self.relations.intern(relation.to_string());
        self.edges.push((h, r, t, weight));
        Ok(())
    }

    pub fn add_raw(&mut self, triple: &RawTriple) -> Result<()> {
        self.add(&triple.head, &triple.relation, &triple.tail, triple.weight)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn build(self) -> KnowledgeGraph {
        let (entity_names, entity_map) = self.entities.into_canonical();
        let (relation_names, relation_map) = self.relations.into_canonical();

        let mut edges: Vec<(u32, u32, u32, f64)> = self
            .edges
            .into_iter()
            .map(|(h, r, t, w)| {
                (
                    entity_map[h as usize],
                    relation_map[r as usize],
                    entity_map[t as usize],
                    w,
                )
            })
            .collect();
        edges.sort_unstable_by_key(|e| (e.0, e.1, e.2));

        let raw_len = edges.len();
        let mut deduped: Vec<(u32, u32, u32, f64)> = Vec::with_capacity(raw_len);
        for edge in edges {
            match deduped.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (edge.0, edge.1, edge.2) => {
                    if edge.3 > last.3 {
                        last.3 = edge.3;
                    }
                }
                _ => deduped.push(edge),
            }
        }
        let duplicates_collapsed = raw_len - deduped.len();
        let entity_count = entity_names.len();

        let mut out_offsets = vec![0u32; entity_count + 1];
        for &(h, _, _, _) in &deduped {
            out_offsets[h as usize + 1] += 1;
        }
        for i in 0..entity_count {
            out_offsets[i + 1] += out_offsets[i];
        }
        let out_rels = deduped.iter().map(|e| RelationId(e.1)).collect();
        let out_tails = deduped.iter().map(|e| EntityId(e.2)).collect();
        let weights = deduped.iter().map(|e| e.3).collect();

        let mut by_tail: Vec<(u32, u32, u32)> =
            deduped.iter().map(|&(h, r, t, _)| (t, r, h)).collect();
        by_tail.sort_unstable();
        let mut in_offsets = vec![0u32; entity_count + 1];
        for &(t, _, _) in &by_tail {
            in_offsets[t as usize + 1] += 1;
        }
        for i in 0..entity_count {
            in_offsets[i + 1] += in_offsets[i];
        }
        let in_rels = by_tail.iter().map(|e| RelationId(e.1)).collect();
        let in_heads = by_tail.iter().map(|e| EntityId(e.2)).collect();

        let self_loops = deduped.iter().filter(|e| e.0 == e.2).count();
        let stats = GraphStats {
            triples: deduped.len(),
            entities: entity_count,
            relations: relation_names.len(),
            duplicates_collapsed,
            self_loops,
        };

        KnowledgeGraph {
            entity_names,
            relation_names,
            out_offsets,
            out_rels,
            out_tails,
            weights,
            in_offsets,
            in_rels,
            in_heads,
            stats,
        }
    }
}

/// Immutable triple store with forward and backward adjacency.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    out_offsets: Vec<u32>,
    out_rels: Vec<RelationId>,
    out_tails: Vec<EntityId>,
    weights: Vec<f64>,
    in_offsets: Vec<u32>,
    in_rels: Vec<RelationId>,
    in_heads: Vec<EntityId>,
    stats: GraphStats,
}

impl KnowledgeGraph {
    /// Builds a graph from string triples. Rows with empty surfaces or
    /// invalid weights are rejected.
    pub fn build<I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = RawTriple>,
    {
        let mut builder = GraphBuilder::new();
        for triple in triples {
            builder.add_raw(&triple)?;
        }
        Ok(builder.build())
    }

    pub fn stats(&self) -> GraphStats {
        self.stats
    }

    pub fn triple_count(&self) -> usize {
        self.out_tails.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out_tails.is_empty()
    }

    pub fn entities(&self) -> impl ExactSizeIterator<Item = EntityId> {
        (0..self.entity_names.len()).map(EntityId::from_index)
    }

    pub fn relations(&self) -> impl ExactSizeIterator<Item = RelationId> {
        (0..self.relation_names.len()).map(RelationId::from_index)
    }

    pub fn entity_surface(&self, id: EntityId) -> &str {
        &self.entity_names[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relation_names[id.index()]
    }

    /// Looks up an entity by surface; the input is normalized first.
    pub fn entity_id(&self, surface: &str) -> Option<EntityId> {
        let normalized = normalize_surface(surface);
        self.entity_names
            .binary_search(&normalized)
            .ok()
            .map(EntityId::from_index)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_names
            .binary_search_by(|probe| probe.as_str().cmp(name.trim()))
            .ok()
            .map(RelationId::from_index)
    }

    /// Entity surfaces in handle order.
    pub fn entity_surfaces(&self) -> &[String] {
        &self.entity_names
    }

    fn out_range(&self, head: EntityId) -> std::ops::Range<usize> {
        let h = head.index();
        if h >= self.entity_names.len() {
            return 0..0;
        }
        self.out_offsets[h] as usize..self.out_offsets[h + 1] as usize
    }

    fn in_range(&self, tail: EntityId) -> std::ops::Range<usize> {
        let t = tail.index();
        if t >= self.entity_names.len() {
            return 0..0;
        }
        self.in_offsets[t] as usize..self.in_offsets[t + 1] as usize
    }

    fn rel_subrange(rels: &[RelationId], base: usize, rel: RelationId) -> std::ops::Range<usize> {
        let lo = rels.partition_point(|r| *r < rel);
        let hi = rels.partition_point(|r| *r <= rel);
        base + lo..base + hi
    }

    /// Tails `t` with `(head, rel, t)` in the graph, sorted by handle.
    pub fn outgoing(&self, head: EntityId, rel: RelationId) -> &[EntityId] {
        let range = self.out_range(head);
        let sub = Self::rel_subrange(&self.out_rels[range.clone()], range.start, rel);
        &self.out_tails[sub]
    }

    /// Heads `h` with `(h, rel, tail)` in the graph, sorted by handle.
    pub fn incoming(&self, tail: EntityId, rel: RelationId) -> &[EntityId] {
        let range = self.in_range(tail);
        let sub = Self::rel_subrange(&self.in_rels[range.clone()], range.start, rel);
        &self.in_heads[sub]
    }

    /// All `(rel, tail)` edges leaving `head`, sorted by relation then tail.
    pub fn out_edges(&self, head: EntityId) -> impl Iterator<Item = (RelationId, EntityId)> + '_ {
        let range = self.out_range(head);
        self.out_rels[range.clone()]
            .iter()
            .copied()
            .zip(self.out_tails[range].iter().copied())
    }

    /// All `(rel, head)` edges entering `tail`, sorted by relation then head.
    pub fn in_edges(&self, tail: EntityId) -> impl Iterator<Item = (RelationId, EntityId)> + '_ {
        let range = self.in_range(tail);
        self.in_rels[range.clone()]
            .iter()
            .copied()
            .zip(self.in_heads[range].iter().copied())
    }

    pub fn contains(&self, head: EntityId, rel: RelationId, tail: EntityId) -> bool {
        self.outgoing(head, rel).binary_search(&tail).is_ok()
    }

    pub fn weight(&self, head: EntityId, rel: RelationId, tail: EntityId) -> Option<f64> {
        let range = self.out_range(head);
        let sub = Self::rel_subrange(&self.out_rels[range.clone()], range.start, rel);
        let start = sub.start;
        self.out_tails[sub]
            .binary_search(&tail)
            .ok()
            .map(|i| self.weights[start + i])
    }

    /// Every triple, ordered by (head, relation, tail) handle.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.entities().flat_map(move |head| {
            let range = self.out_range(head);
            range.map(move |i| Triple {
                head,
                rel: self.out_rels[i],
                tail: self.out_tails[i],
                weight: self.weights[i],
            })
        })
    }

    pub fn raw_triples(&self) -> impl Iterator<Item = RawTriple> + '_ {
        self.triples().map(|t| self.to_raw(&t))
    }

    pub fn to_raw(&self, triple: &Triple) -> RawTriple {
        RawTriple::new(
            self.entity_surface(triple.head),
            self.relation_name(triple.rel),
            self.entity_surface(triple.tail),
            triple.weight,
        )
    }

    /// Distinct entities that occur as the tail of at least one triple.
    pub fn distinct_tails(&self) -> Vec<EntityId> {
        self.entities()
            .filter(|&e| !self.in_range(e).is_empty())
            .collect()
    }
}
