//! Binary graph cache.
//!
//! ```text
//! magic "KHOPGRPH" | format version u32 | body length u64 | body | sha256(body)
//! body: entity names, relation names, then (head, rel, tail, weight) rows
//! ```
//!
//! All integers are little-endian; names are u32-length-prefixed UTF-8.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use khop::graph::GraphBuilder;
use khop::KnowledgeGraph;
use sha2::{Digest, Sha256};

const MAGIC: &[u8; 8] = b"KHOPGRPH";
pub const FORMAT_VERSION: u32 = 1;

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode(kg: &KnowledgeGraph) -> Vec<u8> {
    let mut body = Vec::with_capacity(kg.triple_count() * 20 + kg.entity_count() * 16);
    body.extend_from_slice(&(kg.entity_count() as u32).to_le_bytes());
    for name in kg.entity_surfaces() {
        put_str(&mut body, name);
    }
    body.extend_from_slice(&(kg.relation_count() as u32).to_le_bytes());
    for rel in kg.relations() {
        put_str(&mut body, kg.relation_name(rel));
    }
    body.extend_from_slice(&(kg.triple_count() as u64).to_le_bytes());
    for t in kg.triples() {
        body.extend_from_slice(&(t.head.index() as u32).to_le_bytes());
        body.extend_from_slice(&(t.rel.index() as u32).to_le_bytes());
        body.extend_from_slice(&(t.tail.index() as u32).to_le_bytes());
        body.extend_from_slice(&t.weight.to_le_bytes());
    }

    let mut out = Vec::with_capacity(body.len() + 52);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&Sha256::digest(&body));
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        ensure!(self.buf.len() - self.pos >= n, "truncated graph cache");
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<&'a str> {
        let len = self.u32()? as usize;
        std::str::from_utf8(self.take(len)?).context("graph cache holds invalid UTF-8")
    }

    fn names(&mut self) -> Result<Vec<&'a str>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.string()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<KnowledgeGraph> {
    ensure!(bytes.len() >= 20 && &bytes[..8] == MAGIC, "not a graph cache (bad magic)");
    let mut header = Reader { buf: bytes, pos: 8 };
    let version = header.u32()?;
    if version != FORMAT_VERSION {
        bail!("unsupported graph cache version {version} (expected {FORMAT_VERSION})");
    }
    let len = usize::try_from(header.u64()?).context("graph cache too large")?;
    let body = header.take(len)?;
    let digest = header.take(32)?;
    ensure!(header.pos == bytes.len(), "trailing bytes after graph cache");
    ensure!(Sha256::digest(body).as_slice() == digest, "graph cache checksum mismatch");

    let mut r = Reader { buf: body, pos: 0 };
    let entities = r.names()?;
    let relations = r.names()?;
    let triples = r.u64()?;
    let mut builder = GraphBuilder::new();
    for _ in 0..triples {
        let (h, rel, t) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let w = r.f64()?;
        let (Some(h), Some(rel), Some(t)) = (entities.get(h), relations.get(rel), entities.get(t)) else {
            bail!("graph cache row references an unknown handle");
        };
        builder.add(h, rel, t, w)?;
    }
    ensure!(r.pos == body.len(), "trailing bytes in graph cache body");
    Ok(builder.build())
}

pub fn write(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    fs::write(path, encode(kg)).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<KnowledgeGraph> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("loading {}", path.display()))
}
