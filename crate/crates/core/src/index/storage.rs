//! Binary index persistence.
//!
//! Little-endian throughout. Layout:
//!
//! ```text
//! magic    4  b"MVNR"
//! version  u16
//! kind     u8           0 = flat, 1 = graph
//! k        u64
//! count    u64
//! vectors  count * (2k+2) * f64     contiguous
//! ids      count * (u32 len + utf8 bytes)
//! -- graph only --
//! max_degree u32, ef_construction u32, ef_search u32, seed u64
//! entry_point u32, max_level u32
//! levels   count * u32
//! adjacency  per node, per level 0..=levels[node]: u32 len + len * u32
//! ```
//!
//! Loading is strict: wrong magic, wrong version, short reads, out-of-range
//! node ids and trailing bytes are all distinct errors, and no partially
//! constructed index ever escapes.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::transform::TransformedDoc;

use super::{FlatIndex, GraphIndex, GraphParams, VectorIndex};

const MAGIC: [u8; 4] = *b"MVNR";
const VERSION: u16 = 1;
const KIND_FLAT: u8 = 0;
const KIND_GRAPH: u8 = 1;

/// Serialize an index to `path`.
pub fn persist(index: &VectorIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    match index {
        VectorIndex::Flat(ix) => {
            buf.push(KIND_FLAT);
            write_docs(&mut buf, ix.k(), ix.docs());
        }
        VectorIndex::Graph(ix) => {
            buf.push(KIND_GRAPH);
            write_docs(&mut buf, ix.k(), ix.docs());
            let p = ix.params();
            buf.extend_from_slice(&(p.max_degree as u32).to_le_bytes());
            buf.extend_from_slice(&(p.ef_construction as u32).to_le_bytes());
            buf.extend_from_slice(&(p.ef_search as u32).to_le_bytes());
            buf.extend_from_slice(&p.seed.to_le_bytes());
            buf.extend_from_slice(&ix.entry_point().to_le_bytes());
            buf.extend_from_slice(&ix.max_level().to_le_bytes());
            for levels in ix.adjacency() {
                buf.extend_from_slice(&((levels.len() - 1) as u32).to_le_bytes());
            }
            for levels in ix.adjacency() {
                for neighbors in levels {
                    buf.extend_from_slice(&(neighbors.len() as u32).to_le_bytes());
                    for &n in neighbors {
                        buf.extend_from_slice(&n.to_le_bytes());
                    }
                }
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn write_docs(buf: &mut Vec<u8>, k: usize, docs: &[TransformedDoc]) {
    buf.extend_from_slice(&(k as u64).to_le_bytes());
    buf.extend_from_slice(&(docs.len() as u64).to_le_bytes());
    for d in docs {
        for v in d.vec() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for d in docs {
        let id = d.id().as_bytes();
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id);
    }
}

/// Deserialize an index from `path`.
pub fn load(path: impl AsRef<Path>) -> Result<VectorIndex> {
    let data = fs::read(path)?;
    let mut r = Reader {
        data: &data,
        pos: 0,
    };

    let magic = r.take("magic", 4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let kind = r.u8("kind")?;
    let (k, docs) = read_docs(&mut r)?;

    let index = match kind {
        KIND_FLAT => VectorIndex::Flat(FlatIndex::from_parts(k, docs)),
        KIND_GRAPH => {
            let params = GraphParams {
                max_degree: r.u32("max_degree")? as usize,
                ef_construction: r.u32("ef_construction")? as usize,
                ef_search: r.u32("ef_search")? as usize,
                seed: r.u64("seed")?,
            };
            let entry_point = r.u32("entry_point")?;
            let max_level = r.u32("max_level")?;
            let count = docs.len();
            if entry_point as usize >= count {
                return Err(Error::CorruptField {
                    field: "entry_point",
                    detail: format!("{entry_point} out of range for {count} docs"),
                });
            }
            let mut levels = Vec::with_capacity(count);
            for _ in 0..count {
                levels.push(r.u32("levels")?);
            }
            let mut adjacency = Vec::with_capacity(count);
            for &level in &levels {
                let mut node_levels = Vec::with_capacity(level as usize + 1);
                for _ in 0..=level {
                    let len = r.u32("adjacency length")? as usize;
                    let mut neighbors = Vec::with_capacity(len.min(1 << 20));
                    for _ in 0..len {
                        let n = r.u32("adjacency entry")?;
                        if n as usize >= count {
                            return Err(Error::CorruptField {
                                field: "adjacency",
                                detail: format!("neighbor {n} out of range for {count} docs"),
                            });
                        }
                        neighbors.push(n);
                    }
                    node_levels.push(neighbors);
                }
                adjacency.push(node_levels);
            }
            VectorIndex::Graph(GraphIndex::from_parts(
                k,
                docs,
                adjacency,
                entry_point,
                max_level,
                params,
            ))
        }
        other => {
            return Err(Error::CorruptField {
                field: "kind",
                detail: format!("unknown index kind {other}"),
            })
        }
    };

    if r.pos != data.len() {
        return Err(Error::TrailingBytes(data.len() - r.pos));
    }
    Ok(index)
}

fn read_docs(r: &mut Reader<'_>) -> Result<(usize, Vec<TransformedDoc>)> {
    let k = r.u64("k")? as usize;
    if k == 0 {
        return Err(Error::CorruptField {
            field: "k",
            detail: "dimension is zero".into(),
        });
    }
    let count = r.u64("count")? as usize;
    if count == 0 {
        return Err(Error::CorruptField {
            field: "count",
            detail: "empty corpus".into(),
        });
    }
    let dim = 2 * k + 2;
    let mut vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let bytes = r.take("vectors", dim * 8)?;
        let mut vec = Vec::with_capacity(dim);
        for chunk in bytes.chunks_exact(8) {
            vec.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        vectors.push(vec);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut docs = Vec::with_capacity(count);
    for vec in vectors {
        let len = r.u32("id length")? as usize;
        let bytes = r.take("id bytes", len)?;
        let id = std::str::from_utf8(bytes)
            .map_err(|_| Error::CorruptField {
                field: "id",
                detail: "invalid utf-8".into(),
            })?
            .to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        docs.push(TransformedDoc::from_parts(id, vec));
    }
    Ok((k, docs))
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, section: &'static str, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated {
            section,
            needed: n,
        })?;
        if end > self.data.len() {
            return Err(Error::Truncated {
                section,
                needed: end - self.data.len(),
            });
        }
        let slice = &self.data[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self, section: &'static str) -> Result<u8> {
        Ok(self.take(section, 1)?[0])
    }

    fn u16(&mut self, section: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(section, 2)?.try_into().unwrap()))
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(section, 4)?.try_into().unwrap()))
    }

    fn u64(&mut self, section: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(section, 8)?.try_into().unwrap()))
    }
}
