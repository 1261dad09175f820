//! `RRIX1` on-disk index format, little-endian throughout:
//!
//! ```text
//! "RRIX1" u32 n_docs
//!   n_docs x { u32 id_len, id bytes, u32 doc_len }
//! u32 n_terms
//!   n_terms x { u32 term_len, term bytes, u32 n_postings, n_postings x { u32 doc, u32 tf } }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use reasonrank_core::bm25::{InvertedIndex, Posting};

use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"RRIX1";

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_index(index: &InvertedIndex) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + index.postings_count() * 8);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, index.doc_count() as u32);
    for (id, &len) in index.doc_ids().iter().zip(index.doc_lengths()) {
        put_str(&mut out, id);
        put_u32(&mut out, len);
    }
    put_u32(&mut out, index.term_count() as u32);
    for (term, postings) in index.terms() {
        put_str(&mut out, term);
        put_u32(&mut out, postings.len() as u32);
        for p in postings {
            put_u32(&mut out, p.doc);
            put_u32(&mut out, p.tf);
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let n = self.u32()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format!("invalid UTF-8 at byte {at}"))
    }
}

pub fn decode_index(bytes: &[u8]) -> std::result::Result<InvertedIndex, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err("not an RRIX1 file".into());
    }
    let n_docs = r.u32()? as usize;
    let mut doc_ids = Vec::with_capacity(n_docs.min(1 << 20));
    let mut doc_lengths = Vec::with_capacity(n_docs.min(1 << 20));
    for _ in 0..n_docs {
        doc_ids.push(r.string()?);
        doc_lengths.push(r.u32()?);
    }
    let n_terms = r.u32()?;
    let mut terms = BTreeMap::new();
    for _ in 0..n_terms {
        let term = r.string()?;
        let n = r.u32()? as usize;
        let mut postings = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            postings.push(Posting {
                doc: r.u32()?,
                tf: r.u32()?,
            });
        }
        if terms.insert(term.clone(), postings).is_some() {
            return Err(format!("term {term:?} stored twice"));
        }
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    InvertedIndex::from_parts(terms, doc_ids, doc_lengths).map_err(|e| e.to_string())
}

pub fn write_index(index: &InvertedIndex, path: &Path) -> Result<()> {
    crate::corpus_io::write_file(path, &encode_index(index))
}

pub fn read_index(path: &Path) -> Result<InvertedIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_index(&bytes).map_err(|m| Error::Format(format!("{}: {m}", path.display())))
}
