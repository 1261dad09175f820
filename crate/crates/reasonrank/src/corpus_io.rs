//! JSONL corpora and queries, TREC qrels and run files.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use reasonrank_core::{Document, Qrels, Query, RankedList};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub query_id: String,
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = read(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (no, line) in lines(&text) {
        let doc: Document =
            serde_json::from_str(line).map_err(|e| Error::parse(path, no, e.to_string()))?;
        if doc.doc_id.is_empty() {
            return Err(Error::parse(path, no, "empty doc_id"));
        }
        if doc.text.trim().is_empty() {
            return Err(Error::parse(path, no, format!("empty text for {}", doc.doc_id)));
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::parse(
                path,
                no,
                format!("duplicate doc_id {} (line {no})", doc.doc_id),
            ));
        }
        out.push(doc);
    }
    Ok(out)
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>> {
    let text = read(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (no, line) in lines(&text) {
        let q: Query = serde_json::from_str(line).map_err(|e| Error::parse(path, no, e.to_string()))?;
        if q.query_id.is_empty() {
            return Err(Error::parse(path, no, "empty query_id"));
        }
        if !seen.insert(q.query_id.clone()) {
            return Err(Error::parse(
                path,
                no,
                format!("duplicate query_id {} (line {no})", q.query_id),
            ));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn parse_qrels(text: &str, path: &Path) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (no, line) in lines(text) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::parse(path, no, format!("expected 4 fields, found {}", f.len())));
        }
        let grade: i64 = f[3]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("non-integer grade {:?}", f[3])))?;
        if grade < 0 {
            return Err(Error::parse(path, no, format!("negative grade {grade}")));
        }
        let grade = u32::try_from(grade)
            .map_err(|_| Error::parse(path, no, format!("grade {grade} out of range")))?;
        qrels
            .insert(f[0], f[2], grade)
            .map_err(|e| Error::parse(path, no, e.to_string()))?;
    }
    Ok(qrels)
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    parse_qrels(&read(path)?, path)
}

pub fn parse_run(text: &str, path: &Path) -> Result<Vec<RunEntry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (no, line) in lines(text) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(Error::parse(path, no, format!("expected 6 fields, found {}", f.len())));
        }
        let rank: u32 = f[3]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("non-integer rank {:?}", f[3])))?;
        if rank == 0 {
            return Err(Error::parse(path, no, "rank 0 (ranks are 1-based)"));
        }
        let score: f64 = f[4]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("bad score {:?}", f[4])))?;
        if !score.is_finite() {
            return Err(Error::parse(path, no, "non-finite score"));
        }
        if !seen.insert((f[0].to_string(), f[2].to_string())) {
            return Err(Error::parse(path, no, format!("document {} listed twice for {}", f[2], f[0])));
        }
        out.push(RunEntry {
            query_id: f[0].into(),
            doc_id: f[2].into(),
            rank,
            score,
            tag: f[5].into(),
        });
    }
    Ok(out)
}

pub fn load_run(path: &Path) -> Result<Vec<RunEntry>> {
    parse_run(&read(path)?, path)
}

pub fn format_run(entries: &[RunEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(&format!(
            "{} Q0 {} {} {:.6} {}\n",
            e.query_id, e.doc_id, e.rank, e.score, e.tag
        ));
    }
    s
}

pub fn write_run(entries: &[RunEntry], path: &Path) -> Result<()> {
    write_file(path, format_run(entries).as_bytes())
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn run_entries(list: &RankedList, tag: &str) -> Vec<RunEntry> {
    list.entries
        .iter()
        .enumerate()
        .map(|(i, (doc, score))| RunEntry {
            query_id: list.query_id.clone(),
            doc_id: doc.clone(),
            rank: i as u32 + 1,
            score: *score,
            tag: tag.into(),
        })
        .collect()
}

/// Groups run entries per query, ordered by rank. Queries come out sorted by id.
pub fn ranked_lists(entries: &[RunEntry]) -> BTreeMap<String, RankedList> {
    let mut grouped: BTreeMap<String, Vec<&RunEntry>> = BTreeMap::new();
    for e in entries {
        grouped.entry(e.query_id.clone()).or_default().push(e);
    }
    grouped
        .into_iter()
        .map(|(q, mut es)| {
            es.sort_by_key(|e| e.rank);
            let list = RankedList {
                query_id: q.clone(),
                entries: es.iter().map(|e| (e.doc_id.clone(), e.score)).collect(),
            };
            (q, list)
        })
        .collect()
}

/// Checks the run-file invariants: ranks `1..=n` per query, scores non-increasing.
pub fn validate_run(entries: &[RunEntry]) -> std::result::Result<(), String> {
    let mut ranks: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for e in entries {
        if !ranks.entry(&e.query_id).or_default().insert(e.rank) {
            return Err(format!("rank {} repeated for {}", e.rank, e.query_id));
        }
    }
    for (q, r) in &ranks {
        if r.iter().copied().ne(1..=r.len() as u32) {
            return Err(format!("ranks for {q} are not 1..={}", r.len()));
        }
    }
    for list in ranked_lists(entries).values() {
        if list.entries.windows(2).any(|w| w[0].1 < w[1].1) {
            return Err(format!("scores increase with rank for {}", list.query_id));
        }
    }
    Ok(())
}
