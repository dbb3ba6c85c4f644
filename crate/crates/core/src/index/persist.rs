//! On-disk index layout.
//!
//! ```text
//! manifest.json    format_version, schema, stats, sha256 of every file below
//! terms.tsv        attribute \t value \t offset \t length   (sorted; \t \n \r \\ escaped)
//! postings.bin     concatenated delta-varint sentence-id lists
//! slots.jsonl      {"doc_id": .., "slots": {..}} per document, corpus order
//! docstore.jsonl   interchange records, corpus order
//! locators.bin     per sentence id: doc ordinal u32 LE, sentence index u32 LE
//! ```
//!
//! A posting list is LEB128 varints: the first sentence id, then the gap
//! to each following id. Directories are written to a temporary sibling
//! and renamed into place.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CorpusStats, IndexError, IndexHandle, SlotStore};
use crate::ingest::parse_record_line;
use crate::query::{Term, TermField};
use crate::schema::Schema;

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const TERMS: &str = "terms.tsv";
const POSTINGS: &str = "postings.bin";
const SLOTS: &str = "slots.jsonl";
const DOCSTORE: &str = "docstore.jsonl";
const LOCATORS: &str = "locators.bin";
const DATA_FILES: [&str; 5] = [TERMS, POSTINGS, SLOTS, DOCSTORE, LOCATORS];

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    schema: Schema,
    stats: CorpusStats,
    checksums: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct SlotLine {
    doc_id: String,
    slots: BTreeMap<String, Vec<String>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn corrupt(file: &str, message: impl Into<String>) -> IndexError {
    IndexError::Corrupt {
        file: file.to_string(),
        message: message.into(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn write_varint(out: &mut Vec<u8>, mut v: u32) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

pub(crate) fn read_varint(bytes: &[u8], pos: &mut usize) -> Option<u32> {
    let mut v: u64 = 0;
    let mut shift = 0;
    loop {
        let b = *bytes.get(*pos)?;
        *pos += 1;
        v |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            return u32::try_from(v).ok();
        }
        shift += 7;
        if shift > 28 {
            return None;
        }
    }
}

fn encode_postings(ids: &[u32], out: &mut Vec<u8>) {
    let mut prev = 0;
    for (i, &id) in ids.iter().enumerate() {
        write_varint(out, if i == 0 { id } else { id - prev });
        prev = id;
    }
}

fn decode_postings(bytes: &[u8]) -> Option<Vec<u32>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let v = read_varint(bytes, &mut pos)?;
        let id = match out.last() {
            None => v,
            Some(&prev) if v > 0 => u32::checked_add(prev, v)?,
            Some(_) => return None,
        };
        out.push(id);
    }
    Some(out)
}

fn escape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_tsv(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

impl IndexHandle {
    /// Writes the index to `dir`. An existing directory is replaced only
    /// when `overwrite` is set.
    pub fn persist(&self, dir: impl AsRef<Path>, overwrite: bool) -> Result<(), IndexError> {
        let dir = dir.as_ref();
        if dir.exists() && !overwrite {
            return Err(IndexError::AlreadyExists(dir.to_path_buf()));
        }
        let files = self.encode_files();
        let checksums = files
            .iter()
            .map(|(name, bytes)| (name.to_string(), sha256_hex(bytes)))
            .collect();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            schema: self.schema.clone(),
            stats: self.stats,
            checksums,
        };

        let tmp = sibling(dir, "tmp");
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
        }
        fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
        for (name, bytes) in &files {
            let path = tmp.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        let manifest_path = tmp.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;

        if dir.exists() {
            let old = sibling(dir, "old");
            fs::rename(dir, &old).map_err(io_err(dir))?;
            fs::rename(&tmp, dir).map_err(io_err(dir))?;
            fs::remove_dir_all(&old).map_err(io_err(&old))?;
        } else {
            fs::rename(&tmp, dir).map_err(io_err(dir))?;
        }
        Ok(())
    }

    fn encode_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut terms: Vec<(&Term, &Vec<u32>)> = self.term_iter().collect();
        terms.sort_by(|a, b| (a.0.field.name(), &a.0.value).cmp(&(b.0.field.name(), &b.0.value)));
        let mut tsv = String::new();
        let mut postings = Vec::new();
        for (term, ids) in terms {
            let offset = postings.len();
            encode_postings(ids, &mut postings);
            tsv.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                term.field.name(),
                escape_tsv(&term.value),
                offset,
                postings.len() - offset
            ));
        }

        let mut slots = String::new();
        let mut docstore = String::new();
        for (doc, record) in self.docs.iter().zip(&self.records) {
            let line = SlotLine {
                doc_id: doc.id.clone(),
                slots: doc.slots.clone(),
            };
            slots.push_str(&serde_json::to_string(&line).expect("slot line serializes"));
            slots.push('\n');
            docstore.push_str(record);
            docstore.push('\n');
        }

        let mut locators = Vec::with_capacity(self.locators.len() * 8);
        for &(doc, idx) in &self.locators {
            locators.extend_from_slice(&doc.to_le_bytes());
            locators.extend_from_slice(&idx.to_le_bytes());
        }

        vec![
            (TERMS, tsv.into_bytes()),
            (POSTINGS, postings),
            (SLOTS, slots.into_bytes()),
            (DOCSTORE, docstore.into_bytes()),
            (LOCATORS, locators),
        ]
    }

    /// Opens an index directory written by [`IndexHandle::persist`],
    /// verifying the format version and every file checksum.
    pub fn open(dir: impl AsRef<Path>) -> Result<IndexHandle, IndexError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.is_file() {
            return Err(IndexError::NotAnIndex(dir.to_path_buf()));
        }
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| corrupt(MANIFEST, e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt(MANIFEST, "missing format_version"))?;
        let version = u32::try_from(version).unwrap_or(u32::MAX);
        if version > FORMAT_VERSION {
            return Err(IndexError::FutureVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        if version != FORMAT_VERSION {
            return Err(IndexError::VersionMismatch {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let manifest: Manifest = serde_json::from_value(raw).map_err(|e| corrupt(MANIFEST, e.to_string()))?;
        manifest.schema.check().map_err(|e| corrupt(MANIFEST, e.to_string()))?;

        let mut files: HashMap<&str, Vec<u8>> = HashMap::new();
        for name in DATA_FILES {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let expected = manifest
                .checksums
                .get(name)
                .ok_or_else(|| corrupt(MANIFEST, format!("no checksum for {name}")))?;
            if &sha256_hex(&bytes) != expected {
                return Err(IndexError::Checksum(name.to_string()));
            }
            files.insert(name, bytes);
        }
        decode_files(manifest, files)
    }
}

fn sibling(dir: &Path, tag: &str) -> PathBuf {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let parent = dir.parent().unwrap_or_else(|| Path::new("."));
    parent.join(format!(".{name}.{tag}-{}", std::process::id()))
}

fn utf8<'a>(name: &str, bytes: &'a [u8]) -> Result<&'a str, IndexError> {
    std::str::from_utf8(bytes).map_err(|e| corrupt(name, e.to_string()))
}

fn decode_files(manifest: Manifest, files: HashMap<&str, Vec<u8>>) -> Result<IndexHandle, IndexError> {
    let mut docs = Vec::new();
    let mut records = Vec::new();
    let mut doc_by_id = HashMap::new();
    for (i, line) in utf8(DOCSTORE, &files[DOCSTORE])?.lines().enumerate() {
        let doc = parse_record_line(line).map_err(|m| corrupt(DOCSTORE, format!("line {}: {m}", i + 1)))?;
        if doc_by_id.insert(doc.id.clone(), i as u32).is_some() {
            return Err(corrupt(DOCSTORE, format!("duplicate id {:?}", doc.id)));
        }
        docs.push(doc);
        records.push(line.to_string());
    }

    let mut slots = SlotStore::default();
    let slot_lines: Vec<&str> = utf8(SLOTS, &files[SLOTS])?.lines().collect();
    if slot_lines.len() != docs.len() {
        return Err(corrupt(SLOTS, "line count differs from docstore"));
    }
    for (i, line) in slot_lines.into_iter().enumerate() {
        let parsed: SlotLine = serde_json::from_str(line).map_err(|e| corrupt(SLOTS, e.to_string()))?;
        if parsed.doc_id != docs[i].id {
            return Err(corrupt(SLOTS, format!("line {} is for {:?}", i + 1, parsed.doc_id)));
        }
        slots.insert(i as u32, &parsed.slots);
    }

    let raw = &files[LOCATORS];
    if raw.len() % 8 != 0 {
        return Err(corrupt(LOCATORS, "truncated"));
    }
    let locators: Vec<(u32, u32)> = raw
        .chunks_exact(8)
        .map(|c| {
            (
                u32::from_le_bytes(c[..4].try_into().unwrap()),
                u32::from_le_bytes(c[4..].try_into().unwrap()),
            )
        })
        .collect();
    let mut doc_start = Vec::with_capacity(docs.len());
    let mut sid = 0usize;
    for (ordinal, doc) in docs.iter().enumerate() {
        doc_start.push(sid as u32);
        for idx in 0..doc.sentences.len() {
            if locators.get(sid) != Some(&(ordinal as u32, idx as u32)) {
                return Err(corrupt(LOCATORS, format!("sentence {sid} does not match docstore")));
            }
            sid += 1;
        }
    }
    if sid != locators.len() {
        return Err(corrupt(LOCATORS, "extra sentences"));
    }

    let postings_bytes = &files[POSTINGS];
    let mut postings = HashMap::new();
    for (i, line) in utf8(TERMS, &files[TERMS])?.lines().enumerate() {
        let bad = |m: &str| corrupt(TERMS, format!("line {}: {m}", i + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        let [field, value, offset, len] = cols[..] else {
            return Err(bad("expected 4 columns"));
        };
        let field = TermField::from_name(field).ok_or_else(|| bad("unknown attribute"))?;
        let value = unescape_tsv(value).ok_or_else(|| bad("bad escape"))?;
        let offset: usize = offset.parse().map_err(|_| bad("bad offset"))?;
        let len: usize = len.parse().map_err(|_| bad("bad length"))?;
        let slice = offset
            .checked_add(len)
            .and_then(|end| postings_bytes.get(offset..end))
            .ok_or_else(|| corrupt(POSTINGS, "truncated"))?;
        let ids = decode_postings(slice).ok_or_else(|| corrupt(POSTINGS, format!("bad list for term line {}", i + 1)))?;
        if ids.last().is_some_and(|&last| last as usize >= locators.len()) {
            return Err(corrupt(POSTINGS, "sentence id out of range"));
        }
        postings.insert(Term::new(field, value), ids);
    }

    let handle = IndexHandle {
        schema: manifest.schema,
        docs,
        records,
        doc_by_id,
        locators,
        doc_start,
        postings,
        slots,
        stats: manifest.stats,
    };
    let s = handle.stats;
    if s.procedures != handle.docs.len() as u64
        || s.sentences != handle.locators.len() as u64
        || s.terms != handle.postings.len() as u64
    {
        return Err(corrupt(MANIFEST, "stats do not match index contents"));
    }
    Ok(handle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;
    use crate::ingest::{generate_fixtures, FixtureSpec};
    use proptest::prelude::*;

    fn small_index() -> IndexHandle {
        let docs = generate_fixtures(&FixtureSpec::standard(5, 40)).unwrap();
        build_index(docs, &Schema::default()).unwrap()
    }

    #[test]
    fn round_trip_preserves_lookups() {
        let h = small_index();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx");
        h.persist(&path, false).unwrap();
        let back = IndexHandle::open(&path).unwrap();
        assert_eq!(back.stats(), h.stats());
        for (term, ids) in h.term_iter() {
            assert_eq!(back.postings(term), ids.as_slice());
        }
        assert_eq!(back.docs(), h.docs());
        assert_eq!(back.slot_store(), h.slot_store());
        assert_eq!(back.record(&h.docs()[3].id), h.record(&h.docs()[3].id));
        assert_eq!(back.doc_sentences(7), h.doc_sentences(7));
    }

    #[test]
    fn refuses_overwrite_unless_asked() {
        let h = small_index();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx");
        h.persist(&path, false).unwrap();
        assert!(matches!(h.persist(&path, false), Err(IndexError::AlreadyExists(_))));
        h.persist(&path, true).unwrap();
        IndexHandle::open(&path).unwrap();
        // no temp or backup directories left behind
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn empty_dir_is_not_an_index() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(IndexHandle::open(dir.path()), Err(IndexError::NotAnIndex(_))));
    }

    #[test]
    fn future_version_refused() {
        let h = small_index();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx");
        h.persist(&path, false).unwrap();
        let mpath = path.join(MANIFEST);
        let text = fs::read_to_string(&mpath).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        fs::write(&mpath, text).unwrap();
        let err = IndexHandle::open(&path).unwrap_err();
        assert!(matches!(err, IndexError::FutureVersion { found: 7, supported: 1 }));
        assert!(err.to_string().contains("newer"));
    }

    #[test]
    fn flipped_byte_detected_in_every_file() {
        let h = small_index();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx");
        h.persist(&path, false).unwrap();
        for name in DATA_FILES {
            let p = path.join(name);
            let orig = fs::read(&p).unwrap();
            let mut bytes = orig.clone();
            let mid = bytes.len() / 2;
            bytes[mid] ^= 0x01;
            fs::write(&p, &bytes).unwrap();
            assert!(matches!(IndexHandle::open(&path), Err(IndexError::Checksum(ref f)) if f == name), "{name}");
            bytes.truncate(mid);
            fs::write(&p, &bytes).unwrap();
            assert!(matches!(IndexHandle::open(&path), Err(IndexError::Checksum(_))));
            fs::write(&p, &orig).unwrap();
        }
        IndexHandle::open(&path).unwrap();
    }

    #[test]
    fn tsv_escapes() {
        for s in ["plain", "a\tb", "x\\ny", "\n\r\\"] {
            assert_eq!(unescape_tsv(&escape_tsv(s)).as_deref(), Some(s));
            assert!(!escape_tsv(s).contains('\t'));
        }
        assert_eq!(unescape_tsv("bad\\q"), None);
    }

    proptest! {
        #[test]
        fn postings_codec_round_trip(set in prop::collection::btree_set(any::<u32>(), 0..200)) {
            let ids: Vec<u32> = set.into_iter().collect();
            let mut buf = Vec::new();
            encode_postings(&ids, &mut buf);
            prop_assert_eq!(decode_postings(&buf), Some(ids));
        }
    }

    #[test]
    fn decode_rejects_zero_gap_and_overlong() {
        assert_eq!(decode_postings(&[3, 0]), None);
        assert_eq!(decode_postings(&[0x80]), None);
        assert_eq!(decode_postings(&[0xff, 0xff, 0xff, 0xff, 0xff, 0x01]), None);
    }
}
