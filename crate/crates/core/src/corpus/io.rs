use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusRecord, Provenance};
use crate::teacher::CandidateRecord;

/// First line of every JSONL file written here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub kind: String,
    pub provenance: Provenance,
    pub count: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: expected a {expected:?} file, found {found:?}")]
    WrongKind { path: PathBuf, expected: String, found: String },
    #[error("{path}: header announces {announced} records but {found} follow")]
    CountMismatch { path: PathBuf, announced: usize, found: usize },
}

const CANDIDATES: &str = "candidates";
const CORPUS: &str = "corpus";

fn write_line<T: Serialize>(out: &mut impl Write, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(io::Error::other)?;
    out.write_all(b"\n")
}

fn write_jsonl<T: Serialize>(path: &Path, header: &FileHeader, items: &[T]) -> Result<(), CorpusIoError> {
    let io_err = |source| CorpusIoError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    write_line(&mut out, header).map_err(io_err)?;
    for item in items {
        write_line(&mut out, item).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, expected: &str) -> Result<(FileHeader, Vec<T>), CorpusIoError> {
    let io_err = |source| CorpusIoError::Io { path: path.to_path_buf(), source };
    let parse_err = |line, message: String| CorpusIoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut header: Option<FileHeader> = None;
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match header {
            None => {
                let h: FileHeader = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
                if h.kind != expected {
                    return Err(CorpusIoError::WrongKind {
                        path: path.to_path_buf(),
                        expected: expected.to_string(),
                        found: h.kind,
                    });
                }
                header = Some(h);
            }
            Some(_) => items.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?),
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "missing header line".into()))?;
    if header.count != items.len() {
        return Err(CorpusIoError::CountMismatch {
            path: path.to_path_buf(),
            announced: header.count,
            found: items.len(),
        });
    }
    Ok((header, items))
}

pub fn write_candidates(path: &Path, provenance: &Provenance, candidates: &[CandidateRecord]) -> Result<(), CorpusIoError> {
    let header = FileHeader {
        kind: CANDIDATES.into(),
        provenance: provenance.clone(),
        count: candidates.len(),
    };
    write_jsonl(path, &header, candidates)
}

pub fn read_candidates(path: &Path) -> Result<(Provenance, Vec<CandidateRecord>), CorpusIoError> {
    let (header, items) = read_jsonl(path, CANDIDATES)?;
    Ok((header.provenance, items))
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<(), CorpusIoError> {
    let header = FileHeader {
        kind: CORPUS.into(),
        provenance: corpus.provenance.clone(),
        count: corpus.records.len(),
    };
    write_jsonl(path, &header, &corpus.records)
}

pub fn read_corpus(path: &Path) -> Result<Corpus, CorpusIoError> {
    let (header, records): (_, Vec<CorpusRecord>) = read_jsonl(path, CORPUS)?;
    Ok(Corpus::new(header.provenance, records))
}
