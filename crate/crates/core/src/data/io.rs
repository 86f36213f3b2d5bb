use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::records::EmbeddingRecord;
use crate::error::{Error, Result};

fn is_gzip(path: &Path) -> bool {
    path.to_string_lossy().ends_with(".jsonl.gz") || path.extension().is_some_and(|e| e == "gz")
}

/// Reads a JSON-lines embedding file (`.jsonl`, or gzip-compressed `.jsonl.gz`).
///
/// Blank lines are skipped. Every record must have the same feature length and a
/// unique `id`.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if is_gzip(path) { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
    parse_embeddings(BufReader::new(reader))
}

pub fn parse_embeddings(reader: impl BufRead) -> Result<Vec<EmbeddingRecord>> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let mut dim: Option<(usize, usize)> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if let Some(l) = record.label {
            if l > 1 {
                return Err(Error::Parse { line: line_no, message: format!("label must be 0, 1 or null, got {l}") });
            }
        }
        if let Some(v) = record.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { line: line_no, message: format!("non-finite feature {v}") });
        }
        match dim {
            None => dim = Some((record.dim(), line_no)),
            Some((d, first_line)) if d != record.dim() => {
                return Err(Error::Schema(format!(
                    "feature dim {} at line {line_no} differs from dim {d} at line {first_line}",
                    record.dim()
                )));
            }
            _ => {}
        }
        if !ids.insert(record.id.clone()) {
            return Err(Error::Schema(format!("duplicate id {:?} at line {line_no}", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records as JSON lines; gzip-compressed when the path ends in `.gz`.
pub fn save_embeddings(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path)?;
    if is_gzip(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_embeddings(&mut enc, records)?;
        enc.finish()?.flush()?;
    } else {
        let mut w = BufWriter::new(file);
        write_embeddings(&mut w, records)?;
        w.flush()?;
    }
    Ok(())
}

pub fn write_embeddings(mut w: impl Write, records: &[EmbeddingRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
