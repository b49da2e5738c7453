use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::harness::MetricsRecord;

pub const CSV_HEADER: [&str; 5] = ["round", "MA", "BA", "n_benign", "flags_json"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

/// CSV with one row per round; `flags_json` is a JSON object mapping
/// client id to flagged-layer count. Wall time is left out so identical
/// runs give identical bytes.
pub fn write_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        let flags = serde_json::to_string(&r.flags)?;
        w.write_record([
            r.round.to_string(),
            r.ma.to_string(),
            r.ba.to_string(),
            r.benign_set.len().to_string(),
            flags,
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(records: &[MetricsRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn emit(records: &[MetricsRecord], path: impl AsRef<Path>, format: Format) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_csv(records, file),
        Format::JsonLines => write_jsonl(records, file),
    }
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    read_jsonl(BufReader::new(File::open(path)?))
}
