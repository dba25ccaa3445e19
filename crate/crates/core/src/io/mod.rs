//! Files in and out: run configuration, delimited lists, sample traces,
//! checkpoints and reports.

mod config;
mod ingest;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{PosteriorSampleSet, Snapshot, TraceMeta};

pub use config::{FieldPrior, IngestSpec, PriorSpec, RunConfig};
pub use ingest::{ingest, ingest_with, write_lists, Dictionary, FieldDictionary, Ingested};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const SAMPLES_META_FILE: &str = "samples.meta.json";
pub const SAMPLES_FORMAT: u32 = 1;

/// Pretty JSON with a trailing newline, written through a temporary file.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::Ingest { file: path.display().to_string(), line: 0, message: e.to_string() })?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SamplesSidecar {
    format: u32,
    draws: usize,
    #[serde(flatten)]
    meta: TraceMeta,
}

/// Store a trace in `dir` as one JSON snapshot per line plus a metadata file.
pub fn write_samples(dir: &Path, samples: &PosteriorSampleSet) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(SAMPLES_FILE);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    for s in &samples.snapshots {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    std::fs::rename(&tmp, &path)?;
    write_json(
        &dir.join(SAMPLES_META_FILE),
        &SamplesSidecar { format: SAMPLES_FORMAT, draws: samples.len(), meta: samples.meta.clone() },
    )
}

pub fn read_samples(dir: &Path) -> Result<PosteriorSampleSet> {
    let sidecar: SamplesSidecar = read_json(&dir.join(SAMPLES_META_FILE))?;
    if sidecar.format != SAMPLES_FORMAT {
        return Err(Error::Format { what: "sample trace", message: format!("unsupported format {}", sidecar.format) });
    }
    let path = dir.join(SAMPLES_FILE);
    let name = path.display().to_string();
    let file = File::open(&path).map_err(|e| Error::Ingest { file: name.clone(), line: 0, message: e.to_string() })?;
    let mut snapshots = Vec::with_capacity(sidecar.draws);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Snapshot = serde_json::from_str(&line)
            .map_err(|e| Error::Ingest { file: name.clone(), line: i as u64 + 1, message: e.to_string() })?;
        snapshots.push(s);
    }
    if snapshots.len() != sidecar.draws {
        return Err(Error::Format {
            what: "sample trace",
            message: format!("{} draws on disk, metadata says {}", snapshots.len(), sidecar.draws),
        });
    }
    let n = sidecar.meta.file_sizes.iter().sum::<usize>();
    if let Some(s) = snapshots.iter().find(|s| s.lambda.len() != n) {
        return Err(Error::Dimension(format!("draw at iteration {} covers {} records, expected {n}", s.iteration, s.lambda.len())));
    }
    Ok(PosteriorSampleSet { meta: sidecar.meta, snapshots })
}
