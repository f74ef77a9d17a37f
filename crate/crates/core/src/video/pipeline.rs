use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::VideoManifestEntry;

use super::{canonicalize, decode_video, CanonicalFormat, CanonicalStore, RAW_EXTENSION};

/// Source file for a manifest entry: `source_url` when it names a file in
/// `raw_dir`, else `<video_id>.rgbv`, else the first `<video_id>.*`.
pub fn find_source(raw_dir: &Path, entry: &VideoManifestEntry) -> Result<PathBuf> {
    let named = raw_dir.join(&entry.source_url);
    if !entry.source_url.contains("://") && named.is_file() {
        return Ok(named);
    }
    let native = raw_dir.join(format!("{}.{RAW_EXTENSION}", entry.video_id));
    if native.is_file() {
        return Ok(native);
    }
    let prefix = format!("{}.", entry.video_id);
    let mut hits: Vec<PathBuf> = std::fs::read_dir(raw_dir)
        .map_err(|e| Error::io(raw_dir, e))?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(&prefix)))
        .collect();
    hits.sort();
    hits.into_iter()
        .next()
        .ok_or_else(|| Error::Missing(format!("no source file for {} in {}", entry.video_id, raw_dir.display())))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub processed: Vec<String>,
    /// Videos rejected by validation, with the reason.
    pub rejected: Vec<(String, String)>,
}

/// Canonicalize every manifest entry into `store` using `workers` threads.
/// Validation failures (quality floor, crop range) are collected; I/O and
/// other errors abort.
pub fn preprocess_corpus(
    entries: &[VideoManifestEntry],
    raw_dir: &Path,
    store: &CanonicalStore,
    format: &CanonicalFormat,
    workers: usize,
) -> Result<PreprocessReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    let results: Vec<Result<std::result::Result<String, (String, String)>>> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let path = find_source(raw_dir, entry)?;
                let raw = decode_video(&path)?;
                match canonicalize(&raw, entry, format) {
                    Ok(clip) => {
                        store.save(&clip)?;
                        Ok(Ok(entry.video_id.clone()))
                    }
                    Err(e) if e.is_validation() => Ok(Err((entry.video_id.clone(), e.to_string()))),
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    let mut report = PreprocessReport::default();
    for r in results {
        match r? {
            Ok(id) => report.processed.push(id),
            Err(rej) => {
                log::warn!("{}: rejected: {}", rej.0, rej.1);
                report.rejected.push(rej);
            }
        }
    }
    Ok(report)
}
