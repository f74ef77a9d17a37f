use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{parse_manifest, read_annotations};
use crate::tasks::{build_task_dataset, make_split, PoolMap, SplitManifest, TaskDataset, TaskId};
use crate::video::{preprocess_corpus, CanonicalFormat, CanonicalStore, PreprocessReport};

use super::{generate_suite, SuiteOptions, SuiteSummary};

/// A rendered suite, canonicalized and labelled for one task.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    pub suite: SuiteSummary,
    pub preprocess: PreprocessReport,
    pub split: SplitManifest,
    pub dataset: TaskDataset,
}

/// Render `opts` under `dir/suite`, canonicalize into `store` at `format`,
/// split the videos at `train_ratio` (seeded by the suite seed) and build
/// the dataset for `task`.
pub fn prepare_task(
    opts: &SuiteOptions,
    dir: &Path,
    store: &CanonicalStore,
    format: &CanonicalFormat,
    task: TaskId,
    train_ratio: f64,
) -> Result<SyntheticTask> {
    let suite = generate_suite(opts, &dir.join("suite"))?;
    let manifest = parse_manifest(&suite.files.manifest)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let preprocess = preprocess_corpus(&manifest, &suite.files.raw_dir, store, format, workers)?;
    if let Some((id, why)) = preprocess.rejected.first() {
        return Err(Error::Invalid(format!("synthetic video {id} rejected: {why}")));
    }
    let annotations = read_annotations(&suite.files.annotations)?;
    let ids: Vec<String> = manifest.iter().map(|e| e.video_id.clone()).collect();
    let split = make_split(&ids, train_ratio, opts.seed)?;
    let pools = PoolMap::from_sources(&manifest, &annotations);
    let dataset = build_task_dataset(&task.spec(), &split, &annotations, &pools, &store.frame_counts()?)?;
    Ok(SyntheticTask { suite, preprocess, split, dataset })
}
