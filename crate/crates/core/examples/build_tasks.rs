//! From a synthetic corpus to the nine task datasets: preprocessing, a
//! video-level split and per-window labels with skip counts.
//!
//! cargo run --release --example build_tasks

use cyclist_collision::ingest::{parse_manifest, read_annotations};
use cyclist_collision::synth::{generate_suite, RenderConfig, SuiteOptions};
use cyclist_collision::tasks::{build_task_dataset, make_split, PoolMap, TaskId};
use cyclist_collision::video::{preprocess_corpus, CanonicalFormat, CanonicalStore};

fn main() -> cyclist_collision::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| cyclist_collision::Error::Invalid(e.to_string()))?;
    let mut opts = SuiteOptions::new(30, 4);
    opts.render = RenderConfig { width: 96, height: 54, fps: 24.0 };
    let suite = generate_suite(&opts, &dir.path().join("suite"))?;
    let manifest = parse_manifest(&suite.files.manifest)?;
    let annotations = read_annotations(&suite.files.annotations)?;
    let store = CanonicalStore::open(dir.path().join("canonical"))?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    preprocess_corpus(&manifest, &suite.files.raw_dir, &store, &CanonicalFormat::scaled(64), workers)?;

    let ids: Vec<String> = manifest.iter().map(|e| e.video_id.clone()).collect();
    let split = make_split(&ids, 0.7, 4)?;
    println!("split: {} train / {} test videos", split.train_video_ids.len(), split.test_video_ids.len());
    let frames = store.frame_counts()?;
    let pools = PoolMap::from_sources(&manifest, &annotations);
    for task in TaskId::ALL {
        let d = build_task_dataset(&task.spec(), &split, &annotations, &pools, &frames)?;
        println!(
            "{} {:<16} train {:>3} test {:>3}  classes {:?}  skipped {:?}",
            task.number(),
            task.slug(),
            d.train.len(),
            d.test.len(),
            d.report.train_counts,
            d.report.skipped
        );
    }
    Ok(())
}
