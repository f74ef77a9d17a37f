//! Reuse a direction model on object direction: a linear probe on frozen
//! representations against full fine-tuning.
//!
//! cargo run --release --example transfer_probe

use cyclist_collision::eval::{transfer_eval, TransferMode};
use cyclist_collision::model::{ModelVariant, VidNeXt, VidNeXtConfig};
use cyclist_collision::synth::{prepare_task, RenderConfig, SuiteOptions};
use cyclist_collision::tasks::{build_task_dataset, PoolMap, TaskId};
use cyclist_collision::train::{train_task, TrainConfig};
use cyclist_collision::video::{CanonicalFormat, CanonicalStore};

fn main() -> cyclist_collision::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| cyclist_collision::Error::Invalid(e.to_string()))?;
    let mut opts = SuiteOptions::new(24, 3);
    opts.render = RenderConfig { width: 96, height: 54, fps: 24.0 };
    opts.duration = Some(2.0);
    let store = CanonicalStore::open(dir.path().join("canonical"))?;
    let source = prepare_task(&opts, dir.path(), &store, &CanonicalFormat::scaled(64), TaskId::Direction, 0.7)?;

    let cfg = TrainConfig { batch_size: 8, lr: 1e-3, epochs: 2, ..TrainConfig::default() };
    let model = VidNeXt::new(VidNeXtConfig::tiny(ModelVariant::Vidnext, TaskId::Direction), 0)?;
    let trained = train_task(model, &source.dataset, &store, cfg.clone())?;

    let annotations: Vec<_> = source.suite.videos.iter().map(|v| v.annotation.clone()).collect();
    let manifest: Vec<_> = source.suite.videos.iter().map(|v| v.manifest.clone()).collect();
    let target = build_task_dataset(
        &TaskId::ObjectDirection.spec(),
        &source.split,
        &annotations,
        &PoolMap::from_sources(&manifest, &annotations),
        &store.frame_counts()?,
    )?;
    for mode in [TransferMode::Linear, TransferMode::Finetune] {
        let r = transfer_eval(&trained.last, &target, &store, mode, cfg.clone())?;
        println!("{mode:?}: object-direction test accuracy {:.3}, macro F1 {:.3}", r.report.accuracy.unwrap_or(0.0), r.report.macro_f1.unwrap_or(0.0));
    }
    Ok(())
}
