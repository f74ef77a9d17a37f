//! Train the tiny model on synthetic cyclist-direction clips and score it
//! on held-out videos. Defaults finish in a few minutes; the acceptance
//! setting is `-- 130 20`.
//!
//! cargo run --release --example train_direction -- [n_videos] [epochs] [variant]

use cyclist_collision::eval::{evaluate_model, Split};
use cyclist_collision::model::{ModelVariant, VidNeXt, VidNeXtConfig};
use cyclist_collision::synth::{prepare_task, RenderConfig, SuiteOptions};
use cyclist_collision::tasks::TaskId;
use cyclist_collision::train::{train_task, TrainConfig};
use cyclist_collision::video::{CanonicalFormat, CanonicalStore};

fn main() -> cyclist_collision::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().and_then(|a| a.parse().ok()).unwrap_or(40);
    let epochs = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let variant: ModelVariant = args.get(2).map_or(Ok(ModelVariant::Vidnext), |a| a.parse())?;

    let dir = tempfile::tempdir().map_err(|e| cyclist_collision::Error::Invalid(e.to_string()))?;
    let mut opts = SuiteOptions::new(n, 11);
    opts.mix = "moving=0.8,stationary=0.2".parse()?;
    opts.render = RenderConfig { width: 128, height: 72, fps: 24.0 };
    opts.duration = Some(2.0);
    let store = CanonicalStore::open(dir.path().join("canonical"))?;
    let task = prepare_task(&opts, dir.path(), &store, &CanonicalFormat::scaled(64), TaskId::Direction, 0.7)?;
    let d = &task.dataset;
    println!("{} train / {} test windows", d.train.len(), d.test.len());

    let model = VidNeXt::new(VidNeXtConfig::tiny(variant, TaskId::Direction), 0)?;
    let cfg = TrainConfig { batch_size: 8, lr: 1e-3, epochs, ..TrainConfig::default() };
    let out = train_task(model, d, &store, cfg)?;
    let report = evaluate_model(&out.best_model(), d, Split::Test, &store, 16)?;
    println!(
        "test accuracy {:.3}, macro F1 {:.3} (best epoch {:?})",
        report.accuracy.unwrap_or(0.0),
        report.macro_f1.unwrap_or(0.0),
        out.last.best_epoch
    );
    for c in &report.per_class {
        println!("  {:<10} {:?}", c.class, c.scores);
    }
    Ok(())
}
