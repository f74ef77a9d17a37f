//! Export segment representations from a briefly trained model, project
//! them with t-SNE and write a scatter plot coloured by label.
//!
//! cargo run --release --example embeddings -- [out.png]

use cyclist_collision::eval::{export_embeddings, render_scatter, silhouette_score};
use cyclist_collision::model::{ModelVariant, VidNeXt, VidNeXtConfig};
use cyclist_collision::synth::{prepare_task, RenderConfig, SuiteOptions};
use cyclist_collision::tasks::TaskId;
use cyclist_collision::train::{train_task, TrainConfig};
use cyclist_collision::video::{CanonicalFormat, CanonicalStore};

fn main() -> cyclist_collision::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "embeddings.png".into());
    let dir = tempfile::tempdir().map_err(|e| cyclist_collision::Error::Invalid(e.to_string()))?;
    let mut opts = SuiteOptions::new(20, 1);
    opts.render = RenderConfig { width: 96, height: 54, fps: 24.0 };
    opts.duration = Some(2.0);
    let store = CanonicalStore::open(dir.path().join("canonical"))?;
    let task = prepare_task(&opts, dir.path(), &store, &CanonicalFormat::scaled(64), TaskId::Direction, 0.7)?;
    let model = VidNeXt::new(VidNeXtConfig::tiny(ModelVariant::Vidnext, TaskId::Direction), 0)?;
    let cfg = TrainConfig { batch_size: 8, lr: 1e-3, epochs: 2, ..TrainConfig::default() };
    let trained = train_task(model, &task.dataset, &store, cfg)?;

    let n = (task.dataset.train.len() + task.dataset.test.len()).min(60);
    let e = export_embeddings(&trained.last, &task.dataset, &store, n, 0)?;
    let classes: Vec<usize> = e.labels.iter().map(|l| l.class().unwrap_or(0)).collect();
    println!("{} representations of dimension {}", e.len(), e.dim);
    println!("silhouette by direction label: {:.3}", silhouette_score(&e.matrix, e.dim, &classes)?);
    let points = e.tsne_2d(300);
    render_scatter(&points, &classes, std::path::Path::new(&out))?;
    println!("t-SNE map written to {out}");
    Ok(())
}
