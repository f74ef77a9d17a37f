//! Optimization of a model on one or more task datasets.

mod checkpoint;
mod data;
mod optim;

pub use checkpoint::{fingerprint, Checkpoint};
pub use data::{stack_windows, SegmentLoader};
pub use optim::{clip_grad_norm, plateau_schedule, AdamW, PlateauConfig, PlateauScheduler};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::eval::{predict, score_predictions, Predictions};
use crate::model::VidNeXt;
use crate::tasks::{Label, LabeledSegment, TargetKind, TaskDataset, TaskId, TaskSpec};
use crate::tensor::Tensor;
use crate::video::CanonicalStore;

/// Which parameters receive updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainScope {
    All,
    /// Only the task heads; the encoder and temporal model stay frozen.
    HeadsOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub plateau: PlateauConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Share of training videos held out to monitor progress.
    pub val_fraction: f64,
    pub augment: bool,
    pub grad_clip: Option<f64>,
    pub scope: TrainScope,
    /// Stop once the monitored validation score reaches this value.
    pub stop_at: Option<f64>,
    pub device: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr: 2e-6,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            plateau: PlateauConfig::default(),
            epochs: 50,
            seed: 0,
            val_fraction: 0.1,
            augment: true,
            grad_clip: None,
            scope: TrainScope::All,
            stop_at: None,
            device: "cpu".into(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.batch_size == 0 || self.epochs == 0 {
            return bad(format!("batch_size {} and epochs {} must be positive", self.batch_size, self.epochs));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return bad(format!("lr {} and weight_decay {} must be non-negative", self.lr, self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("betas must lie in [0, 1) and eps must be positive".into());
        }
        let p = &self.plateau;
        if !(p.factor > 0.0 && p.factor < 1.0) || p.patience == 0 || !(p.threshold >= 0.0) || !(p.floor >= 0.0) {
            return bad(format!("bad plateau settings {p:?}"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("grad_clip must be positive".into());
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW::new(self.beta1, self.beta2, self.adam_eps, self.weight_decay)
    }
}

/// Mean cross-entropy for classification heads, mean squared error for
/// regression heads.
pub fn loss_for_task<'g>(spec: &TaskSpec, predictions: Var<'g>, labels: &[Label]) -> Result<Var<'g>> {
    let shape = predictions.shape();
    if shape.first() != Some(&labels.len()) || labels.is_empty() {
        return Err(Error::Shape(format!("predictions {shape:?} for {} labels", labels.len())));
    }
    match spec.target_kind {
        TargetKind::Classification => {
            let c = spec.output_size();
            if shape != [labels.len(), c] {
                return Err(Error::Shape(format!("{} logits must be [B, {c}], got {shape:?}", spec.task)));
            }
            let classes: Vec<usize> = labels
                .iter()
                .map(|l| match l.class() {
                    Some(k) if k < c => Ok(k),
                    _ => Err(Error::Invalid(format!("label {l:?} outside the {c} classes of {}", spec.task))),
                })
                .collect::<Result<_>>()?;
            Ok(predictions.cross_entropy(&classes))
        }
        TargetKind::Regression => {
            if shape != [labels.len()] {
                return Err(Error::Shape(format!("{} predictions must be [B], got {shape:?}", spec.task)));
            }
            let targets = labels
                .iter()
                .map(|l| match l {
                    Label::Seconds(s) => Ok(*s),
                    other => Err(Error::Invalid(format!("regression label expected, got {other:?}"))),
                })
                .collect::<Result<Vec<f64>>>()?;
            let g = predictions.graph();
            let d = predictions.sub(g.constant(Tensor::new(vec![labels.len()], targets)));
            Ok(d.mul(d).mean_all())
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: String,
    pub task: String,
    pub loss: f64,
    pub metrics: BTreeMap<String, f64>,
    pub lr: f64,
}

/// A task dataset with its training segments split into fit / monitor parts.
#[derive(Clone, Debug)]
pub struct PreparedTask {
    pub spec: TaskSpec,
    pub fit: Vec<LabeledSegment>,
    pub val: Vec<LabeledSegment>,
}

/// Hold out `ceil(fraction · videos)` training videos, chosen by `seed`.
/// Nothing is held out when fewer than two videos exist.
pub fn validation_split(train: &[LabeledSegment], fraction: f64, seed: u64) -> (Vec<LabeledSegment>, Vec<LabeledSegment>) {
    let mut ids: Vec<&str> = train.iter().map(|s| s.video_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    let n_val = if ids.len() < 2 || fraction <= 0.0 {
        0
    } else {
        ((fraction * ids.len() as f64).ceil() as usize).min(ids.len() - 1)
    };
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held: Vec<&str> = ids[..n_val].to_vec();
    train.iter().cloned().partition(|s| !held.contains(&s.video_id.as_str()))
}

impl PreparedTask {
    pub fn new(dataset: &TaskDataset, cfg: &TrainConfig) -> Self {
        let (fit, val) = validation_split(&dataset.train, cfg.val_fraction, cfg.seed);
        Self { spec: dataset.spec.clone(), fit, val }
    }
}

/// Higher-is-better summary of a task's predictions: accuracy, or negated
/// MSE for regression.
pub fn monitor_score(spec: &TaskSpec, metrics: &BTreeMap<String, f64>) -> f64 {
    match spec.target_kind {
        TargetKind::Classification => metrics.get("accuracy").copied().unwrap_or(0.0),
        TargetKind::Regression => -metrics.get("mse").copied().unwrap_or(f64::INFINITY),
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(epoch as u64 + 1);
    r
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// State after the last epoch run.
    pub last: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// Model with the best monitored parameters.
    pub fn best_model(&self) -> VidNeXt {
        self.last.best_model()
    }
}

pub struct Trainer<'a> {
    pub state: Checkpoint,
    tasks: Vec<PreparedTask>,
    loader: SegmentLoader<'a>,
    log_path: Option<PathBuf>,
    log: Vec<EpochRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: VidNeXt, datasets: &[TaskDataset], store: &'a CanonicalStore, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let tasks: Vec<TaskId> = datasets.iter().map(|d| d.spec.task).collect();
        let state = Checkpoint::fresh(model, cfg, tasks, datasets);
        Self::resume(state, datasets, store)
    }

    /// Continue from `state`; `datasets` must be the ones it was trained on.
    pub fn resume(state: Checkpoint, datasets: &[TaskDataset], store: &'a CanonicalStore) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Invalid("no task datasets to train on".into()));
        }
        let model = &state.model;
        let cfg = &state.train_config;
        for d in datasets {
            let spec = &d.spec;
            model.config.check_head(spec)?;
            if d.train.is_empty() {
                return Err(Error::Invalid(format!("task {} has no training segments", spec.task)));
            }
        }
        let expect = fingerprint(&datasets.iter().map(|d| d.spec.task.slug()).collect::<Vec<_>>());
        if state.fingerprints.get("tasks").is_some_and(|f| *f != expect) {
            return Err(Error::Invalid("checkpoint was trained on different tasks".into()));
        }
        let tasks: Vec<PreparedTask> = datasets.iter().map(|d| PreparedTask::new(d, cfg)).collect();
        let loader = SegmentLoader::new(store, model.config.image_size);
        for t in &tasks {
            loader.check(&t.fit)?;
            loader.check(&t.val)?;
        }
        Ok(Self { state, tasks, loader, log_path: None, log: Vec::new() })
    }

    /// Append every epoch record as one JSON line to `path`.
    pub fn log_to(mut self, path: impl Into<PathBuf>) -> Self {
        self.log_path = Some(path.into());
        self
    }

    pub fn tasks(&self) -> &[PreparedTask] {
        &self.tasks
    }

    fn emit(&mut self, rec: EpochRecord) -> Result<()> {
        log::info!(
            "epoch {} {} {}: loss {:.5} {:?} lr {:.3e}",
            rec.epoch,
            rec.task,
            rec.split,
            rec.loss,
            rec.metrics,
            rec.lr
        );
        if let Some(p) = &self.log_path {
            let mut f = std::fs::OpenOptions::new().create(true).append(true).open(p).map_err(|e| Error::io(p, e))?;
            writeln!(f, "{}", serde_json::to_string(&rec)?).map_err(|e| Error::io(p, e))?;
        }
        self.log.push(rec);
        Ok(())
    }

    /// Batches of this epoch: each task's fit set is shuffled and chunked,
    /// then steps take one batch from every task that still has one.
    fn schedule(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<(usize, Vec<usize>)>> {
        let bs = self.state.train_config.batch_size;
        let per_task: Vec<Vec<Vec<usize>>> = self
            .tasks
            .iter()
            .map(|t| {
                let mut order: Vec<usize> = (0..t.fit.len()).collect();
                order.shuffle(rng);
                order.chunks(bs).map(<[usize]>::to_vec).collect()
            })
            .collect();
        let n_steps = per_task.iter().map(Vec::len).max().unwrap_or(0);
        (0..n_steps)
            .map(|s| per_task.iter().enumerate().filter_map(|(k, b)| b.get(s).map(|x| (k, x.clone()))).collect())
            .collect()
    }

    /// Train for one epoch, then score the held-out slice and update the
    /// scheduler and best parameters.
    pub fn run_epoch(&mut self) -> Result<Vec<EpochRecord>> {
        let epoch = self.state.epoch;
        let cfg = self.state.train_config.clone();
        let lr = self.state.scheduler.lr;
        let mut rng = epoch_rng(cfg.seed, epoch);
        let steps = self.schedule(&mut rng);
        let n_tasks = self.tasks.len();
        let mut loss_sum = vec![0.0; n_tasks];
        let mut seen = vec![0usize; n_tasks];
        let mut preds: Vec<Predictions> = self.tasks.iter().map(|t| Predictions::empty(&t.spec)).collect();
        let scope = cfg.scope;
        let trainable = move |name: &str| scope == TrainScope::All || VidNeXt::is_head_param(name);
        let start_log = self.log.len();

        for (batch_id, step) in steps.iter().enumerate() {
            let g = Graph::new();
            let model = &self.state.model;
            let p = model.bind(&g, trainable);
            let mut total: Option<Var> = None;
            let mut parts = Vec::new();
            for (k, idx) in step {
                let task = &self.tasks[*k];
                let segs: Vec<&LabeledSegment> = idx.iter().map(|&i| &task.fit[i]).collect();
                let allow_flip = !task.spec.direction_labelled();
                let x = if cfg.augment {
                    self.loader.batch(&segs, Some(&mut rng), allow_flip)?
                } else {
                    self.loader.batch(&segs, None, false)?
                };
                let f = model.forward(&p, g.constant(x))?;
                let out = f.output(task.spec.task)?;
                let labels: Vec<Label> = segs.iter().map(|s| s.label).collect();
                let loss = loss_for_task(&task.spec, out, &labels)?;
                parts.push((*k, loss, out, labels));
                total = Some(match total {
                    None => loss,
                    Some(t) => t.add(loss),
                });
            }
            let Some(total) = total else { continue };
            let value = total.value().item();
            if !value.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss {value} at epoch {epoch}, batch {batch_id}, lr {lr:e}"
                )));
            }
            for (k, loss, out, labels) in &parts {
                let n = labels.len();
                loss_sum[*k] += loss.value().item() * n as f64;
                seen[*k] += n;
                preds[*k].extend(&out.value(), labels);
            }
            g.backward(total);
            let mut grads = p.grads();
            drop(parts);
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(&mut grads, c);
            }
            self.state.optimizer.step(&mut self.state.model.params, &grads, lr)?;
        }

        let mut scores = Vec::new();
        for k in 0..n_tasks {
            let spec = self.tasks[k].spec.clone();
            let train_metrics = score_predictions(&preds[k])?;
            self.emit(EpochRecord {
                epoch,
                split: "train".into(),
                task: spec.task.slug().into(),
                loss: loss_sum[k] / seen[k].max(1) as f64,
                metrics: train_metrics.clone(),
                lr,
            })?;
            let monitored = if self.tasks[k].val.is_empty() {
                train_metrics
            } else {
                let val = predict(&self.state.model, &self.loader, &self.tasks[k].val, &spec, cfg.batch_size)?;
                let m = score_predictions(&val)?;
                let rec = EpochRecord {
                    epoch,
                    split: "val".into(),
                    task: spec.task.slug().into(),
                    loss: val.loss()?,
                    metrics: m.clone(),
                    lr,
                };
                self.emit(rec)?;
                m
            };
            scores.push(monitor_score(&spec, &monitored));
        }
        let score = scores.iter().sum::<f64>() / scores.len() as f64;
        if self.state.best_score.is_none_or(|b| score > b) {
            self.state.best_score = Some(score);
            self.state.best_epoch = Some(epoch);
            self.state.best_params = Some(self.state.model.params.clone());
        }
        self.state.scheduler.step(score);
        self.state.last_score = Some(score);
        self.state.epoch += 1;
        Ok(self.log[start_log..].to_vec())
    }

    /// Run until the configured epoch count or the stop score is reached.
    pub fn run(mut self) -> Result<TrainOutcome> {
        let mut stopped_early = false;
        while self.state.epoch < self.state.train_config.epochs {
            self.run_epoch()?;
            if let (Some(target), Some(s)) = (self.state.train_config.stop_at, self.state.last_score) {
                if s >= target {
                    stopped_early = true;
                    break;
                }
            }
        }
        Ok(TrainOutcome { last: self.state, log: self.log, stopped_early })
    }
}

/// Train `model` on a single task.
pub fn train_task(model: VidNeXt, dataset: &TaskDataset, store: &CanonicalStore, cfg: TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(model, std::slice::from_ref(dataset), store, cfg)?.run()
}

/// Train one model on several tasks at once. Each step sums the losses of
/// one batch per task; every dataset's task needs a head.
pub fn multi_task_train(
    model: VidNeXt,
    datasets: &[TaskDataset],
    store: &CanonicalStore,
    cfg: TrainConfig,
) -> Result<TrainOutcome> {
    for d in datasets {
        model.config.head(d.spec.task)?;
    }
    Trainer::new(model, datasets, store, cfg)?.run()
}

#[cfg(test)]
mod tests;
