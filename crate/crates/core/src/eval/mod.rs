//! Metrics, evaluation and transfer protocols, embedding export and
//! dataset statistics.

mod embed;
mod metrics;
mod plot;
mod stats;

pub use embed::{export_embeddings, pca_2d, silhouette_score, Embeddings};
pub use metrics::{accuracy, argmax_rows, macro_f1, mse, ClassScores, ConfusionMatrix};
pub use plot::{render_bars, render_heatmap, render_scatter};
pub use stats::{dataset_stats, Heatmap, Histogram, StatsReport};

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ParamStore, VidNeXt};
use crate::tasks::{Label, LabeledSegment, TargetKind, TaskDataset, TaskSpec};
use crate::tensor::Tensor;
use crate::train::{Checkpoint, SegmentLoader, TrainConfig, TrainOutcome, TrainScope, Trainer};
use crate::video::CanonicalStore;

/// Raw head outputs collected over a set of segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub spec: TaskSpec,
    /// Row-major `[n, width]` outputs.
    pub outputs: Vec<f64>,
    pub width: usize,
    pub labels: Vec<Label>,
}

impl Predictions {
    pub fn empty(spec: &TaskSpec) -> Self {
        Self { spec: spec.clone(), outputs: Vec::new(), width: spec.output_size(), labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn extend(&mut self, outputs: &Tensor, labels: &[Label]) {
        self.outputs.extend_from_slice(outputs.data());
        self.labels.extend_from_slice(labels);
    }

    pub fn predicted_classes(&self) -> Vec<usize> {
        argmax_rows(&self.outputs, self.width)
    }

    pub fn true_classes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.class().unwrap_or(usize::MAX)).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.value()).collect()
    }

    /// Mean cross-entropy or mean squared error of the stored outputs.
    pub fn loss(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Invalid("no predictions".into()));
        }
        match self.spec.target_kind {
            TargetKind::Regression => mse(&self.outputs, &self.targets()),
            TargetKind::Classification => {
                let mut total = 0.0;
                for (row, t) in self.outputs.chunks(self.width).zip(self.true_classes()) {
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                    total += lse - row[t];
                }
                Ok(total / self.len() as f64)
            }
        }
    }

    pub fn confusion(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_pairs(&self.predicted_classes(), &self.true_classes(), self.width)
    }
}

/// Metric map used in logs: `accuracy` and `macro_f1`, or `mse`.
pub fn score_predictions(p: &Predictions) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    match p.spec.target_kind {
        TargetKind::Classification => {
            let c = p.confusion()?;
            m.insert("accuracy".to_string(), c.accuracy());
            m.insert("macro_f1".to_string(), c.macro_f1());
        }
        TargetKind::Regression => {
            m.insert("mse".to_string(), mse(&p.outputs, &p.targets())?);
        }
    }
    Ok(m)
}

/// Centre-crop predictions for `segments`, in order.
pub fn predict(
    model: &VidNeXt,
    loader: &SegmentLoader<'_>,
    segments: &[LabeledSegment],
    spec: &TaskSpec,
    batch_size: usize,
) -> Result<Predictions> {
    model.config.check_head(spec)?;
    let mut out = Predictions::empty(spec);
    for chunk in segments.chunks(batch_size.max(1)) {
        let refs: Vec<&LabeledSegment> = chunk.iter().collect();
        let x = loader.batch(&refs, None, false)?;
        let inf = model.infer(&x)?;
        let labels: Vec<Label> = chunk.iter().map(|s| s.label).collect();
        out.extend(&inf.outputs[&spec.task], &labels);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            o => Err(Error::Invalid(format!("unknown split {o:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    #[serde(flatten)]
    pub scores: ClassScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task_id: u8,
    pub task: String,
    pub split: Split,
    pub n_segments: usize,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub mse: Option<f64>,
    pub per_class: Vec<ClassReport>,
    pub confusion: Option<ConfusionMatrix>,
    /// F1 averaging used; the source reports only "F1".
    pub f1_averaging: String,
    pub model_fingerprint: String,
}

impl MetricReport {
    pub fn from_predictions(p: &Predictions, split: Split, model_fingerprint: String) -> Result<Self> {
        let spec = &p.spec;
        let mut r = MetricReport {
            task_id: spec.task.number(),
            task: spec.task.slug().to_string(),
            split,
            n_segments: p.len(),
            accuracy: None,
            macro_f1: None,
            mse: None,
            per_class: Vec::new(),
            confusion: None,
            f1_averaging: "macro".into(),
            model_fingerprint,
        };
        match spec.target_kind {
            TargetKind::Classification => {
                let c = p.confusion()?;
                r.accuracy = Some(c.accuracy());
                r.macro_f1 = Some(c.macro_f1());
                let names = spec.classes.clone().unwrap_or_default();
                r.per_class = c
                    .per_class()
                    .into_iter()
                    .enumerate()
                    .map(|(i, scores)| ClassReport { class: names.get(i).cloned().unwrap_or(i.to_string()), scores })
                    .collect();
                r.confusion = Some(c);
            }
            TargetKind::Regression => r.mse = Some(mse(&p.outputs, &p.targets())?),
        }
        Ok(r)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

fn params_fingerprint(p: &ParamStore) -> String {
    crate::train::fingerprint(&p.to_bytes())
}

/// Deterministic evaluation of the checkpoint's best parameters on one
/// split: centre crops, no flips or jitter.
pub fn evaluate(checkpoint: &Checkpoint, dataset: &TaskDataset, split: Split, store: &CanonicalStore) -> Result<MetricReport> {
    let model = checkpoint.best_model();
    evaluate_model(&model, dataset, split, store, checkpoint.train_config.batch_size)
}

pub fn evaluate_model(
    model: &VidNeXt,
    dataset: &TaskDataset,
    split: Split,
    store: &CanonicalStore,
    batch_size: usize,
) -> Result<MetricReport> {
    model.config.check_head(&dataset.spec)?;
    let segments = match split {
        Split::Train => &dataset.train,
        Split::Test => &dataset.test,
    };
    if segments.is_empty() {
        return Err(Error::Invalid(format!("{} {split:?} split is empty", dataset.spec.task.slug())));
    }
    let loader = SegmentLoader::new(store, model.config.image_size);
    loader.check(segments)?;
    let p = predict(model, &loader, segments, &dataset.spec, batch_size)?;
    MetricReport::from_predictions(&p, split, params_fingerprint(&model.params))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    /// Update every parameter.
    Finetune,
    /// Update only the head on frozen representations.
    Linear,
}

impl FromStr for TransferMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finetune" => Ok(Self::Finetune),
            "linear" => Ok(Self::Linear),
            o => Err(Error::Invalid(format!("unknown transfer mode {o:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransferResult {
    pub report: MetricReport,
    pub model: VidNeXt,
    pub training: TrainOutcome,
}

/// Adapt a source checkpoint to `target` and score it on the target test
/// split. A missing head for the target task is freshly initialized.
pub fn transfer_eval(
    checkpoint: &Checkpoint,
    target: &TaskDataset,
    store: &CanonicalStore,
    mode: TransferMode,
    mut cfg: TrainConfig,
) -> Result<TransferResult> {
    let source = checkpoint.best_model();
    let model = if source.config.head(target.spec.task).is_ok() {
        source
    } else {
        let mut config = source.config.clone();
        config.heads.push(crate::model::HeadConfig::for_task(target.spec.task));
        let mut m = VidNeXt::new(config, cfg.seed)?;
        m.params.import(&source.params, |_| true)?;
        m
    };
    cfg.scope = match mode {
        TransferMode::Finetune => TrainScope::All,
        TransferMode::Linear => TrainScope::HeadsOnly,
    };
    let training = Trainer::new(model, std::slice::from_ref(target), store, cfg)?.run()?;
    let model = training.best_model();
    let report = evaluate_model(&model, target, Split::Test, store, training.last.train_config.batch_size)?;
    Ok(TransferResult { report, model, training })
}
