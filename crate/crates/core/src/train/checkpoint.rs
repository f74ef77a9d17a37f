use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ParamStore, VidNeXt, VidNeXtConfig};
use crate::tasks::{TaskDataset, TaskId};

use super::{AdamW, PlateauScheduler, TrainConfig};

/// SHA-256 of a value's JSON form.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("serializable")))
}

/// Everything needed to continue training or to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: VidNeXt,
    pub optimizer: AdamW,
    pub scheduler: PlateauScheduler,
    pub train_config: TrainConfig,
    pub tasks: Vec<TaskId>,
    /// Epochs completed.
    pub epoch: usize,
    pub best_score: Option<f64>,
    pub best_epoch: Option<usize>,
    pub best_params: Option<ParamStore>,
    pub last_score: Option<f64>,
    pub fingerprints: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model_config: VidNeXtConfig,
    optimizer: AdamW,
    scheduler: PlateauScheduler,
    train_config: TrainConfig,
    tasks: Vec<TaskId>,
    epoch: usize,
    best_score: Option<f64>,
    best_epoch: Option<usize>,
    last_score: Option<f64>,
    fingerprints: BTreeMap<String, String>,
}

const META: &str = "checkpoint.json";
const PARAMS: &str = "params.bin";
const BEST: &str = "best_params.bin";
const MOMENT1: &str = "adam_m.bin";
const MOMENT2: &str = "adam_v.bin";

impl Checkpoint {
    pub fn fresh(model: VidNeXt, train_config: TrainConfig, tasks: Vec<TaskId>, datasets: &[TaskDataset]) -> Self {
        let mut fingerprints = BTreeMap::new();
        fingerprints.insert("model_config".into(), fingerprint(&model.config));
        fingerprints.insert("train_config".into(), fingerprint(&train_config));
        fingerprints.insert("tasks".into(), fingerprint(&tasks.iter().map(|t| t.slug()).collect::<Vec<_>>()));
        for d in datasets {
            fingerprints.insert(format!("dataset.{}", d.spec.task.slug()), fingerprint(d));
        }
        Self {
            optimizer: train_config.optimizer(),
            scheduler: PlateauScheduler::new(train_config.plateau, train_config.lr),
            model,
            train_config,
            tasks,
            epoch: 0,
            best_score: None,
            best_epoch: None,
            best_params: None,
            last_score: None,
            fingerprints,
        }
    }

    /// A checkpoint wrapping an untrained or imported model, for evaluation.
    pub fn from_model(model: VidNeXt) -> Self {
        let tasks = model.config.heads.iter().map(|h| h.task).collect();
        Self::fresh(model, TrainConfig::default(), tasks, &[])
    }

    /// The model with its best monitored parameters (the current ones if
    /// no epoch has been scored).
    pub fn best_model(&self) -> VidNeXt {
        VidNeXt {
            config: self.model.config.clone(),
            params: self.best_params.clone().unwrap_or_else(|| self.model.params.clone()),
        }
    }

    /// Write into directory `dir`: JSON metadata plus binary tensors.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = Meta {
            model_config: self.model.config.clone(),
            optimizer: self.optimizer.clone(),
            scheduler: self.scheduler.clone(),
            train_config: self.train_config.clone(),
            tasks: self.tasks.clone(),
            epoch: self.epoch,
            best_score: self.best_score,
            best_epoch: self.best_epoch,
            last_score: self.last_score,
            fingerprints: self.fingerprints.clone(),
        };
        let path = dir.join(META);
        std::fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))?;
        self.model.params.save(&dir.join(PARAMS))?;
        self.optimizer.m.save(&dir.join(MOMENT1))?;
        self.optimizer.v.save(&dir.join(MOMENT2))?;
        let best = dir.join(BEST);
        match &self.best_params {
            Some(b) => b.save(&best)?,
            None if best.exists() => std::fs::remove_file(&best).map_err(|e| Error::io(&best, e))?,
            None => {}
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(META);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: Meta = serde_json::from_str(&text)?;
        let model = VidNeXt::from_parts(meta.model_config, ParamStore::load(&dir.join(PARAMS))?)?;
        let mut optimizer = meta.optimizer;
        optimizer.m = ParamStore::load(&dir.join(MOMENT1))?;
        optimizer.v = ParamStore::load(&dir.join(MOMENT2))?;
        let best = dir.join(BEST);
        let best_params = if best.exists() { Some(ParamStore::load(&best)?) } else { None };
        Ok(Self {
            model,
            optimizer,
            scheduler: meta.scheduler,
            train_config: meta.train_config,
            tasks: meta.tasks,
            epoch: meta.epoch,
            best_score: meta.best_score,
            best_epoch: meta.best_epoch,
            best_params,
            last_score: meta.last_score,
            fingerprints: meta.fingerprints,
        })
    }
}
