use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    aggregate_files, read_raw_labels, write_annotations, write_manifest, write_raw_labels, Categorical, Direction,
    LabelVocabulary,
};

use super::{generate_scenario, sample_scenario, GeneratedVideo, RenderConfig, Scenario, ScenarioKind, ScenarioRequest};

/// Fractions of each scenario kind in a suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteMix {
    pub collision: f64,
    pub moving: f64,
    pub stationary: f64,
}

impl Default for SuiteMix {
    fn default() -> Self {
        Self { collision: 0.5, moving: 0.35, stationary: 0.15 }
    }
}

impl FromStr for SuiteMix {
    type Err = Error;

    /// `collision=0.5,moving=0.3,stationary=0.2`; missing kinds get 0 and
    /// the weights are normalized.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = Self { collision: 0.0, moving: 0.0, stationary: 0.0 };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("mix entry {part:?} is not kind=weight")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Invalid(format!("mix weight {v:?} is not a number")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("mix weight {v} must be non-negative")));
            }
            match k.trim() {
                "collision" | "two_body_collision" => m.collision = v,
                "moving" | "moving_object_direction" => m.moving = v,
                "stationary" => m.stationary = v,
                other => return Err(Error::Invalid(format!("unknown scenario kind {other:?} in mix"))),
            }
        }
        let total = m.collision + m.moving + m.stationary;
        if total <= 0.0 {
            return Err(Error::Invalid("mix weights sum to zero".into()));
        }
        Ok(Self { collision: m.collision / total, moving: m.moving / total, stationary: m.stationary / total })
    }
}

impl SuiteMix {
    /// Videos per kind for a suite of `n`, by largest remainder.
    pub fn counts(&self, n: usize) -> [(ScenarioKind, usize); 3] {
        let w = [self.collision, self.moving, self.stationary];
        let total: f64 = w.iter().sum();
        let exact: Vec<f64> = w.iter().map(|x| x / total * n as f64).collect();
        let mut c: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let short = n - c.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            c[i] += 1;
        }
        [
            (ScenarioKind::TwoBodyCollision, c[0]),
            (ScenarioKind::MovingObjectDirection, c[1]),
            (ScenarioKind::Stationary, c[2]),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub n_videos: usize,
    pub mix: SuiteMix,
    pub seed: u64,
    pub render: RenderConfig,
    /// Share of moving scenarios rendered as near misses.
    pub near_miss_fraction: f64,
    pub labellers: usize,
    /// Fixed clip length; drawn per video when `None`.
    pub duration: Option<f64>,
}

impl SuiteOptions {
    pub fn new(n_videos: usize, seed: u64) -> Self {
        Self {
            n_videos,
            mix: SuiteMix::default(),
            seed,
            render: RenderConfig::default(),
            near_miss_fraction: 1.0 / 3.0,
            labellers: 3,
            duration: None,
        }
    }
}

/// Paths written by [`generate_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteFiles {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub raw_dir: PathBuf,
    pub raw_labels: Vec<PathBuf>,
    pub annotations: PathBuf,
    pub scenarios: PathBuf,
}

impl SuiteFiles {
    pub fn under(root: &Path, labellers: usize) -> Self {
        Self {
            root: root.to_path_buf(),
            manifest: root.join("manifest.csv"),
            raw_dir: root.join("raw"),
            raw_labels: (1..=labellers).map(|i| root.join(format!("labels_L{i}.csv"))).collect(),
            annotations: root.join("annotations.csv"),
            scenarios: root.join("scenarios.json"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteSummary {
    pub files: SuiteFiles,
    pub videos: Vec<GeneratedVideo>,
    pub kind_counts: BTreeMap<String, usize>,
}

impl SuiteSummary {
    pub fn collision_rate(&self) -> f64 {
        let n = self.videos.iter().filter(|v| v.annotation.has_collision).count();
        n as f64 / self.videos.len().max(1) as f64
    }
}

fn video_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

pub fn video_id(i: usize) -> String {
    format!("syn_{i:05}")
}

/// Request for video `i`. Kinds are shuffled by the suite seed; cyclist
/// directions cycle within each kind so the classes stay balanced.
pub fn scenario_for_index(opts: &SuiteOptions, i: usize) -> Result<Scenario> {
    let mut kinds: Vec<ScenarioKind> =
        opts.mix.counts(opts.n_videos).iter().flat_map(|&(k, n)| std::iter::repeat(k).take(n)).collect();
    kinds.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    let kind = *kinds.get(i).ok_or_else(|| Error::Invalid(format!("video {i} beyond suite of {}", opts.n_videos)))?;
    let nth = kinds[..i].iter().filter(|&&k| k == kind).count();
    let mut req = ScenarioRequest::new(kind);
    req.render = opts.render;
    req.duration = opts.duration;
    let moving = [Direction::Forward, Direction::Backward, Direction::Left, Direction::Right];
    match kind {
        ScenarioKind::MovingObjectDirection => {
            req.cyclist_direction = Some(moving[nth % moving.len()]);
            let near = (nth as f64 * opts.near_miss_fraction).floor() != ((nth + 1) as f64 * opts.near_miss_fraction).floor();
            req.near_miss = near;
        }
        ScenarioKind::TwoBodyCollision => {
            req.cyclist_direction = Direction::from_index(nth % Direction::count());
        }
        ScenarioKind::Stationary => {}
    }
    sample_scenario(&req, video_seed(opts.seed, i))
}

/// Render a whole corpus into `out`: manifest, one raw label file per
/// labeller, aggregated annotations, scenario parameters and raw videos.
pub fn generate_suite(opts: &SuiteOptions, out: &Path) -> Result<SuiteSummary> {
    if opts.n_videos < 2 {
        return Err(Error::Invalid(format!("a suite needs at least 2 videos, got {}", opts.n_videos)));
    }
    if opts.labellers == 0 {
        return Err(Error::Invalid("a suite needs at least one labeller".into()));
    }
    let files = SuiteFiles::under(out, opts.labellers);
    std::fs::create_dir_all(&files.raw_dir).map_err(|e| Error::io(&files.raw_dir, e))?;
    let scenarios: Vec<Scenario> = (0..opts.n_videos).map(|i| scenario_for_index(opts, i)).collect::<Result<_>>()?;
    let mut videos: Vec<GeneratedVideo> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| generate_scenario(s, &video_id(i), &files.raw_dir))
        .collect::<Result<_>>()?;

    write_manifest(&files.manifest, &videos.iter().map(|v| v.manifest.clone()).collect::<Vec<_>>())?;
    for (l, path) in files.raw_labels.iter().enumerate() {
        let records: Vec<_> = videos
            .iter()
            .map(|v| v.scenario.raw_labels(&v.annotation.video_id, opts.labellers).swap_remove(l))
            .collect();
        write_raw_labels(path, &records)?;
    }
    // Annotations go through the same aggregation as human labels, so the
    // file matches what `aggregate` would produce from the raw files.
    let raw: Vec<Vec<_>> = files.raw_labels.iter().map(|p| read_raw_labels(p)).collect::<Result<_>>()?;
    let merged = aggregate_files(&raw, &LabelVocabulary::default())?;
    for (v, a) in videos.iter_mut().zip(&merged) {
        v.annotation = a.clone();
    }
    write_annotations(&files.annotations, &merged)?;
    let by_id: BTreeMap<&str, &Scenario> = videos.iter().map(|v| (v.annotation.video_id.as_str(), &v.scenario)).collect();
    std::fs::write(&files.scenarios, serde_json::to_string_pretty(&by_id)?).map_err(|e| Error::io(&files.scenarios, e))?;

    let mut kind_counts = BTreeMap::new();
    for v in &videos {
        *kind_counts.entry(v.scenario.kind.slug().to_string()).or_default() += 1;
    }
    Ok(SuiteSummary { files, videos, kind_counts })
}
