use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnnotationRecord, Pool, VideoManifestEntry};
use crate::video::{segment_starts, SegmentWindow, WINDOW_LEN};

use super::{derive_segment_label, EligiblePool, Label, SplitManifest, TaskSpec};

/// Why a window carries no label for a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Unknown(&'static str),
    NoCollision,
    CollisionVisible,
}

impl SkipReason {
    fn key(self) -> String {
        match self {
            SkipReason::Unknown(f) => format!("unknown_{f}"),
            SkipReason::NoCollision => "no_collision".into(),
            SkipReason::CollisionVisible => "collision_visible".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub video_id: String,
    pub start_frame: usize,
    pub label: Label,
    /// Set on duplicated samples; drives a photometric jitter so duplicates differ.
    #[serde(default)]
    pub jitter_seed: Option<u64>,
}

impl LabeledSegment {
    pub fn window(&self) -> SegmentWindow {
        SegmentWindow::new(self.video_id.clone(), self.start_frame)
    }
}

/// Pool membership per video.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolMap(pub BTreeMap<String, Pool>);

impl PoolMap {
    /// Manifest `pool` column when present, otherwise collision iff the
    /// annotation records a collision time.
    pub fn from_sources(manifest: &[VideoManifestEntry], annotations: &[AnnotationRecord]) -> Self {
        let mut m = BTreeMap::new();
        for a in annotations {
            m.insert(a.video_id.clone(), if a.has_collision { Pool::Collision } else { Pool::Safe });
        }
        for e in manifest {
            if let Some(p) = e.pool {
                m.insert(e.video_id.clone(), p);
            }
        }
        Self(m)
    }

    pub fn get(&self, id: &str) -> Option<Pool> {
        self.0.get(id).copied()
    }

    pub fn ids_in(&self, pool: Pool) -> Vec<String> {
        self.0.iter().filter(|(_, p)| **p == pool).map(|(k, _)| k.clone()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    /// Per-class counts (classification) or per-1-second-bin counts (regression).
    pub train_counts: BTreeMap<String, usize>,
    pub test_counts: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, usize>,
    pub ineligible_videos: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub spec: TaskSpec,
    pub split_seed: u64,
    pub train: Vec<LabeledSegment>,
    pub test: Vec<LabeledSegment>,
    pub report: DatasetReport,
}

impl TaskDataset {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn count_key(spec: &TaskSpec, label: Label) -> String {
    match (label, &spec.classes) {
        (Label::Class(c), Some(names)) => names[c].clone(),
        (Label::Class(c), None) => c.to_string(),
        (Label::Seconds(s), _) => format!("{}s", s.floor() as i64),
    }
}

/// Label every window of every eligible video in the split.
///
/// `frame_counts` gives the canonical frame count `T` of each video. Videos
/// outside the task's pool are ignored; windows follow split order, then
/// start frame.
pub fn build_task_dataset(
    spec: &TaskSpec,
    split: &SplitManifest,
    annotations: &[AnnotationRecord],
    pools: &PoolMap,
    frame_counts: &BTreeMap<String, usize>,
) -> Result<TaskDataset> {
    let by_id: BTreeMap<&str, &AnnotationRecord> = annotations.iter().map(|a| (a.video_id.as_str(), a)).collect();
    let all_ids = split.train_video_ids.iter().chain(&split.test_video_ids);
    let missing_ann: Vec<&String> = all_ids.clone().filter(|id| !by_id.contains_key(id.as_str())).collect();
    if !missing_ann.is_empty() {
        return Err(Error::Missing(format!("no annotation for videos {missing_ann:?}")));
    }
    let missing_frames: Vec<&String> = all_ids.filter(|id| !frame_counts.contains_key(*id)).collect();
    if !missing_frames.is_empty() {
        return Err(Error::Missing(format!("no canonical clip for videos {missing_frames:?}")));
    }

    let mut report = DatasetReport::default();
    let label_side = |ids: &[String], counts: &mut BTreeMap<String, usize>, report: &mut DatasetReport| {
        let mut out = Vec::new();
        for id in ids {
            let eligible = match spec.eligible_pool {
                EligiblePool::All => true,
                EligiblePool::Collision => pools.get(id) == Some(Pool::Collision),
            };
            if !eligible {
                report.ineligible_videos += 1;
                continue;
            }
            let ann = by_id[id.as_str()];
            for start in segment_starts(frame_counts[id]) {
                let w = SegmentWindow::new(id.clone(), start);
                match derive_segment_label(spec, ann, &w) {
                    Ok(label) => {
                        *counts.entry(count_key(spec, label)).or_default() += 1;
                        out.push(LabeledSegment { video_id: id.clone(), start_frame: start, label, jitter_seed: None });
                    }
                    Err(reason) => {
                        log::debug!("{id}@{start}: skipped for {}: {reason:?}", spec.task);
                        *report.skipped.entry(reason.key()).or_default() += 1;
                    }
                }
            }
        }
        out
    };
    let mut train_counts = BTreeMap::new();
    let mut test_counts = BTreeMap::new();
    let train = label_side(&split.train_video_ids, &mut train_counts, &mut report);
    let test = label_side(&split.test_video_ids, &mut test_counts, &mut report);
    if let Some(classes) = &spec.classes {
        for c in classes {
            for (side, counts) in [("train", &train_counts), ("test", &test_counts)] {
                if !counts.contains_key(c) {
                    report.warnings.push(format!("class {c:?} empty in {side} split"));
                }
            }
        }
    }
    report.train_counts = train_counts;
    report.test_counts = test_counts;
    for w in &report.warnings {
        log::warn!("task {}: {w}", spec.task);
    }
    Ok(TaskDataset { spec: spec.clone(), split_seed: split.seed, train, test, report })
}

/// Upsample regression training segments so every 1-second label bin matches
/// the fullest bin. Duplicates carry fresh jitter seeds.
pub fn balance_ttc(train: &[LabeledSegment], rng: &mut impl Rng) -> Vec<LabeledSegment> {
    let mut bins: BTreeMap<i64, Vec<&LabeledSegment>> = BTreeMap::new();
    for s in train {
        bins.entry(s.label.value().floor() as i64).or_default().push(s);
    }
    let max = bins.values().map(Vec::len).max().unwrap_or(0);
    let mut out: Vec<LabeledSegment> = train.to_vec();
    for members in bins.values() {
        let mut order: Vec<&LabeledSegment> = members.clone();
        order.shuffle(rng);
        for i in 0..max - members.len() {
            let mut dup = order[i % order.len()].clone();
            dup.jitter_seed = Some(rng.gen());
            out.push(dup);
        }
    }
    out
}

/// Number of windows in a clip of `t` frames.
pub fn window_count(t: usize) -> usize {
    if t < WINDOW_LEN {
        0
    } else {
        (t - WINDOW_LEN) / crate::video::WINDOW_STRIDE + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::fixtures::fields;
    use crate::tasks::{make_split, TaskId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg(label: f64) -> LabeledSegment {
        LabeledSegment { video_id: "v".into(), start_frame: 0, label: Label::Seconds(label), jitter_seed: None }
    }

    #[test]
    fn balance_counts() {
        let mut train = Vec::new();
        train.extend((0..100).map(|_| seg(0.5)));
        train.extend((0..40).map(|_| seg(1.5)));
        train.extend((0..10).map(|_| seg(2.5)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = balance_ttc(&train, &mut rng);
        assert_eq!(out.len() - train.len(), 150);
        for b in 0..3 {
            assert_eq!(out.iter().filter(|s| s.label.value().floor() as i64 == b).count(), 100);
        }
        let seeds: std::collections::HashSet<_> = out.iter().filter_map(|s| s.jitter_seed).collect();
        assert_eq!(seeds.len(), 150);
    }

    #[test]
    fn balanced_input_is_untouched() {
        let train = vec![seg(0.2), seg(1.2), seg(2.2)];
        let out = balance_ttc(&train, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out, train);
    }

    /// Ten videos, five with collisions: compare against a direct enumeration.
    #[test]
    fn anticipation_matches_enumeration() {
        let mut anns = Vec::new();
        let mut frames = BTreeMap::new();
        for i in 0..10 {
            let mut f = fields();
            let t = 60 + 15 * i;
            f.time_to_collision = (i % 2 == 0).then(|| 1.0 + 0.37 * i as f64);
            let id = format!("v{i}");
            frames.insert(id.clone(), t);
            anns.push(AnnotationRecord::new(id, f));
        }
        let mut pools = PoolMap::from_sources(&[], &anns);
        // Near-miss videos stay in the collision pool.
        for i in [1, 3] {
            pools.0.insert(format!("v{i}"), Pool::Collision);
        }
        let ids: Vec<String> = (0..10).map(|i| format!("v{i}")).collect();
        let split = make_split(&ids, 0.7, 11).unwrap();
        let ds = build_task_dataset(&TaskId::Anticipation.spec(), &split, &anns, &pools, &frames).unwrap();

        let (mut pos, mut neg) = (0, 0);
        for a in &anns {
            if pools.get(&a.video_id) != Some(Pool::Collision) {
                continue;
            }
            let t = frames[&a.video_id];
            let mut s = 0;
            while s + 30 <= t {
                let end = (s + 30) as f64 / 30.0;
                match a.fields.time_to_collision {
                    None => neg += 1,
                    Some(tc) if end >= tc => {}
                    Some(tc) if tc <= end + 1.0 => pos += 1,
                    Some(_) => neg += 1,
                }
                s += 15;
            }
        }
        let got_pos = ds.train.iter().chain(&ds.test).filter(|s| s.label == Label::Class(1)).count();
        let got_neg = ds.train.iter().chain(&ds.test).filter(|s| s.label == Label::Class(0)).count();
        assert_eq!((got_pos, got_neg), (pos, neg));
        let train_ids: std::collections::HashSet<_> = ds.train.iter().map(|s| &s.video_id).collect();
        assert!(ds.test.iter().all(|s| !train_ids.contains(&s.video_id)));
        // Rebuilding yields the same dataset.
        let again = build_task_dataset(&TaskId::Anticipation.spec(), &split, &anns, &pools, &frames).unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn missing_clip_is_an_error() {
        let anns = vec![AnnotationRecord::new("a", fields()), AnnotationRecord::new("b", fields())];
        let split = make_split(&["a".into(), "b".into()], 0.5, 0).unwrap();
        let pools = PoolMap::from_sources(&[], &anns);
        let frames = BTreeMap::from([("a".to_string(), 90)]);
        let e = build_task_dataset(&TaskId::Direction.spec(), &split, &anns, &pools, &frames).unwrap_err();
        assert!(e.to_string().contains("\"b\""));
    }

    #[test]
    fn window_count_formula() {
        assert_eq!(window_count(90), 5);
        assert_eq!(window_count(45), 2);
        assert_eq!(window_count(30), 1);
        assert_eq!(window_count(29), 0);
    }
}
