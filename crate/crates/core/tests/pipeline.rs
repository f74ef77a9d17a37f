//! Library-level runs across module boundaries on small synthetic corpora.

use std::collections::BTreeMap;

use cyclist_collision::eval::{evaluate, Split};
use cyclist_collision::ingest::{parse_manifest, read_annotations, read_raw_labels, validate_annotation, LabelVocabulary};
use cyclist_collision::model::{HeadConfig, ModelVariant, VidNeXt, VidNeXtConfig};
use cyclist_collision::synth::{generate_suite, RenderConfig, SuiteOptions};
use cyclist_collision::tasks::{build_task_dataset, make_split, Label, PoolMap, TaskId};
use cyclist_collision::train::{multi_task_train, Checkpoint, TrainConfig};
use cyclist_collision::video::{preprocess_corpus, CanonicalFormat, CanonicalStore};

struct Corpus {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    store: CanonicalStore,
}

fn corpus(n: usize, seed: u64) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let mut opts = SuiteOptions::new(n, seed);
    opts.render = RenderConfig { width: 96, height: 54, fps: 24.0 };
    generate_suite(&opts, &root.join("suite")).unwrap();
    let store = CanonicalStore::open(root.join("canonical")).unwrap();
    let manifest = parse_manifest(&root.join("suite/manifest.csv")).unwrap();
    let report = preprocess_corpus(&manifest, &root.join("suite/raw"), &store, &CanonicalFormat::scaled(64), 2).unwrap();
    assert!(report.rejected.is_empty(), "{:?}", report.rejected);
    Corpus { _dir: dir, root, store }
}

/// Expected anticipation labels per video from the configured scene
/// parameters: a window ending at e is positive when contact falls in
/// (e, e + 1], negative when later or absent, and dropped once contact is
/// inside it. Only collision and near-miss clips take part.
fn anticipation_oracle(scenes: &serde_json::Value, id: &str, frames: usize) -> Vec<(usize, usize)> {
    let s = &scenes[id];
    let tc = s["collision_time"].as_f64();
    if tc.is_none() && !s["near_miss"].as_bool().unwrap() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + 30 <= frames {
        let end = (start + 30) as f64 / 30.0;
        match tc {
            None => out.push((start, 0)),
            Some(t) if t <= end => {}
            Some(t) if t <= end + 1.0 => out.push((start, 1)),
            Some(_) => out.push((start, 0)),
        }
        start += 15;
    }
    out
}

#[test]
fn suite_of_forty_matches_anticipation_enumeration() {
    let c = corpus(40, 21);
    let annotations = read_annotations(&c.root.join("suite/annotations.csv")).unwrap();
    let manifest = parse_manifest(&c.root.join("suite/manifest.csv")).unwrap();
    let scenes: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(c.root.join("suite/scenarios.json")).unwrap()).unwrap();
    let ids: Vec<String> = manifest.iter().map(|e| e.video_id.clone()).collect();
    let split = make_split(&ids, 0.7, 21).unwrap();
    let frames = c.store.frame_counts().unwrap();
    let pools = PoolMap::from_sources(&manifest, &annotations);
    let d = build_task_dataset(&TaskId::Anticipation.spec(), &split, &annotations, &pools, &frames).unwrap();

    for (side, segs) in [(&split.train_video_ids, &d.train), (&split.test_video_ids, &d.test)] {
        let mut expected = Vec::new();
        for id in side {
            for (start, label) in anticipation_oracle(&scenes, id, frames[id]) {
                expected.push((id.clone(), start, label));
            }
        }
        let got: Vec<(String, usize, usize)> =
            segs.iter().map(|s| (s.video_id.clone(), s.start_frame, s.label.class().unwrap())).collect();
        assert_eq!(got, expected);
    }
    let positives = d.train.iter().chain(&d.test).filter(|s| s.label == Label::Class(1)).count();
    let negatives = d.train.len() + d.test.len() - positives;
    assert!(positives > 0 && negatives > 0, "{positives} positives, {negatives} negatives");
}

#[test]
fn generated_labels_pass_validation_and_cover_every_task() {
    let c = corpus(40, 5);
    let vocab = LabelVocabulary::default();
    let manifest = parse_manifest(&c.root.join("suite/manifest.csv")).unwrap();
    let durations: BTreeMap<&str, f64> = manifest.iter().map(|e| (e.video_id.as_str(), e.duration())).collect();
    for l in 1..=3 {
        for r in read_raw_labels(&c.root.join(format!("suite/labels_L{l}.csv"))).unwrap() {
            let v = validate_annotation(&r, &vocab, Some(durations[r.video_id.as_str()]));
            assert!(v.is_empty(), "{}: {v:?}", r.video_id);
        }
    }
    let annotations = read_annotations(&c.root.join("suite/annotations.csv")).unwrap();
    let ids: Vec<String> = manifest.iter().map(|e| e.video_id.clone()).collect();
    let split = make_split(&ids, 0.7, 5).unwrap();
    let frames = c.store.frame_counts().unwrap();
    let pools = PoolMap::from_sources(&manifest, &annotations);
    for task in TaskId::ALL {
        let d = build_task_dataset(&task.spec(), &split, &annotations, &pools, &frames).unwrap();
        let n = d.train.len() + d.test.len();
        assert!(n > 0, "task {} is empty", task.slug());
        for s in d.train.iter().chain(&d.test) {
            assert!(frames[&s.video_id] >= s.start_frame + 30);
            match (s.label, d.spec.n_classes()) {
                (Label::Class(k), Some(nc)) => assert!(k < nc),
                (Label::Seconds(t), None) => assert!(t > 0.0),
                other => panic!("task {}: label {other:?}", task.slug()),
            }
        }
    }
}

#[test]
fn multi_task_checkpoint_survives_a_round_trip() {
    let c = corpus(12, 8);
    let annotations = read_annotations(&c.root.join("suite/annotations.csv")).unwrap();
    let manifest = parse_manifest(&c.root.join("suite/manifest.csv")).unwrap();
    let ids: Vec<String> = manifest.iter().map(|e| e.video_id.clone()).collect();
    let split = make_split(&ids, 0.6, 8).unwrap();
    let frames = c.store.frame_counts().unwrap();
    let pools = PoolMap::from_sources(&manifest, &annotations);
    let tasks = [TaskId::Direction, TaskId::Risk];
    let datasets: Vec<_> =
        tasks.iter().map(|t| build_task_dataset(&t.spec(), &split, &annotations, &pools, &frames).unwrap()).collect();

    let mut config = VidNeXtConfig::tiny(ModelVariant::ConvnextVt, tasks[0]);
    config.heads = tasks.iter().map(|&t| HeadConfig::for_task(t)).collect();
    let model = VidNeXt::new(config, 2).unwrap();
    let cfg = TrainConfig { batch_size: 4, lr: 1e-3, epochs: 1, ..TrainConfig::default() };
    let out = multi_task_train(model, &datasets, &c.store, cfg).unwrap();
    assert_eq!(out.last.epoch, 1);

    let dir = c.root.join("ck");
    out.last.save(&dir).unwrap();
    let back = Checkpoint::load(&dir).unwrap();
    assert_eq!(back.best_model().params.to_bytes(), out.best_model().params.to_bytes());
    for d in &datasets {
        assert_eq!(evaluate(&out.last, d, Split::Test, &c.store).unwrap(), evaluate(&back, d, Split::Test, &c.store).unwrap());
    }
}
