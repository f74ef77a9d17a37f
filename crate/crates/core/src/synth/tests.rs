use std::collections::BTreeSet;

use super::*;
use crate::ingest::{validate_annotation, Categorical};
use crate::tasks::{derive_segment_label, TaskId, TaskSpec};
use crate::video::{canonicalize, segment_starts, CanonicalFormat, SegmentWindow};

fn body(velocity: [f64; 2], radius_rate: f64) -> Body {
    Body { center: [0.5, 0.5], velocity, radius: 0.1, radius_rate, color: [0, 0, 0] }
}

fn small_render() -> RenderConfig {
    RenderConfig { width: 96, height: 60, fps: 24.0 }
}

#[test]
fn direction_follows_dominant_component() {
    assert_eq!(body([0.2, 0.0], 0.0).direction(), Direction::Right);
    assert_eq!(body([-0.2, 0.05], 0.01).direction(), Direction::Left);
    assert_eq!(body([0.0, 0.0], 0.0).direction(), Direction::Stationary);
    assert_eq!(body([0.05, 0.1], 0.03).direction(), Direction::Backward);
    assert_eq!(body([0.05, -0.1], -0.03).direction(), Direction::Forward);
}

/// Earliest sampled time with the discs overlapping, scanning in small steps.
fn scan_contact(a: &Body, b: &Body, horizon: f64, step: f64) -> Option<f64> {
    let mut t = 0.0;
    while t <= horizon {
        let (pa, pb) = (a.center_at(t), b.center_at(t));
        let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        if d <= a.radius_at(t) + b.radius_at(t) {
            return Some(t);
        }
        t += step;
    }
    None
}

#[test]
fn collisions_touch_first_at_the_configured_time() {
    for seed in 0..200 {
        let mut req = ScenarioRequest::new(ScenarioKind::TwoBodyCollision);
        req.render = small_render();
        let s = sample_scenario(&req, seed).unwrap();
        let tc = s.collision_time.unwrap();
        let solved = first_contact(&s.cyclist, &s.object, s.duration).unwrap();
        assert!((solved - tc).abs() < 1e-9, "seed {seed}: solver {solved} vs configured {tc}");
        let scanned = scan_contact(&s.cyclist, &s.object, s.duration, 1e-4).unwrap();
        assert!(scanned >= tc - 1e-9 && scanned - tc < 2e-4, "seed {seed}: scan {scanned} vs {tc}");
    }
}

#[test]
fn shortest_clips_still_collide_inside_the_clip() {
    for seed in 0..50 {
        let mut req = ScenarioRequest::new(ScenarioKind::TwoBodyCollision);
        req.render = small_render();
        req.duration = Some(1.5);
        let s = sample_scenario(&req, seed).unwrap();
        let tc = s.collision_time.unwrap();
        assert!(tc > 0.0 && tc < s.duration, "seed {seed}: contact at {tc}");
        assert!((first_contact(&s.cyclist, &s.object, s.duration).unwrap() - tc).abs() < 1e-9);
    }
}

#[test]
fn non_collision_scenes_never_touch() {
    for seed in 0..200 {
        for kind in [ScenarioKind::MovingObjectDirection, ScenarioKind::Stationary] {
            let mut req = ScenarioRequest::new(kind);
            req.near_miss = seed % 2 == 0;
            let s = sample_scenario(&req, seed).unwrap();
            assert_eq!(s.collision_time, None);
            assert_eq!(scan_contact(&s.cyclist, &s.object, s.duration, 1e-3), None, "seed {seed} {kind:?}");
        }
    }
}

#[test]
fn contact_frame_at_thirty_fps() {
    let mut req = ScenarioRequest::new(ScenarioKind::TwoBodyCollision);
    req.duration = Some(6.0);
    req.collision_time = Some(4.2);
    let s = sample_scenario(&req, 11).unwrap();
    assert_eq!(s.annotation_fields().time_to_collision, Some(4.2));
    assert_eq!(s.contact_frame(30.0), Some(126));
    let first = (0..180).find(|&j| scan_contact_at(&s, j as f64 / 30.0)).unwrap();
    assert_eq!(first, 126);
}

fn scan_contact_at(s: &Scenario, t: f64) -> bool {
    let (pa, pb) = (s.cyclist.center_at(t), s.object.center_at(t));
    ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt() <= s.cyclist.radius_at(t) + s.object.radius_at(t) + 1e-12
}

fn is_cyclist(p: &[f32]) -> bool {
    p[0] > 200.0 && p[1] > 190.0 && p[2] < 130.0
}

fn is_object(p: &[f32]) -> bool {
    p[0] > 160.0 && p[1] < 90.0 && p[2] < 100.0
}

#[test]
fn canonical_contact_frame_within_one_frame() {
    let render = RenderConfig { width: 480, height: 270, fps: 24.0 };
    let format = CanonicalFormat::scaled(480);
    for seed in [3u64, 8, 21] {
        let mut req = ScenarioRequest::new(ScenarioKind::TwoBodyCollision);
        req.render = render;
        req.duration = Some(4.0);
        req.collision_time = Some(2.5);
        let s = sample_scenario(&req, seed).unwrap();
        let raw = RawVideo { fps: render.fps, frames: render_scenario(&s) };
        let clip = canonicalize(&raw, &s.manifest_entry("v", "v.rgbv"), &format).unwrap();
        let pixels = crate::video::denormalize(&clip.frames, &clip.zscore_stats);
        let (h, w) = (pixels.h, pixels.w);
        let touching = |j: usize| {
            let f = pixels.frame(j);
            let at = |y: usize, x: usize| &f[(y * w + x) * 3..(y * w + x) * 3 + 3];
            (0..h).any(|y| {
                (0..w - 1).any(|x| {
                    let (a, b) = (at(y, x), at(y, x + 1));
                    let below = if y + 1 < h { Some(at(y + 1, x)) } else { None };
                    (is_cyclist(a) && is_object(b))
                        || (is_object(a) && is_cyclist(b))
                        || below.is_some_and(|c| (is_cyclist(a) && is_object(c)) || (is_object(a) && is_cyclist(c)))
                })
            })
        };
        let seen = (0..pixels.t).find(|&j| touching(j)).expect("contact visible");
        let expected = s.contact_frame(format.fps).unwrap();
        assert!(seen.abs_diff(expected) <= 1, "seed {seed}: first visible contact {seen}, analytic {expected}");
    }
}

#[test]
fn every_direction_is_reachable_for_both_bodies() {
    for kind in ScenarioKind::ALL {
        for dir in reachable_directions(kind) {
            let mut req = ScenarioRequest::new(kind);
            req.cyclist_direction = Some(dir);
            req.object_direction = Some(dir);
            if kind == ScenarioKind::TwoBodyCollision && dir == Direction::Stationary {
                req.object_direction = Some(Direction::Left);
            }
            let s = sample_scenario(&req, 5).unwrap();
            assert_eq!(s.cyclist.direction(), dir, "{kind:?}");
            if kind != ScenarioKind::Stationary {
                assert_eq!(s.object.direction(), req.object_direction.unwrap(), "{kind:?}");
            }
        }
    }
}

#[test]
fn rightward_and_still_labels() {
    let mut req = ScenarioRequest::new(ScenarioKind::MovingObjectDirection);
    req.cyclist_direction = Some(Direction::Right);
    let s = sample_scenario(&req, 1).unwrap();
    assert!(s.cyclist.velocity[0] > 0.0);
    assert_eq!(s.annotation_fields().cyclist_direction, Direction::Right);
    let s = sample_scenario(&ScenarioRequest::new(ScenarioKind::Stationary), 1).unwrap();
    assert_eq!(s.cyclist.velocity, [0.0, 0.0]);
    assert_eq!(s.annotation_fields().cyclist_direction, Direction::Stationary);
}

#[test]
fn generated_annotations_validate() {
    let vocab = crate::ingest::LabelVocabulary::default();
    for seed in 0..100 {
        let kind = ScenarioKind::ALL[seed as usize % 3];
        let s = sample_scenario(&ScenarioRequest::new(kind), seed).unwrap();
        for r in s.raw_labels("v", 3) {
            let v = validate_annotation(&r, &vocab, Some(s.duration));
            assert!(v.is_empty(), "seed {seed}: {v:?}");
        }
        s.manifest_entry("v", "v.rgbv");
    }
}

/// Labels a scenario can produce for `task` over its canonical windows.
fn labels_of(s: &Scenario, task: TaskId) -> Vec<usize> {
    let spec = TaskSpec::new(task);
    let ann = s.annotation("v");
    let t = (s.duration * 30.0).round() as usize;
    let eligible = match spec.eligible_pool {
        crate::tasks::EligiblePool::All => true,
        crate::tasks::EligiblePool::Collision => s.pool() == Pool::Collision,
    };
    if !eligible {
        return vec![];
    }
    segment_starts(t)
        .filter_map(|st| derive_segment_label(&spec, &ann, &SegmentWindow::new("v", st)).ok())
        .filter_map(|l| l.class())
        .collect()
}

#[test]
fn every_task_class_is_reachable() {
    let mut scenes = Vec::new();
    for seed in 0..300u64 {
        let kind = ScenarioKind::ALL[seed as usize % 3];
        let mut req = ScenarioRequest::new(kind);
        req.near_miss = seed % 6 == 0;
        scenes.push(sample_scenario(&req, seed).unwrap());
    }
    for task in TaskId::ALL {
        let spec = TaskSpec::new(task);
        match spec.n_classes() {
            Some(n) => {
                let seen: BTreeSet<usize> = scenes.iter().flat_map(|s| labels_of(s, task)).collect();
                assert_eq!(seen.len(), n, "{task:?}: classes seen {seen:?}");
            }
            None => {
                assert!(scenes.iter().any(|s| s.collision_time.is_some()));
            }
        }
    }
    // Unknown entries occur in the optional fields.
    assert!(scenes.iter().any(|s| s.attributes.age.is_none()));
    assert!(scenes.iter().any(|s| s.attributes.fault.is_none()));
    assert!(scenes.iter().any(|s| s.attributes.right_of_way.is_none()));
    assert!(scenes.iter().any(|s| s.near_miss && s.pool() == Pool::Collision));
}

#[test]
fn mix_parsing_and_counts() {
    let m: SuiteMix = "collision=0.5,moving=0.3,stationary=0.2".parse().unwrap();
    assert_eq!(m.counts(40).map(|x| x.1), [20, 12, 8]);
    assert_eq!(m.counts(7).iter().map(|x| x.1).sum::<usize>(), 7);
    let m: SuiteMix = "collision=1,moving=1".parse().unwrap();
    assert_eq!(m.counts(5).map(|x| x.1), [3, 2, 0]);
    assert!("collision=-1".parse::<SuiteMix>().is_err());
    assert!("bogus=1".parse::<SuiteMix>().is_err());
    assert!("collision=0".parse::<SuiteMix>().is_err());
}

fn read_tree(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn suites_are_reproducible_and_follow_the_mix() {
    let mut opts = SuiteOptions::new(10, 7);
    opts.render = small_render();
    opts.mix = "collision=0.5,moving=0.5".parse().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = generate_suite(&opts, a.path()).unwrap();
    generate_suite(&opts, b.path()).unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
    assert_eq!(sa.collision_rate(), 0.5);
    assert_eq!(sa.kind_counts["two_body_collision"], 5);
    let labels = crate::ingest::read_raw_labels(&sa.files.raw_labels[0]).unwrap();
    assert_eq!(labels.len(), 10);
    let anns = crate::ingest::read_annotations(&sa.files.annotations).unwrap();
    let merged = crate::ingest::aggregate_files(
        &sa.files.raw_labels.iter().map(|p| crate::ingest::read_raw_labels(p).unwrap()).collect::<Vec<_>>(),
        &crate::ingest::LabelVocabulary::default(),
    )
    .unwrap();
    assert_eq!(merged, anns);
    let manifest = crate::ingest::parse_manifest(&sa.files.manifest).unwrap();
    assert_eq!(manifest.len(), 10);
    let raw = crate::video::read_raw_video(&sa.files.raw_dir.join(&manifest[0].source_url)).unwrap();
    assert_eq!((raw.frames.w, raw.frames.h, raw.fps), (96, 60, 24.0));
    let other = SuiteOptions { seed: 8, ..opts };
    let c = tempfile::tempdir().unwrap();
    generate_suite(&other, c.path()).unwrap();
    assert_ne!(read_tree(a.path()), read_tree(c.path()));
    assert!(generate_suite(&SuiteOptions::new(1, 0), c.path()).is_err());
}

#[test]
fn direction_classes_cycle_within_kinds() {
    let mut opts = SuiteOptions::new(40, 3);
    opts.mix = "moving=1".parse().unwrap();
    let dirs: Vec<Direction> = (0..40).map(|i| scenario_for_index(&opts, i).unwrap().cyclist.direction()).collect();
    for d in [Direction::Forward, Direction::Backward, Direction::Left, Direction::Right] {
        assert_eq!(dirs.iter().filter(|&&x| x == d).count(), 10);
    }
    let _ = Direction::count();
}
