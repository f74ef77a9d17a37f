use std::path::Path;
use std::process::{Command, Output};

use cyclist_collision::ingest::{
    parse_manifest, write_raw_labels, AnnotationFields, BBox, Direction, RawLabelRecord, Severity, YesNo,
};
use cyclist_collision::tasks::TaskDataset;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cyclist-collision"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().expect("binary runs");
    if !out.status.success() {
        eprintln!("{args:?}\nstdout: {}\nstderr: {}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SUBCOMMANDS: [&str; 13] = [
    "preprocess",
    "validate",
    "aggregate",
    "agreement",
    "assign",
    "split",
    "build-task",
    "train",
    "eval",
    "embed",
    "stats",
    "synth",
    "report",
];

#[test]
fn help_documents_every_flag() {
    let top = bin().arg("--help").output().unwrap();
    assert!(top.status.success());
    let text = stdout(&top);
    for sub in SUBCOMMANDS {
        assert!(text.contains(sub), "top-level help lacks {sub}");
        let out = bin().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub} --help failed");
        let help = stdout(&out);
        let lines: Vec<&str> = help.lines().collect();
        let indent = |l: &str| l.len() - l.trim_start().len();
        for (i, line) in lines.iter().enumerate() {
            let flag = line.trim_start();
            if !(flag.starts_with("--") || flag.starts_with("-h") || flag.starts_with("-V")) {
                continue;
            }
            // Either "--name <NAME>  Description" or the description on the
            // next, deeper-indented line; a bare value list does not count.
            let inline = flag.split_once("  ").is_some_and(|(_, d)| !d.trim().is_empty());
            let next = lines.get(i + 1).copied().unwrap_or_default();
            let below = indent(next) > indent(line)
                && !next.trim().is_empty()
                && !next.trim_start().starts_with("Possible values");
            assert!(inline || below, "{sub}: undocumented flag line {flag:?}");
        }
    }
}

fn ids_file(dir: &Path, n: usize) -> std::path::PathBuf {
    let p = dir.join("ids.txt");
    let ids: Vec<String> = (0..n).map(|i| format!("vid{i:03}")).collect();
    std::fs::write(&p, ids.join("\n")).unwrap();
    p
}

#[test]
fn split_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    ids_file(dir.path(), 50);
    let a = run(dir.path(), &["split", "--videos", "ids.txt", "--seed", "7", "--out", "a.json"]);
    let b = run(dir.path(), &["split", "--videos", "ids.txt", "--seed", "7", "--out", "b.json"]);
    let c = run(dir.path(), &["split", "--videos", "ids.txt", "--seed", "8", "--out", "c.json"]);
    assert!(a.status.success() && b.status.success() && c.status.success());
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_ne!(read("a.json"), read("c.json"));
    assert!(stdout(&a).contains("35 train / 15 test"));
    let default = run(dir.path(), &["--run", "r", "split", "--videos", "ids.txt", "--seed", "7"]);
    assert!(default.status.success());
    assert_eq!(read("a.json"), read("r/splits/split_seed7.json"));
    let records = std::fs::read_to_string(dir.path().join("r/run.json")).unwrap();
    assert!(records.contains("split:7"));
}

fn raw(labeller: &str, video: &str, risk: f64) -> RawLabelRecord {
    RawLabelRecord {
        labeller_id: labeller.into(),
        video_id: video.into(),
        fields: AnnotationFields {
            right_of_way: Some(YesNo::Yes),
            time_to_collision: None,
            object_type: Some("car".into()),
            fault: Some(YesNo::No),
            severity: Severity::Safe,
            risk,
            age: None,
            cyclist_type: None,
            bbox: BBox::new(10.0, 10.0, 100.0, 100.0),
            cyclist_direction: Direction::Forward,
            object_direction: Direction::Stationary,
            camera_position: "front_dashcam".into(),
            ego_involved: YesNo::No,
        },
    }
}

#[test]
fn agreement_on_the_two_item_fixture() {
    // Risk quantizes to four classes. Video a: all low. Video b: moderate,
    // moderate, high. P_o = (1 + 1/3) / 2, P_e = 1/4, kappa = 5/9.
    let dir = tempfile::tempdir().unwrap();
    let risks = [[0.1, 0.3], [0.1, 0.3], [0.1, 0.6]];
    let mut args = vec!["agreement".to_string(), "--raw-labels".into()];
    for (l, r) in risks.iter().enumerate() {
        let name = format!("L{l}.csv");
        write_raw_labels(&dir.path().join(&name), &[raw(&name, "a", r[0]), raw(&name, "b", r[1])]).unwrap();
        args.push(name);
    }
    args.extend(["--fields".into(), "risk,severity".into()]);
    let out = run(dir.path(), &args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("risk\t0.5556")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("severity\t1.0000")), "{text}");
}

#[test]
fn exit_codes_separate_bad_input_from_success() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bin().current_dir(dir.path()).args(args).output().unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["no-such-command"]), Some(1));
    assert_eq!(code(&["build-task", "--task", "speed", "--split", "x", "--annotations", "y"]), Some(1));
    assert_eq!(code(&["split", "--videos", "missing.txt"]), Some(1));
    std::fs::write(dir.path().join("blocker"), "a file where a directory should be").unwrap();
    assert_eq!(code(&["--run", "blocker/r", "split", "--videos", "missing.txt"]), Some(2));
    ids_file(dir.path(), 1);
    assert_eq!(code(&["split", "--videos", "ids.txt"]), Some(1));
    assert_eq!(code(&["eval", "--checkpoint", "nope", "--task", "ttc"]), Some(1));

    let mut bad = raw("L1", "v", 0.5);
    bad.fields.bbox = BBox::new(1200.0, 10.0, 200.0, 50.0);
    write_raw_labels(&dir.path().join("bad.csv"), &[raw("L1", "ok", 0.5), bad]).unwrap();
    let out = bin().current_dir(dir.path()).args(["validate", "--annotations", "bad.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("v (L1)"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 of 2 records failed"));
}

#[test]
fn assign_prints_a_cyclic_square() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.txt"), "A\nB\nC\n").unwrap();
    let out = run(dir.path(), &["assign", "--labellers", "3", "--batches", "b.txt", "--out", "a.csv"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "labeller 1: A B C\nlabeller 2: B C A\nlabeller 3: C A B\n");
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    let uneven = bin().current_dir(dir.path()).args(["assign", "--labellers", "2", "--batches", "b.txt"]).output().unwrap();
    assert_eq!(uneven.status.code(), Some(1));
}

/// Window starts every 15 frames while a full 30-frame window fits.
fn enumerate_windows(t: usize) -> usize {
    (0..t).filter(|s| s % 15 == 0 && s + 30 <= t).count()
}

#[test]
fn synth_preprocess_build_task_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: [&[&str]; 4] = [
        &["--run", "r", "synth", "--n", "40", "--seed", "7", "--width", "96", "--height", "54"],
        &["--run", "r", "preprocess", "--manifest", "r/synth/manifest.csv", "--raw-dir", "r/synth/raw", "--width", "64"],
        &["--run", "r", "split", "--videos", "r/manifest.csv", "--seed", "7"],
        &["--run", "r", "build-task", "--task", "direction", "--split", "r/splits/split_seed7.json", "--annotations", "r/synth/annotations.csv"],
    ];
    for s in steps {
        assert!(run(d, s).status.success(), "{s:?}");
    }
    let manifest = parse_manifest(&d.join("r/synth/manifest.csv")).unwrap();
    let split: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r/splits/split_seed7.json")).unwrap()).unwrap();
    let count = |side: &str| -> usize {
        split[side]
            .as_array()
            .unwrap()
            .iter()
            .map(|id| {
                let e = manifest.iter().find(|e| e.video_id == id.as_str().unwrap()).unwrap();
                enumerate_windows(((e.end_time - e.start_time) * 30.0).round() as usize)
            })
            .sum()
    };
    let dataset = TaskDataset::load(&d.join("r/tasks/direction.json")).unwrap();
    assert_eq!(dataset.train.len(), count("train_video_ids"));
    assert_eq!(dataset.test.len(), count("test_video_ids"));
    assert!(dataset.train.len() > 40);

    // Re-running a step rewrites identical artifacts.
    let before = std::fs::read(d.join("r/tasks/direction.json")).unwrap();
    assert!(run(d, steps[3]).status.success());
    assert_eq!(before, std::fs::read(d.join("r/tasks/direction.json")).unwrap());
    let clip = std::fs::read(d.join("r/canonical/syn_00000.frames")).unwrap();
    assert!(run(d, steps[1]).status.success());
    assert_eq!(clip, std::fs::read(d.join("r/canonical/syn_00000.frames")).unwrap());
}

#[test]
fn train_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: [&[&str]; 8] = [
        &["--run", "r", "synth", "--n", "12", "--seed", "3", "--width", "96", "--height", "54", "--duration", "1.5"],
        &["--run", "r", "preprocess", "--manifest", "r/synth/manifest.csv", "--raw-dir", "r/synth/raw", "--width", "64"],
        &["--run", "r", "split", "--videos", "r/manifest.csv", "--seed", "1"],
        &["--run", "r", "build-task", "--task", "8", "--split", "r/splits/split_seed1.json", "--annotations", "r/synth/annotations.csv"],
        &["--run", "r", "train", "--task", "direction", "--epochs", "1", "--batch-size", "4", "--lr", "1e-3", "--name", "m"],
        &["--run", "r", "eval", "--checkpoint", "m", "--task", "direction"],
        &["--run", "r", "embed", "--checkpoint", "m", "--n", "10", "--tsne-epochs", "50"],
        &["--run", "r", "report"],
    ];
    let mut last = None;
    for s in steps {
        let out = run(d, s);
        assert!(out.status.success(), "{s:?}");
        last = Some(out);
    }
    let summary = stdout(&last.unwrap());
    assert!(summary.contains("eval-m-direction-full-test"), "{summary}");
    assert!(summary.contains("| 8 direction |"));
    for sub in ["canonical", "splits", "tasks", "checkpoints", "reports"] {
        assert!(d.join("r").join(sub).is_dir());
    }
    assert!(d.join("r/reports/embed-m-direction.png").exists());
    let first = std::fs::read(d.join("r/reports/eval-m-direction-full-test.json")).unwrap();
    assert!(run(d, steps[5]).status.success());
    assert_eq!(first, std::fs::read(d.join("r/reports/eval-m-direction-full-test.json")).unwrap());
}
