//! Three labellers, one disagreement per field: aggregation by vote,
//! Randolph's kappa per field, and a Latin-square labelling schedule.
//!
//! cargo run --release --example annotation_qc

use cyclist_collision::ingest::{
    aggregate_files, field_agreement, latin_square_assignment, Age, AnnotationFields, BBox, Direction, LabelVocabulary,
    RawLabelRecord, Severity, YesNo,
};

fn record(labeller: &str, video: &str, age: Age, severity: Severity, risk: f64) -> RawLabelRecord {
    RawLabelRecord {
        labeller_id: labeller.into(),
        video_id: video.into(),
        fields: AnnotationFields {
            right_of_way: Some(YesNo::No),
            time_to_collision: Some(2.4),
            object_type: Some("car".into()),
            fault: Some(YesNo::Yes),
            severity,
            risk,
            age: Some(age),
            cyclist_type: None,
            bbox: BBox::new(400.0, 200.0, 120.0, 260.0),
            cyclist_direction: Direction::Forward,
            object_direction: Direction::Left,
            camera_position: "front_helmet_camera".into(),
            ego_involved: YesNo::Yes,
        },
    }
}

fn main() -> cyclist_collision::Result<()> {
    let votes = [
        [(Age::Adult, Severity::Minor, 0.55), (Age::Young, Severity::High, 0.9)],
        [(Age::Adult, Severity::Minor, 0.60), (Age::Young, Severity::High, 0.8)],
        [(Age::Old, Severity::Minor, 0.70), (Age::Young, Severity::Moderate, 0.85)],
    ];
    let files: Vec<Vec<RawLabelRecord>> = votes
        .iter()
        .enumerate()
        .map(|(l, v)| {
            let name = format!("L{}", l + 1);
            vec![record(&name, "clip_a", v[0].0, v[0].1, v[0].2), record(&name, "clip_b", v[1].0, v[1].1, v[1].2)]
        })
        .collect();

    for a in aggregate_files(&files, &LabelVocabulary::default())? {
        let f = &a.fields;
        println!("{}: age {:?}, severity {:?}, risk {:.3}", a.video_id, f.age, f.severity, f.risk);
    }
    for field in ["age", "severity", "risk"] {
        let r = field_agreement(&files, field)?;
        println!("kappa[{field}] = {:.4} over {} clips and {} categories", r.kappa, r.n_items, r.n_categories);
    }
    let schedule = latin_square_assignment(3, &["batch1", "batch2", "batch3", "batch4", "batch5", "batch6"])?;
    for (i, row) in schedule.iter().enumerate() {
        println!("labeller {}: {}", i + 1, row.join(" -> "));
    }
    Ok(())
}
