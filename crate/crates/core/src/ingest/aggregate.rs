//! Combining three raters into one label set.

use crate::error::{Error, Result};

use super::labels::{AnnotationFields, AnnotationRecord, BBox, Categorical, LabelVocabulary, RawLabelRecord};

/// Median of ordinal votes with abstentions (`None`) dropped.
///
/// Fewer than two usable votes yields unknown. With an even number of usable
/// votes the two central values must agree, otherwise the result is unknown.
pub fn median_vote(votes: &[Option<usize>]) -> Option<usize> {
    let mut known: Vec<usize> = votes.iter().flatten().copied().collect();
    if known.len() < 2 && votes.len() > 1 {
        return None;
    }
    if known.is_empty() {
        return None;
    }
    known.sort_unstable();
    let n = known.len();
    if n % 2 == 1 {
        Some(known[n / 2])
    } else {
        let (lo, hi) = (known[n / 2 - 1], known[n / 2]);
        (lo == hi).then_some(lo)
    }
}

fn median_cat<C: Categorical>(votes: impl Iterator<Item = Option<C>>) -> Option<C> {
    let idx: Vec<Option<usize>> = votes.map(|v| v.map(Categorical::index)).collect();
    median_vote(&idx).and_then(C::from_index)
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median_named(votes: &[Option<&str>], vocab: &[String]) -> Option<String> {
    let idx: Vec<Option<usize>> = votes
        .iter()
        .map(|v| v.and_then(|name| vocab.iter().position(|o| o == name)))
        .collect();
    median_vote(&idx).map(|i| vocab[i].clone())
}

/// Aggregate exactly three labeller records for one video.
///
/// Categorical fields take the ordinal median, continuous fields (risk,
/// collision time, box coordinates) the mean of the values present. The
/// collision time is absent only when every rater left it empty.
pub fn aggregate_labels(records: &[RawLabelRecord], vocab: &LabelVocabulary) -> Result<AnnotationRecord> {
    if records.len() != 3 {
        return Err(Error::Invalid(format!("aggregation needs exactly 3 records, got {}", records.len())));
    }
    let video_id = &records[0].video_id;
    if let Some(r) = records.iter().find(|r| &r.video_id != video_id) {
        return Err(Error::Invalid(format!("mixed video ids {video_id:?} and {:?}", r.video_id)));
    }
    let f: Vec<&AnnotationFields> = records.iter().map(|r| &r.fields).collect();
    fn required<T>(video_id: &str, what: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::Invalid(format!("{video_id}: no consensus for {what}")))
    }
    let mean = |get: &dyn Fn(&AnnotationFields) -> f64| f.iter().map(|x| get(x)).sum::<f64>() / 3.0;

    let object_votes: Vec<Option<&str>> = f.iter().map(|x| x.object_type.as_deref()).collect();
    let camera_votes: Vec<Option<&str>> = f.iter().map(|x| Some(x.camera_position.as_str())).collect();

    let fields = AnnotationFields {
        right_of_way: median_cat(f.iter().map(|x| x.right_of_way)),
        time_to_collision: mean_present(f.iter().map(|x| x.time_to_collision)),
        object_type: median_named(&object_votes, &vocab.object_types),
        fault: median_cat(f.iter().map(|x| x.fault)),
        severity: required(video_id, "severity", median_cat(f.iter().map(|x| Some(x.severity))))?,
        risk: mean(&|x| x.risk),
        age: median_cat(f.iter().map(|x| x.age)),
        cyclist_type: median_cat(f.iter().map(|x| x.cyclist_type)),
        bbox: BBox::new(mean(&|x| x.bbox.x), mean(&|x| x.bbox.y), mean(&|x| x.bbox.w), mean(&|x| x.bbox.h)),
        cyclist_direction: required(video_id, "cyclist_direction", median_cat(f.iter().map(|x| Some(x.cyclist_direction))))?,
        object_direction: required(video_id, "object_direction", median_cat(f.iter().map(|x| Some(x.object_direction))))?,
        camera_position: required(video_id, "camera_position", median_named(&camera_votes, &vocab.camera_positions))?,
        ego_involved: required(video_id, "ego_involved", median_cat(f.iter().map(|x| Some(x.ego_involved))))?,
    };
    Ok(AnnotationRecord::new(video_id.clone(), fields))
}
