//! Manifest parsing, annotation validation and multi-rater quality control.

mod aggregate;
mod agreement;
mod labels;
mod latin;
mod manifest;

pub use aggregate::{aggregate_labels, median_vote};
pub use agreement::{field_agreement, randolph_kappa, AgreementReport, AGREEMENT_FIELDS};
pub use labels::{
    read_annotations, read_raw_labels, validate_annotation, write_annotations, write_raw_labels, Age,
    AnnotationFields, AnnotationRecord, BBox, Categorical, CyclistType, Direction, LabelVocabulary, RawLabelRecord,
    RiskClass, Severity, YesNo, FIELD_NAMES, FRAME_HEIGHT, FRAME_WIDTH,
};
pub use latin::{latin_square_assignment, verify_latin_square};
pub use manifest::{parse_manifest, write_manifest, Platform, Pool, VideoManifestEntry, MAX_DURATION, MIN_DURATION};

#[cfg(test)]
pub(crate) use labels::fixtures;

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Group raw records from several labeller files by video and aggregate
/// each video's three records. Output follows first-seen video order.
pub fn aggregate_files(labellers: &[Vec<RawLabelRecord>], vocab: &LabelVocabulary) -> Result<Vec<AnnotationRecord>> {
    let mut order = Vec::new();
    let mut by_video: BTreeMap<String, Vec<RawLabelRecord>> = BTreeMap::new();
    for r in labellers.iter().flatten() {
        let e = by_video.entry(r.video_id.clone()).or_default();
        if e.is_empty() {
            order.push(r.video_id.clone());
        }
        e.push(r.clone());
    }
    order
        .iter()
        .map(|v| {
            aggregate_labels(&by_video[v], vocab).map_err(|e| match e {
                Error::Invalid(m) => Error::Invalid(format!("video {v}: {m}")),
                other => other,
            })
        })
        .collect()
}
