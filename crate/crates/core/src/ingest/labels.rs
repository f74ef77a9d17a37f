//! Per-video annotation vocabulary, raw labeller records and aggregated records.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical frame geometry that bounding boxes are expressed in.
pub const FRAME_WIDTH: f64 = 1280.0;
pub const FRAME_HEIGHT: f64 = 720.0;

/// Text used for unknown / abstained entries in label files.
pub const UNKNOWN: &str = "-1";

/// A closed set of ordered categories. The declaration order is the ordinal
/// order used when taking the median across raters.
pub trait Categorical: Sized + Copy + Eq + fmt::Debug {
    const NAMES: &'static [&'static str];

    fn index(self) -> usize;
    fn from_index(i: usize) -> Option<Self>;

    fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Self::NAMES.iter().position(|n| *n == norm).and_then(Self::from_index)
    }

    fn count() -> usize {
        Self::NAMES.len()
    }
}

macro_rules! categorical {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl Categorical for $name {
            const NAMES: &'static [&'static str] = &[$($text),+];
            fn index(self) -> usize { self as usize }
            fn from_index(i: usize) -> Option<Self> {
                const ALL: &[$name] = &[$($name::$variant),+];
                ALL.get(i).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

categorical!(
    /// Binary answers; `no < yes`.
    YesNo { No => "no", Yes => "yes" }
);
categorical!(Severity { Safe => "safe", Minor => "minor", Moderate => "moderate", High => "high", VeryHigh => "very_high" });
categorical!(Age { Young => "young", Adult => "adult", Old => "old" });
categorical!(CyclistType { Competitive => "competitive", Recreational => "recreational" });
categorical!(
    /// Motion direction as seen from the ego vehicle. Forward/backward are
    /// medial (away from / toward the camera), left/right lateral.
    Direction { Forward => "forward", Backward => "backward", Left => "left", Right => "right", Stationary => "stationary" }
);
categorical!(RiskClass { Low => "low", Moderate => "moderate", High => "high", VeryHigh => "very_high" });

/// Editable vocabularies for the open-ended categorical fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelVocabulary {
    pub object_types: Vec<String>,
    pub camera_positions: Vec<String>,
}

impl Default for LabelVocabulary {
    fn default() -> Self {
        let objects = [
            "car", "bus", "train", "cyclist", "pedestrian", "pothole", "animal", "motorcycle", "truck", "van", "tram",
            "scooter", "pole", "curb", "debris", "car_door", "other",
        ];
        let cameras = [
            "front_dashcam",
            "back_dashcam",
            "front_helmet_camera",
            "back_helmet_camera",
            "handlebar_camera",
            "other",
        ];
        Self {
            object_types: objects.iter().map(|s| s.to_string()).collect(),
            camera_positions: cameras.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LabelVocabulary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.object_types.iter().position(|o| o == name)
    }

    pub fn camera_index(&self, name: &str) -> Option<usize> {
        self.camera_positions.iter().position(|c| c == name)
    }
}

/// Axis-aligned box `(x, y, w, h)` in canonical 1280×720 pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let fmt = |x: f64| {
            if x.fract() == 0.0 {
                format!("{}", x as i64)
            } else {
                format!("{x}")
            }
        };
        if self.w <= 0.0 || self.h <= 0.0 {
            v.push(format!("bbox has non-positive size: w={} h={}", fmt(self.w), fmt(self.h)));
        }
        if self.x < 0.0 || self.y < 0.0 {
            v.push(format!("bbox origin outside frame: ({}, {})", fmt(self.x), fmt(self.y)));
        }
        if self.x + self.w > FRAME_WIDTH {
            v.push(format!(
                "bbox exceeds frame width: {}+{} > {}",
                fmt(self.x),
                fmt(self.w),
                FRAME_WIDTH as i64
            ));
        }
        if self.y + self.h > FRAME_HEIGHT {
            v.push(format!(
                "bbox exceeds frame height: {}+{} > {}",
                fmt(self.y),
                fmt(self.h),
                FRAME_HEIGHT as i64
            ));
        }
        v
    }

    fn to_field(self) -> String {
        format!("{} {} {} {}", self.x, self.y, self.w, self.h)
    }

    fn parse(s: &str) -> Option<Self> {
        let parts: Vec<f64> = s.split_whitespace().map(|p| p.parse().ok()).collect::<Option<_>>()?;
        match parts[..] {
            [x, y, w, h] => Some(Self { x, y, w, h }),
            _ => None,
        }
    }
}

/// The thirteen annotation fields shared by raw and aggregated records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFields {
    pub right_of_way: Option<YesNo>,
    /// Seconds from clip start to collision onset; `None` when no collision occurs.
    pub time_to_collision: Option<f64>,
    pub object_type: Option<String>,
    pub fault: Option<YesNo>,
    pub severity: Severity,
    pub risk: f64,
    pub age: Option<Age>,
    pub cyclist_type: Option<CyclistType>,
    /// One box per video, taken on the first frame.
    pub bbox: BBox,
    pub cyclist_direction: Direction,
    pub object_direction: Direction,
    pub camera_position: String,
    pub ego_involved: YesNo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawLabelRecord {
    pub labeller_id: String,
    pub video_id: String,
    pub fields: AnnotationFields,
}

/// Final per-video labels after combining three raters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub fields: AnnotationFields,
    pub has_collision: bool,
}

impl AnnotationRecord {
    pub fn new(video_id: impl Into<String>, fields: AnnotationFields) -> Self {
        let has_collision = fields.time_to_collision.is_some();
        Self { video_id: video_id.into(), fields, has_collision }
    }
}

pub const FIELD_NAMES: [&str; 13] = [
    "right_of_way",
    "time_to_collision",
    "object_type",
    "fault",
    "severity",
    "risk",
    "age",
    "cyclist_type",
    "bbox",
    "cyclist_direction",
    "object_direction",
    "camera_position",
    "ego_involved",
];

fn opt_cat<C: Categorical>(v: Option<C>) -> String {
    v.map_or_else(|| UNKNOWN.to_string(), |c| c.name().to_string())
}

impl AnnotationFields {
    fn to_columns(&self) -> Vec<String> {
        vec![
            opt_cat(self.right_of_way),
            self.time_to_collision.map_or_else(String::new, |t| t.to_string()),
            self.object_type.clone().unwrap_or_else(|| UNKNOWN.to_string()),
            opt_cat(self.fault),
            self.severity.name().to_string(),
            self.risk.to_string(),
            opt_cat(self.age),
            opt_cat(self.cyclist_type),
            self.bbox.to_field(),
            self.cyclist_direction.name().to_string(),
            self.object_direction.name().to_string(),
            self.camera_position.clone(),
            self.ego_involved.name().to_string(),
        ]
    }

    fn from_row(get: &dyn Fn(&str) -> std::result::Result<String, String>) -> std::result::Result<Self, String> {
        fn cat<C: Categorical>(field: &str, s: &str) -> std::result::Result<C, String> {
            C::parse(s).ok_or_else(|| format!("{field}: unrecognised value {s:?}"))
        }
        fn opt<C: Categorical>(field: &str, s: &str) -> std::result::Result<Option<C>, String> {
            if s.trim() == UNKNOWN {
                Ok(None)
            } else {
                cat(field, s).map(Some)
            }
        }
        let num = |field: &str, s: &str| -> std::result::Result<f64, String> {
            s.trim().parse::<f64>().map_err(|_| format!("{field}: not a number: {s:?}"))
        };
        let ttc = get("time_to_collision")?;
        let object = get("object_type")?;
        Ok(Self {
            right_of_way: opt("right_of_way", &get("right_of_way")?)?,
            time_to_collision: match ttc.trim() {
                "" | UNKNOWN => None,
                s => Some(num("time_to_collision", s)?),
            },
            object_type: match object.trim() {
                UNKNOWN => None,
                s => Some(s.to_string()),
            },
            fault: opt("fault", &get("fault")?)?,
            severity: cat("severity", &get("severity")?)?,
            risk: num("risk", &get("risk")?)?,
            age: opt("age", &get("age")?)?,
            cyclist_type: opt("cyclist_type", &get("cyclist_type")?)?,
            bbox: {
                let s = get("bbox")?;
                BBox::parse(&s).ok_or_else(|| format!("bbox: expected \"x y w h\", got {s:?}"))?
            },
            cyclist_direction: cat("cyclist_direction", &get("cyclist_direction")?)?,
            object_direction: cat("object_direction", &get("object_direction")?)?,
            camera_position: get("camera_position")?.trim().to_string(),
            ego_involved: cat("ego_involved", &get("ego_involved")?)?,
        })
    }
}

fn read_rows<T>(
    path: &Path,
    required: &[&str],
    mut parse: impl FnMut(&dyn Fn(&str) -> std::result::Result<String, String>) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let display = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Invalid(format!("{display}: {e}")))?;
    let headers = rdr.headers()?.clone();
    let index: BTreeMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
    for r in required {
        if !index.contains_key(*r) {
            return Err(Error::Row { path: display, row: 1, message: format!("missing column {r:?}") });
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Row { path: display.clone(), row, message: e.to_string() })?;
        let get = |name: &str| -> std::result::Result<String, String> {
            let idx = index.get(name).ok_or_else(|| format!("missing column {name:?}"))?;
            Ok(rec.get(*idx).unwrap_or("").to_string())
        };
        out.push(parse(&get).map_err(|message| Error::Row { path: display.clone(), row, message })?);
    }
    Ok(out)
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn raw_header() -> Vec<&'static str> {
    let mut h = vec!["labeller_id", "video_id"];
    h.extend(FIELD_NAMES);
    h
}

fn aggregated_header() -> Vec<&'static str> {
    let mut h = vec!["video_id"];
    h.extend(FIELD_NAMES);
    h.push("has_collision");
    h
}

pub fn read_raw_labels(path: &Path) -> Result<Vec<RawLabelRecord>> {
    read_rows(path, &raw_header(), |get| {
        Ok(RawLabelRecord {
            labeller_id: get("labeller_id")?,
            video_id: get("video_id")?,
            fields: AnnotationFields::from_row(get)?,
        })
    })
}

pub fn write_raw_labels(path: &Path, records: &[RawLabelRecord]) -> Result<()> {
    write_rows(
        path,
        &raw_header(),
        records.iter().map(|r| {
            let mut row = vec![r.labeller_id.clone(), r.video_id.clone()];
            row.extend(r.fields.to_columns());
            row
        }),
    )
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    read_rows(path, &aggregated_header(), |get| {
        let fields = AnnotationFields::from_row(get)?;
        let flag = get("has_collision")?;
        let has_collision = match flag.trim() {
            "1" => true,
            "0" => false,
            other => return Err(format!("has_collision: expected 0/1, got {other:?}")),
        };
        if has_collision != fields.time_to_collision.is_some() {
            return Err("has_collision disagrees with time_to_collision".into());
        }
        Ok(AnnotationRecord { video_id: get("video_id")?, fields, has_collision })
    })
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    write_rows(
        path,
        &aggregated_header(),
        records.iter().map(|r| {
            let mut row = vec![r.video_id.clone()];
            row.extend(r.fields.to_columns());
            row.push(if r.has_collision { "1" } else { "0" }.to_string());
            row
        }),
    )
}

/// Check one labeller record against field invariants and the vocabulary.
/// `clip_duration` bounds the time-to-collision when known.
pub fn validate_annotation(record: &RawLabelRecord, vocab: &LabelVocabulary, clip_duration: Option<f64>) -> Vec<String> {
    let f = &record.fields;
    let mut v = f.bbox.violations();
    if !(0.0..=1.0).contains(&f.risk) {
        v.push(format!("risk outside [0, 1]: {}", f.risk));
    }
    if let Some(t) = f.time_to_collision {
        if t < 0.0 {
            v.push(format!("time_to_collision negative: {t}"));
        }
        if let Some(d) = clip_duration {
            if t > d {
                v.push(format!("time_to_collision {t} exceeds clip duration {d}"));
            }
        }
    }
    if let Some(o) = &f.object_type {
        if vocab.object_index(o).is_none() {
            v.push("unknown object_type".to_string());
        }
    }
    if vocab.camera_index(&f.camera_position).is_none() {
        v.push("unknown camera_position".to_string());
    }
    v
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn valid_record_has_no_violations() {
        assert!(validate_annotation(&raw("a"), &LabelVocabulary::default(), Some(5.0)).is_empty());
    }

    #[test]
    fn bbox_past_right_edge() {
        let mut r = raw("a");
        r.fields.bbox = BBox::new(1200.0, 100.0, 200.0, 50.0);
        assert_eq!(
            validate_annotation(&r, &LabelVocabulary::default(), None),
            vec!["bbox exceeds frame width: 1200+200 > 1280".to_string()]
        );
    }

    #[test]
    fn object_outside_vocabulary() {
        let vocab = LabelVocabulary::default();
        assert_eq!(vocab.object_types.len(), 17);
        let mut r = raw("a");
        r.fields.object_type = Some("skateboard".into());
        assert_eq!(validate_annotation(&r, &vocab, None), vec!["unknown object_type".to_string()]);
    }

    #[test]
    fn ttc_beyond_clip_and_risk_range() {
        let mut r = raw("a");
        r.fields.time_to_collision = Some(6.0);
        r.fields.risk = 1.5;
        let v = validate_annotation(&r, &LabelVocabulary::default(), Some(5.0));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn category_parsing_is_lenient_on_spacing() {
        assert_eq!(Severity::parse("Very High"), Some(Severity::VeryHigh));
        assert_eq!(RiskClass::parse("very_high"), Some(RiskClass::VeryHigh));
        assert_eq!(Direction::parse("LEFT"), Some(Direction::Left));
        assert_eq!(Age::parse("-1"), None);
    }

    #[test]
    fn raw_and_aggregated_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = raw("a");
        a.fields.fault = None;
        a.fields.time_to_collision = None;
        a.fields.object_type = None;
        let b = raw("b");
        let p = dir.path().join("raw.csv");
        write_raw_labels(&p, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_raw_labels(&p).unwrap(), vec![a.clone(), b.clone()]);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("labeller_id,video_id,right_of_way,time_to_collision"));
        assert!(text.lines().nth(1).unwrap().contains(",-1,"));

        let recs = vec![AnnotationRecord::new("v1", a.fields), AnnotationRecord::new("v2", b.fields)];
        let q = dir.path().join("agg.csv");
        write_annotations(&q, &recs).unwrap();
        assert_eq!(read_annotations(&q).unwrap(), recs);
    }

    #[test]
    fn malformed_row_names_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("raw.csv");
        let mut r = raw("a");
        r.fields.camera_position = "front_dashcam".into();
        write_raw_labels(&p, &[r.clone(), r]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replace("minor", "catastrophic");
        std::fs::write(&p, text).unwrap();
        let err = read_raw_labels(&p).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("severity"), "{err}");
    }
}
