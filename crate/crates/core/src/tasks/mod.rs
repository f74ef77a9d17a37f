//! The nine supervised tasks: eligibility, per-window labels, splits and
//! class-imbalance handling.

mod dataset;
mod split;

pub use dataset::{
    balance_ttc, build_task_dataset, DatasetReport, LabeledSegment, PoolMap, SkipReason, TaskDataset,
    window_count,
};
pub use split::{make_pooled_split, make_split, SplitManifest};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    Age, AnnotationRecord, Categorical, Direction, RiskClass, Severity, YesNo,
};
use crate::video::{SegmentWindow, CANONICAL_FPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskId {
    Risk = 1,
    RightOfWay = 2,
    Anticipation = 3,
    Ttc = 4,
    Severity = 5,
    Fault = 6,
    Age = 7,
    Direction = 8,
    ObjectDirection = 9,
}

impl TaskId {
    pub const ALL: [TaskId; 9] = [
        TaskId::Risk,
        TaskId::RightOfWay,
        TaskId::Anticipation,
        TaskId::Ttc,
        TaskId::Severity,
        TaskId::Fault,
        TaskId::Age,
        TaskId::Direction,
        TaskId::ObjectDirection,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(n.checked_sub(1)? as usize).copied()
    }

    /// Short name used on the command line and in files.
    pub fn slug(self) -> &'static str {
        match self {
            TaskId::Risk => "risk",
            TaskId::RightOfWay => "row",
            TaskId::Anticipation => "anticipation",
            TaskId::Ttc => "ttc",
            TaskId::Severity => "severity",
            TaskId::Fault => "fault",
            TaskId::Age => "age",
            TaskId::Direction => "direction",
            TaskId::ObjectDirection => "object-direction",
        }
    }

    pub fn spec(self) -> TaskSpec {
        TaskSpec::new(self)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for TaskId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(n) = s.parse::<u8>() {
            return Self::from_number(n).ok_or_else(|| Error::Invalid(format!("no task {n}")));
        }
        Self::ALL
            .into_iter()
            .find(|t| t.slug() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown task {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Classification,
    Regression,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EligiblePool {
    /// Collision, near-miss and safe videos.
    All,
    /// Collision and near-miss videos only.
    Collision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MacroF1,
    Mse,
}

/// Upper edges of the Low / Moderate / High risk bins; the last bin is closed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskBins(pub [f64; 3]);

impl Default for RiskBins {
    fn default() -> Self {
        Self([0.25, 0.5, 0.75])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskId,
    pub name: String,
    pub target_kind: TargetKind,
    pub classes: Option<Vec<String>>,
    pub eligible_pool: EligiblePool,
    pub metrics: Vec<Metric>,
    /// Look-ahead for collision anticipation, seconds.
    pub horizon: f64,
    pub risk_bins: RiskBins,
}

fn names<C: Categorical>() -> Option<Vec<String>> {
    Some(C::NAMES.iter().map(|s| s.to_string()).collect())
}

impl TaskSpec {
    pub fn new(task: TaskId) -> Self {
        use Metric::*;
        let (name, kind, classes, pool, metrics) = match task {
            TaskId::Risk => ("cyclist behaviour risk index", TargetKind::Classification, names::<RiskClass>(), EligiblePool::All, vec![Accuracy, MacroF1]),
            TaskId::RightOfWay => ("right-of-way", TargetKind::Classification, names::<YesNo>(), EligiblePool::Collision, vec![Accuracy, MacroF1]),
            TaskId::Anticipation => (
                "collision anticipation",
                TargetKind::Classification,
                Some(vec!["no_collision".into(), "collision".into()]),
                EligiblePool::Collision,
                vec![Accuracy],
            ),
            TaskId::Ttc => ("time-to-collision", TargetKind::Regression, None, EligiblePool::Collision, vec![Mse]),
            TaskId::Severity => ("severity", TargetKind::Classification, names::<Severity>(), EligiblePool::Collision, vec![Accuracy, MacroF1]),
            TaskId::Fault => ("fault", TargetKind::Classification, names::<YesNo>(), EligiblePool::Collision, vec![Accuracy, MacroF1]),
            TaskId::Age => ("cyclist age", TargetKind::Classification, names::<Age>(), EligiblePool::All, vec![Accuracy, MacroF1]),
            TaskId::Direction => ("cyclist direction", TargetKind::Classification, names::<Direction>(), EligiblePool::All, vec![Accuracy, MacroF1]),
            TaskId::ObjectDirection => (
                "object direction",
                TargetKind::Classification,
                names::<Direction>(),
                EligiblePool::Collision,
                vec![Accuracy, MacroF1],
            ),
        };
        Self {
            task,
            name: name.to_string(),
            target_kind: kind,
            classes,
            eligible_pool: pool,
            metrics,
            horizon: 1.0,
            risk_bins: RiskBins::default(),
        }
    }

    /// Model output width: class count, or 1 for regression.
    pub fn output_size(&self) -> usize {
        self.classes.as_ref().map_or(1, Vec::len)
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.classes.as_ref().map(Vec::len)
    }

    /// Whether horizontal flipping would contradict the labels.
    pub fn direction_labelled(&self) -> bool {
        matches!(self.task, TaskId::Direction | TaskId::ObjectDirection)
    }
}

/// Map a risk score in `[0, 1]` onto four uniform, right-open bins (the top bin includes 1).
pub fn quantize_risk(risk: f64) -> Result<RiskClass> {
    quantize_risk_with(risk, RiskBins::default())
}

pub fn quantize_risk_with(risk: f64, bins: RiskBins) -> Result<RiskClass> {
    if !(0.0..=1.0).contains(&risk) {
        return Err(Error::Invalid(format!("risk {risk} outside [0, 1]")));
    }
    let idx = bins.0.iter().take_while(|&&edge| risk >= edge).count();
    Ok(RiskClass::from_index(idx).expect("four risk classes"))
}

/// Per-window target: a class index or seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Class(usize),
    Seconds(f64),
}

impl Label {
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(c),
            Label::Seconds(_) => None,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Label::Class(c) => c as f64,
            Label::Seconds(s) => s,
        }
    }
}

/// Label for one window, or the reason it is skipped.
pub fn derive_segment_label(
    spec: &TaskSpec,
    annotation: &AnnotationRecord,
    window: &SegmentWindow,
) -> std::result::Result<Label, SkipReason> {
    let f = &annotation.fields;
    let window_end = window.end_time();
    let cls = |v: Option<usize>, field: &'static str| v.map(Label::Class).ok_or(SkipReason::Unknown(field));
    match spec.task {
        TaskId::Risk => quantize_risk_with(f.risk, spec.risk_bins)
            .map(|r| Label::Class(r.index()))
            .map_err(|_| SkipReason::Unknown("risk")),
        TaskId::RightOfWay => cls(f.right_of_way.map(Categorical::index), "right_of_way"),
        TaskId::Fault => cls(f.fault.map(Categorical::index), "fault"),
        TaskId::Age => cls(f.age.map(Categorical::index), "age"),
        TaskId::Severity => Ok(Label::Class(f.severity.index())),
        TaskId::Direction => Ok(Label::Class(f.cyclist_direction.index())),
        TaskId::ObjectDirection => Ok(Label::Class(f.object_direction.index())),
        TaskId::Anticipation => match f.time_to_collision {
            None => Ok(Label::Class(0)),
            Some(tc) if window_end >= tc - EPS => Err(SkipReason::CollisionVisible),
            Some(tc) if tc <= window_end + spec.horizon + EPS => Ok(Label::Class(1)),
            Some(_) => Ok(Label::Class(0)),
        },
        TaskId::Ttc => match f.time_to_collision {
            None => Err(SkipReason::NoCollision),
            Some(tc) => {
                let remaining = tc - window_end;
                if remaining <= EPS {
                    Err(SkipReason::CollisionVisible)
                } else {
                    Ok(Label::Seconds(remaining))
                }
            }
        },
    }
}

/// Tolerance for comparing times that come from frame arithmetic.
const EPS: f64 = 1e-9;

/// Seconds per canonical frame.
pub const FRAME_PERIOD: f64 = 1.0 / CANONICAL_FPS;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::fixtures::fields;
    use crate::ingest::AnnotationRecord;

    fn window(start_s: f64) -> SegmentWindow {
        SegmentWindow::new("v", (start_s * CANONICAL_FPS).round() as usize)
    }

    fn ann(tc: Option<f64>) -> AnnotationRecord {
        let mut f = fields();
        f.time_to_collision = tc;
        AnnotationRecord::new("v", f)
    }

    #[test]
    fn risk_boundaries() {
        assert_eq!(quantize_risk(0.0).unwrap(), RiskClass::Low);
        assert_eq!(quantize_risk(0.5).unwrap(), RiskClass::High);
        assert_eq!(quantize_risk(1.0).unwrap(), RiskClass::VeryHigh);
        assert!(quantize_risk(1.01).is_err());
        assert!(quantize_risk(-0.1).is_err());
    }

    /// Sweep just below / at each boundary.
    #[test]
    fn risk_boundary_sweep() {
        let expect = |r: f64| {
            if r < 0.25 {
                0
            } else if r < 0.5 {
                1
            } else if r < 0.75 {
                2
            } else {
                3
            }
        };
        for i in 0..=10_000 {
            let r = i as f64 / 10_000.0;
            assert_eq!(quantize_risk(r).unwrap().index(), expect(r), "{r}");
        }
        for edge in [0.25f64, 0.5, 0.75] {
            let below = f64::from_bits(edge.to_bits() - 1);
            assert_eq!(quantize_risk(below).unwrap().index() + 1, quantize_risk(edge).unwrap().index());
        }
    }

    #[test]
    fn ttc_and_anticipation_fixture() {
        let w = window(2.0);
        assert_eq!(w.end_time(), 3.0);
        let a = ann(Some(4.2));
        match derive_segment_label(&TaskId::Ttc.spec(), &a, &w).unwrap() {
            Label::Seconds(s) => assert!((s - 1.2).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert_eq!(derive_segment_label(&TaskId::Anticipation.spec(), &a, &w), Ok(Label::Class(0)));
        let b = ann(Some(3.8));
        assert_eq!(derive_segment_label(&TaskId::Anticipation.spec(), &b, &w), Ok(Label::Class(1)));
    }

    #[test]
    fn collision_already_visible_is_skipped() {
        let a = ann(Some(2.5));
        let w = window(2.0);
        assert_eq!(derive_segment_label(&TaskId::Anticipation.spec(), &a, &w), Err(SkipReason::CollisionVisible));
        assert_eq!(derive_segment_label(&TaskId::Ttc.spec(), &a, &w), Err(SkipReason::CollisionVisible));
        assert_eq!(derive_segment_label(&TaskId::Ttc.spec(), &ann(None), &w), Err(SkipReason::NoCollision));
        assert_eq!(derive_segment_label(&TaskId::Anticipation.spec(), &ann(None), &w), Ok(Label::Class(0)));
    }

    #[test]
    fn unknown_fields_skip() {
        let mut a = ann(None);
        a.fields.fault = None;
        a.fields.age = None;
        a.fields.right_of_way = None;
        let w = window(0.0);
        assert_eq!(derive_segment_label(&TaskId::Fault.spec(), &a, &w), Err(SkipReason::Unknown("fault")));
        assert_eq!(derive_segment_label(&TaskId::Age.spec(), &a, &w), Err(SkipReason::Unknown("age")));
        assert_eq!(derive_segment_label(&TaskId::RightOfWay.spec(), &a, &w), Err(SkipReason::Unknown("right_of_way")));
    }

    #[test]
    fn task_table() {
        use EligiblePool::*;
        let pools: Vec<_> = TaskId::ALL.iter().map(|t| t.spec().eligible_pool).collect();
        assert_eq!(pools, vec![All, Collision, Collision, Collision, Collision, Collision, All, All, Collision]);
        let regress: Vec<_> = TaskId::ALL.iter().filter(|t| t.spec().target_kind == TargetKind::Regression).collect();
        assert_eq!(regress, vec![&TaskId::Ttc]);
        assert_eq!(TaskId::Severity.spec().output_size(), 5);
        assert_eq!(TaskId::Age.spec().classes.unwrap(), vec!["young", "adult", "old"]);
        assert_eq!("object-direction".parse::<TaskId>().unwrap(), TaskId::ObjectDirection);
        assert_eq!("4".parse::<TaskId>().unwrap(), TaskId::Ttc);
    }
}
