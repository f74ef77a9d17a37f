use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Age, AnnotationRecord, Categorical, Direction, LabelVocabulary, RiskClass, Severity, YesNo};
use crate::tasks::quantize_risk;

use super::plot::{render_bars, render_heatmap};

const UNKNOWN: &str = "unknown";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub name: String,
    pub bins: Vec<String>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn categorical(name: &str, bins: Vec<String>, values: impl Iterator<Item = String>) -> Self {
        let mut h = Self { name: name.into(), counts: vec![0; bins.len()], bins };
        for v in values {
            match h.bins.iter().position(|b| *b == v) {
                Some(i) => h.counts[i] += 1,
                None => {
                    h.bins.push(v);
                    h.counts.push(1);
                }
            }
        }
        h
    }

    /// One-second bins `[k, k+1)` from 0 to the largest value.
    fn seconds(name: &str, values: &[f64]) -> Self {
        let top = values.iter().fold(0.0f64, |m, &v| m.max(v)).floor() as usize;
        let mut counts = vec![0; top + 1];
        for &v in values {
            counts[(v.max(0.0).floor() as usize).min(top)] += 1;
        }
        Self { name: name.into(), bins: (0..=top).map(|k| format!("{k}-{}s", k + 1)).collect(), counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Count matrix `counts[row][col]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub name: String,
    pub rows: String,
    pub cols: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl Heatmap {
    fn build<'a>(
        name: &str,
        (rows, row_labels): (&str, Vec<String>),
        (cols, col_labels): (&str, Vec<String>),
        pairs: impl Iterator<Item = (String, String)>,
    ) -> Self {
        let mut counts = vec![vec![0; col_labels.len()]; row_labels.len()];
        for (r, c) in pairs {
            if let (Some(i), Some(j)) = (row_labels.iter().position(|x| *x == r), col_labels.iter().position(|x| *x == c)) {
                counts[i][j] += 1;
            }
        }
        Self { name: name.into(), rows: rows.into(), cols: cols.into(), row_labels, col_labels, counts }
    }

    pub fn get(&self, row: &str, col: &str) -> Option<usize> {
        let i = self.row_labels.iter().position(|x| x == row)?;
        let j = self.col_labels.iter().position(|x| x == col)?;
        Some(self.counts[i][j])
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_videos: usize,
    pub n_collisions: usize,
    pub histograms: Vec<Histogram>,
    pub heatmaps: Vec<Heatmap>,
    /// Rates and rate ratios, e.g. `fault_rate.young` and
    /// `fault_ratio.young_vs_adult`.
    pub ratios: BTreeMap<String, f64>,
}

impl StatsReport {
    pub fn histogram(&self, name: &str) -> Option<&Histogram> {
        self.histograms.iter().find(|h| h.name == name)
    }

    pub fn heatmap(&self, name: &str) -> Option<&Heatmap> {
        self.heatmaps.iter().find(|h| h.name == name)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// One PNG per histogram and heatmap under `dir`.
    pub fn render(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out = Vec::new();
        for h in &self.histograms {
            let p = dir.join(format!("hist_{}.png", h.name));
            render_bars(&h.counts, &p)?;
            out.push(p);
        }
        for h in &self.heatmaps {
            let p = dir.join(format!("heatmap_{}.png", h.name));
            render_heatmap(&h.counts, &p)?;
            out.push(p);
        }
        Ok(out)
    }
}

fn names<C: Categorical>(with_unknown: bool) -> Vec<String> {
    let mut v: Vec<String> = C::NAMES.iter().map(|s| s.to_string()).collect();
    if with_unknown {
        v.push(UNKNOWN.into());
    }
    v
}

fn opt<C: Categorical>(v: Option<C>) -> String {
    v.map_or_else(|| UNKNOWN.to_string(), |c| c.name().to_string())
}

fn risk_name(r: f64) -> String {
    quantize_risk(r).map_or_else(|_| UNKNOWN.to_string(), |c| c.name().to_string())
}

/// Dataset statistics over aggregated annotations. `durations` (seconds,
/// by video id) feeds the duration histogram; videos without one land in
/// an `unknown` bin so every histogram still sums to its population.
pub fn dataset_stats(annotations: &[AnnotationRecord], durations: &BTreeMap<String, f64>) -> StatsReport {
    let all = || annotations.iter().map(|a| &a.fields);
    let collisions: Vec<&AnnotationRecord> = annotations.iter().filter(|a| a.has_collision).collect();
    let ttc: Vec<f64> = collisions.iter().filter_map(|a| a.fields.time_to_collision).collect();

    let mut duration = Histogram::seconds(
        "duration",
        &annotations.iter().filter_map(|a| durations.get(&a.video_id).copied()).collect::<Vec<_>>(),
    );
    let missing = annotations.iter().filter(|a| !durations.contains_key(&a.video_id)).count();
    if missing > 0 {
        duration.bins.push(UNKNOWN.into());
        duration.counts.push(missing);
    }

    let histograms = vec![
        Histogram::seconds("time_to_collision", &ttc),
        duration,
        Histogram::categorical(
            "object_type",
            LabelVocabulary::default().object_types.into_iter().chain([UNKNOWN.to_string()]).collect(),
            collisions.iter().map(|a| a.fields.object_type.clone().unwrap_or_else(|| UNKNOWN.into())),
        ),
        Histogram::categorical("risk", names::<RiskClass>(false), all().map(|f| risk_name(f.risk))),
        Histogram::categorical("age", names::<Age>(true), all().map(|f| opt(f.age))),
        Histogram::categorical("fault", names::<YesNo>(true), collisions.iter().map(|a| opt(a.fields.fault))),
        Histogram::categorical("ego_involved", names::<YesNo>(false), all().map(|f| f.ego_involved.name().to_string())),
        Histogram::categorical("cyclist_direction", names::<Direction>(false), all().map(|f| f.cyclist_direction.name().to_string())),
        Histogram::categorical(
            "object_direction",
            names::<Direction>(false),
            collisions.iter().map(|a| a.fields.object_direction.name().to_string()),
        ),
    ];

    let col = || collisions.iter().map(|a| &a.fields);
    let heatmaps = vec![
        Heatmap::build(
            "cyclist_direction_x_object_direction",
            ("cyclist_direction", names::<Direction>(false)),
            ("object_direction", names::<Direction>(false)),
            col().map(|f| (f.cyclist_direction.name().to_string(), f.object_direction.name().to_string())),
        ),
        Heatmap::build(
            "fault_x_age",
            ("fault", names::<YesNo>(true)),
            ("age", names::<Age>(true)),
            col().map(|f| (opt(f.fault), opt(f.age))),
        ),
        Heatmap::build(
            "risk_x_fault",
            ("risk", names::<RiskClass>(false)),
            ("fault", names::<YesNo>(true)),
            col().map(|f| (risk_name(f.risk), opt(f.fault))),
        ),
        Heatmap::build(
            "risk_x_severity",
            ("risk", names::<RiskClass>(false)),
            ("severity", names::<Severity>(false)),
            col().map(|f| (risk_name(f.risk), f.severity.name().to_string())),
        ),
    ];

    let mut ratios = BTreeMap::new();
    let fault_age = &heatmaps[1];
    let mut rate = BTreeMap::new();
    for age in Age::NAMES {
        let yes = fault_age.get("yes", age).unwrap_or(0);
        let no = fault_age.get("no", age).unwrap_or(0);
        if yes + no > 0 {
            let r = yes as f64 / (yes + no) as f64;
            rate.insert(*age, r);
            ratios.insert(format!("fault_rate.{age}"), r);
        }
    }
    if let Some(&adult) = rate.get("adult").filter(|&&r| r > 0.0) {
        for age in ["young", "old"] {
            if let Some(r) = rate.get(age) {
                ratios.insert(format!("fault_ratio.{age}_vs_adult"), r / adult);
            }
        }
    }

    StatsReport { n_videos: annotations.len(), n_collisions: collisions.len(), histograms, heatmaps, ratios }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AnnotationFields, BBox};

    fn record(id: usize, ttc: Option<f64>, fault: Option<YesNo>, age: Option<Age>) -> AnnotationRecord {
        AnnotationRecord::new(
            format!("v{id}"),
            AnnotationFields {
                right_of_way: Some(YesNo::Yes),
                time_to_collision: ttc,
                object_type: ttc.map(|_| "car".to_string()),
                fault,
                severity: if ttc.is_some() { Severity::Minor } else { Severity::Safe },
                risk: (id % 4) as f64 * 0.25,
                age,
                cyclist_type: None,
                bbox: BBox::new(10.0, 10.0, 50.0, 80.0),
                cyclist_direction: Direction::Left,
                object_direction: Direction::Forward,
                camera_position: "front_dashcam".into(),
                ego_involved: YesNo::No,
            },
        )
    }

    #[test]
    fn histograms_conserve_counts() {
        let recs: Vec<_> = (0..30)
            .map(|i| record(i, (i % 3 != 0).then_some(0.5 + i as f64 * 0.3), Some(YesNo::No), [None, Some(Age::Adult)][i % 2]))
            .collect();
        let durations: BTreeMap<String, f64> = (0..25).map(|i| (format!("v{i}"), 2.0 + i as f64 * 0.5)).collect();
        let s = dataset_stats(&recs, &durations);
        assert_eq!(s.n_collisions, 20);
        for name in ["duration", "risk", "age", "ego_involved", "cyclist_direction"] {
            assert_eq!(s.histogram(name).unwrap().total(), 30, "{name}");
        }
        for name in ["time_to_collision", "object_type", "fault", "object_direction"] {
            assert_eq!(s.histogram(name).unwrap().total(), 20, "{name}");
        }
        assert_eq!(s.histogram("duration").unwrap().counts.last(), Some(&5));
        assert!(s.heatmaps.iter().all(|h| h.total() == 20));
        assert_eq!(s.heatmap("cyclist_direction_x_object_direction").unwrap().get("left", "forward"), Some(20));
    }

    #[test]
    fn fault_concentrates_on_young() {
        let ages = [Age::Young, Age::Adult, Age::Old];
        let recs: Vec<_> = (0..30)
            .map(|i| {
                let age = ages[i % 3];
                record(i, Some(1.0), Some(if age == Age::Young { YesNo::Yes } else { YesNo::No }), Some(age))
            })
            .collect();
        let s = dataset_stats(&recs, &BTreeMap::new());
        let h = s.heatmap("fault_x_age").unwrap();
        assert_eq!(h.get("yes", "young"), Some(10));
        assert_eq!(h.get("yes", "adult"), Some(0));
        assert_eq!(h.get("no", "young"), Some(0));
        assert_eq!(h.get("no", "old"), Some(10));
        assert_eq!(s.ratios["fault_rate.young"], 1.0);
        // Adults are never at fault, so no ratio against them exists.
        assert!(!s.ratios.contains_key("fault_ratio.young_vs_adult"));
    }

    #[test]
    fn fault_ratio_against_adults() {
        // Young: 3 of 4 at fault; adult: 1 of 4 → ratio 3.
        let mut recs = Vec::new();
        for (k, (age, yes)) in [(Age::Young, 3), (Age::Adult, 1)].into_iter().enumerate() {
            for j in 0..4 {
                let f = if j < yes { YesNo::Yes } else { YesNo::No };
                recs.push(record(k * 10 + j, Some(2.0), Some(f), Some(age)));
            }
        }
        let s = dataset_stats(&recs, &BTreeMap::new());
        assert!((s.ratios["fault_ratio.young_vs_adult"] - 3.0).abs() < 1e-12);
    }
}
