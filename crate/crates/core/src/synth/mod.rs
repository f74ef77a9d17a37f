//! Synthetic corpora with analytic ground truth.
//!
//! A scene holds two discs on a static textured background: the cyclist and
//! the other party. Positions and radii are linear in time and measured in
//! frame-height units, so `x ∈ [0, width/height]` and `y ∈ [0, 1]`. Lateral
//! motion moves a disc sideways; medial motion grows it (approaching the
//! camera) or shrinks it (moving away).

mod bench;
mod render;
mod suite;

pub use bench::{prepare_task, SyntheticTask};
pub use render::{render_frame, render_scenario, Background};
pub use suite::{generate_suite, scenario_for_index, video_id, SuiteFiles, SuiteMix, SuiteOptions, SuiteSummary};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    Age, AnnotationFields, AnnotationRecord, BBox, Categorical, CyclistType, Direction, LabelVocabulary, Platform,
    Pool, RawLabelRecord, Severity, VideoManifestEntry, YesNo, FRAME_HEIGHT, FRAME_WIDTH,
};
use crate::video::{write_raw_video, RawVideo};

/// How strongly a radius change counts as medial motion when comparing it
/// with lateral speed.
pub const MEDIAL_GAIN: f64 = 6.0;
/// Vertical drift per unit of radius rate for medial motion.
pub const MEDIAL_DRIFT: f64 = 6.0;
/// Speeds below this (height units per second) count as no motion.
pub const STILL_SPEED: f64 = 0.02;
/// Smallest radius a disc may shrink to during a clip.
pub const MIN_RADIUS: f64 = 0.04;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    MovingObjectDirection,
    TwoBodyCollision,
    Stationary,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] =
        [ScenarioKind::MovingObjectDirection, ScenarioKind::TwoBodyCollision, ScenarioKind::Stationary];

    pub fn slug(self) -> &'static str {
        match self {
            Self::MovingObjectDirection => "moving_object_direction",
            Self::TwoBodyCollision => "two_body_collision",
            Self::Stationary => "stationary",
        }
    }
}

/// Raster size and frame rate of the rendered source video.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { width: 854, height: 480, fps: 24.0 }
    }
}

impl RenderConfig {
    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }
}

/// A disc with linear motion: `center(t) = center + velocity·t`,
/// `radius(t) = radius + radius_rate·t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub center: [f64; 2],
    pub velocity: [f64; 2],
    pub radius: f64,
    pub radius_rate: f64,
    pub color: [u8; 3],
}

impl Body {
    pub fn center_at(&self, t: f64) -> [f64; 2] {
        [self.center[0] + self.velocity[0] * t, self.center[1] + self.velocity[1] * t]
    }

    pub fn radius_at(&self, t: f64) -> f64 {
        self.radius + self.radius_rate * t
    }

    /// Direction class from the dominant velocity component.
    pub fn direction(&self) -> Direction {
        let lateral = self.velocity[0];
        let medial = self.radius_rate * MEDIAL_GAIN;
        if lateral.abs().max(medial.abs()) < STILL_SPEED {
            Direction::Stationary
        } else if lateral.abs() >= medial.abs() {
            if lateral > 0.0 {
                Direction::Right
            } else {
                Direction::Left
            }
        } else if medial > 0.0 {
            Direction::Backward
        } else {
            Direction::Forward
        }
    }
}

/// Labels that the renderer does not depict; drawn from the scenario seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneAttributes {
    pub right_of_way: Option<YesNo>,
    pub fault: Option<YesNo>,
    pub age: Option<Age>,
    pub cyclist_type: Option<CyclistType>,
    pub object_type: Option<String>,
    pub ego_involved: YesNo,
    pub risk: f64,
    pub severity: Severity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub duration: f64,
    pub render: RenderConfig,
    pub cyclist: Body,
    pub object: Body,
    /// Seconds from clip start to first contact of the two discs.
    pub collision_time: Option<f64>,
    /// Close pass without contact; belongs to the collision pool.
    pub near_miss: bool,
    pub texture_seed: u64,
    pub attributes: SceneAttributes,
}

const CYCLIST_COLOR: [u8; 3] = [245, 235, 60];
const OBJECT_COLOR: [u8; 3] = [215, 30, 40];

/// First time `t ≥ 0` at which two discs touch, if any before `horizon`.
///
/// Solves `|D₀ + W t|² = (R₀ + Ṙ t)²` for the centre offset `D` and radius
/// sum `R`.
pub fn first_contact(a: &Body, b: &Body, horizon: f64) -> Option<f64> {
    let d0 = [b.center[0] - a.center[0], b.center[1] - a.center[1]];
    let w = [b.velocity[0] - a.velocity[0], b.velocity[1] - a.velocity[1]];
    let (r0, rd) = (a.radius + b.radius, a.radius_rate + b.radius_rate);
    let gap = |t: f64| {
        let d = [d0[0] + w[0] * t, d0[1] + w[1] * t];
        (d[0] * d[0] + d[1] * d[1]).sqrt() - (r0 + rd * t)
    };
    if gap(0.0) <= 0.0 {
        return Some(0.0);
    }
    let qa = w[0] * w[0] + w[1] * w[1] - rd * rd;
    let qb = 2.0 * (d0[0] * w[0] + d0[1] * w[1] - r0 * rd);
    let qc = d0[0] * d0[0] + d0[1] * d0[1] - r0 * r0;
    let mut roots = Vec::new();
    if qa.abs() < 1e-15 {
        if qb.abs() > 1e-15 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let s = disc.sqrt();
            roots.push((-qb - s) / (2.0 * qa));
            roots.push((-qb + s) / (2.0 * qa));
        }
    }
    roots.sort_by(f64::total_cmp);
    // A root of the squared equation is a contact only where the summed
    // radius is non-negative.
    roots.into_iter().find(|&t| t >= 0.0 && t <= horizon && r0 + rd * t >= 0.0)
}

fn signed(rng: &mut impl Rng, lo: f64, hi: f64, positive: bool) -> f64 {
    let v = rng.gen_range(lo..hi);
    if positive {
        v
    } else {
        -v
    }
}

/// Velocity and radius rate for a disc moving in `dir`. The secondary
/// component stays under a third of the dominant one.
fn sample_motion(rng: &mut impl Rng, dir: Direction, radius: f64, duration: f64) -> ([f64; 2], f64) {
    // Shrinking discs must keep MIN_RADIUS until the clip ends.
    let max_shrink = ((radius - MIN_RADIUS) / duration).max(0.0);
    match dir {
        Direction::Stationary => ([0.0, 0.0], 0.0),
        Direction::Left | Direction::Right => {
            let vx = signed(rng, 0.15, 0.3, dir == Direction::Right);
            let medial = rng.gen_range(-0.25..0.25) * vx.abs();
            let rate = (medial / MEDIAL_GAIN).max(-max_shrink);
            ([vx, rng.gen_range(-0.03..0.03)], rate)
        }
        Direction::Forward | Direction::Backward => {
            let rate = if dir == Direction::Backward {
                rng.gen_range(0.025..0.05)
            } else {
                -rng.gen_range(0.6..1.0) * max_shrink.min(0.05)
            };
            let vx = rng.gen_range(-0.25..0.25) * rate.abs() * MEDIAL_GAIN;
            // Approaching discs drift down the frame, receding ones up.
            ([vx, rate * MEDIAL_DRIFT], rate)
        }
    }
}

fn pick<T: Copy>(rng: &mut impl Rng, items: &[T]) -> T {
    items[rng.gen_range(0..items.len())]
}

fn maybe<T>(rng: &mut impl Rng, p_unknown: f64, v: T) -> Option<T> {
    if rng.gen_bool(p_unknown) {
        None
    } else {
        Some(v)
    }
}

/// Options for drawing one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRequest {
    pub kind: ScenarioKind,
    pub render: RenderConfig,
    pub duration: Option<f64>,
    pub collision_time: Option<f64>,
    pub cyclist_direction: Option<Direction>,
    pub object_direction: Option<Direction>,
    pub near_miss: bool,
}

impl ScenarioRequest {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            render: RenderConfig::default(),
            duration: None,
            collision_time: None,
            cyclist_direction: None,
            object_direction: None,
            near_miss: false,
        }
    }
}

const MOVING: [Direction; 4] = [Direction::Forward, Direction::Backward, Direction::Left, Direction::Right];

fn sample_attributes(rng: &mut impl Rng, kind: ScenarioKind, near_miss: bool, closing_speed: f64) -> SceneAttributes {
    let vocab = LabelVocabulary::default();
    let age = pick(rng, &[Age::Young, Age::Adult, Age::Old]);
    let collision = kind == ScenarioKind::TwoBodyCollision;
    let (severity, risk) = if collision {
        let severity = match closing_speed {
            s if s < 0.2 => Severity::Minor,
            s if s < 0.3 => Severity::Moderate,
            s if s < 0.4 => Severity::High,
            _ => Severity::VeryHigh,
        };
        (severity, (0.5 + closing_speed).min(1.0))
    } else if near_miss {
        (Severity::Safe, rng.gen_range(0.3..0.6))
    } else {
        (Severity::Safe, rng.gen_range(0.0..0.3))
    };
    let object_type = vocab.object_types[rng.gen_range(0..vocab.object_types.len())].clone();
    let row = pick(rng, &[YesNo::Yes, YesNo::No]);
    let fault = pick(rng, &[YesNo::Yes, YesNo::No]);
    let cyclist_type = pick(rng, &[CyclistType::Competitive, CyclistType::Recreational]);
    SceneAttributes {
        right_of_way: maybe(rng, 0.15, row),
        fault: if collision || near_miss { maybe(rng, 0.15, fault) } else { Some(YesNo::No) },
        age: maybe(rng, 0.1, age),
        cyclist_type: maybe(rng, 0.2, cyclist_type),
        object_type: maybe(rng, 0.05, object_type),
        ego_involved: pick(rng, &[YesNo::Yes, YesNo::No]),
        risk,
        severity,
    }
}

fn sample_body(rng: &mut impl Rng, dir: Direction, duration: f64, color: [u8; 3]) -> Body {
    let radius = match dir {
        Direction::Forward => rng.gen_range(0.24..0.3),
        Direction::Backward => rng.gen_range(0.09..0.12),
        _ => rng.gen_range(0.13..0.17),
    };
    let (velocity, radius_rate) = sample_motion(rng, dir, radius, duration);
    Body { center: [0.0, 0.0], velocity, radius, radius_rate, color }
}

/// Draw a scenario. Every field follows from `seed` and the request.
pub fn sample_scenario(req: &ScenarioRequest, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aspect = req.render.aspect();
    if req.render.width < 8 || req.render.height < 8 || !(req.render.fps > 0.0) {
        return Err(Error::Invalid(format!("render size {}x{} @ {} fps", req.render.width, req.render.height, req.render.fps)));
    }
    let duration = req.duration.unwrap_or_else(|| rng.gen_range(3.0..5.0));
    // Whole frames only, so the clip and its manifest entry agree.
    let duration = (duration * req.render.fps).round() / req.render.fps;
    if !(crate::ingest::MIN_DURATION..=crate::ingest::MAX_DURATION).contains(&duration) {
        return Err(Error::Invalid(format!("duration {duration} outside the manifest range")));
    }
    let texture_seed = rng.gen();
    let cyc_dir = match req.kind {
        ScenarioKind::Stationary => Direction::Stationary,
        _ => req.cyclist_direction.unwrap_or_else(|| {
            if req.kind == ScenarioKind::TwoBodyCollision && rng.gen_bool(0.15) {
                Direction::Stationary
            } else {
                pick(&mut rng, &MOVING)
            }
        }),
    };
    let obj_dir = req.object_direction.unwrap_or_else(|| match req.kind {
        ScenarioKind::Stationary => Direction::Stationary,
        // Two still discs cannot meet.
        ScenarioKind::TwoBodyCollision if cyc_dir == Direction::Stationary => pick(&mut rng, &MOVING),
        _ => pick(&mut rng, &[Direction::Forward, Direction::Backward, Direction::Left, Direction::Right, Direction::Stationary]),
    });

    // Place a disc so that it sits at `mid` at time `t_ref`.
    let place = |b: &mut Body, mid: [f64; 2], t_ref: f64| {
        b.center = [mid[0] - b.velocity[0] * t_ref, mid[1] - b.velocity[1] * t_ref];
    };
    let (cyclist, object, collision_time, closing) = match req.kind {
        ScenarioKind::TwoBodyCollision => {
            let mut tries = 0;
            loop {
                tries += 1;
                if tries > 1000 {
                    return Err(Error::Invalid(format!(
                        "no collision geometry for cyclist {cyc_dir} and object {obj_dir} within {duration} s"
                    )));
                }
                // Contact from 1.5 s on; short clips start earlier.
                let earliest = if duration - 0.2 > 1.5 { 1.5 } else { 0.4 * duration };
                let tc = req.collision_time.unwrap_or_else(|| rng.gen_range(earliest..duration - 0.2));
                if !(tc > 0.0 && tc < duration) {
                    return Err(Error::Invalid(format!("collision time {tc} outside (0, {duration})")));
                }
                let mut a = sample_body(&mut rng, cyc_dir, duration, CYCLIST_COLOR);
                let mut b = sample_body(&mut rng, obj_dir, duration, OBJECT_COLOR);
                let w = [a.velocity[0] - b.velocity[0], a.velocity[1] - b.velocity[1]];
                let k = (w[0] * w[0] + w[1] * w[1]).sqrt();
                if k < 0.1 || k + a.radius_rate + b.radius_rate <= 0.0 {
                    continue;
                }
                // Object ahead of the cyclist along the relative velocity,
                // touching at tc: D(t) = (R(tc) + k (tc - t)) u.
                let u = [w[0] / k, w[1] / k];
                let r = a.radius_at(tc) + b.radius_at(tc);
                let mid = [aspect / 2.0 + rng.gen_range(-0.25..0.25), 0.5 + rng.gen_range(-0.1..0.1)];
                let pa = [mid[0] - u[0] * r / 2.0, mid[1] - u[1] * r / 2.0];
                let pb = [pa[0] + u[0] * r, pa[1] + u[1] * r];
                place(&mut a, pa, tc);
                place(&mut b, pb, tc);
                break (a, b, Some(tc), k);
            }
        }
        _ => {
            let mut a = sample_body(&mut rng, cyc_dir, duration, CYCLIST_COLOR);
            let mut b = sample_body(&mut rng, obj_dir, duration, OBJECT_COLOR);
            let half = duration / 2.0;
            let mid_a = [aspect / 2.0 + rng.gen_range(-0.2..0.2), 0.5 + rng.gen_range(-0.1..0.1)];
            place(&mut a, mid_a, half);
            // Put the object on the far side; a near miss passes it within a
            // few radii of the cyclist.
            let gap = if req.near_miss { 0.05 } else { 0.35 };
            let mut tries = 0;
            loop {
                tries += 1;
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let off = a.radius_at(half) + b.radius_at(half) + gap + rng.gen_range(0.0..0.1) + 0.02 * tries as f64;
                let mid_b = [mid_a[0] + side * off * 0.6, (mid_a[1] + side * off * 0.8).clamp(0.1, 0.9)];
                place(&mut b, mid_b, half);
                if first_contact(&a, &b, duration).is_none() {
                    break;
                }
            }
            (a, b, None, 0.0)
        }
    };
    let attributes = sample_attributes(&mut rng, req.kind, req.near_miss, closing);
    Ok(Scenario {
        kind: req.kind,
        duration,
        render: req.render,
        cyclist,
        object,
        collision_time,
        near_miss: req.near_miss && req.kind != ScenarioKind::TwoBodyCollision,
        texture_seed,
        attributes,
    })
}

impl Scenario {
    /// Videos in the collision pool: collisions and near misses.
    pub fn pool(&self) -> Pool {
        if self.collision_time.is_some() || self.near_miss {
            Pool::Collision
        } else {
            Pool::Safe
        }
    }

    /// Cyclist box on the first frame in canonical 1280×720 pixels.
    pub fn first_frame_bbox(&self) -> BBox {
        let scale_x = FRAME_WIDTH / self.render.aspect();
        let scale_y = FRAME_HEIGHT;
        let c = self.cyclist.center;
        let r = self.cyclist.radius;
        let x0 = ((c[0] - r) * scale_x).clamp(0.0, FRAME_WIDTH - 1.0);
        let y0 = ((c[1] - r) * scale_y).clamp(0.0, FRAME_HEIGHT - 1.0);
        let x1 = ((c[0] + r) * scale_x).clamp(x0 + 1.0, FRAME_WIDTH);
        let y1 = ((c[1] + r) * scale_y).clamp(y0 + 1.0, FRAME_HEIGHT);
        let round = |v: f64| (v * 10.0).round() / 10.0;
        let (x0, y0) = (round(x0), round(y0));
        BBox::new(x0, y0, round(x1 - x0).min(FRAME_WIDTH - x0), round(y1 - y0).min(FRAME_HEIGHT - y0))
    }

    pub fn annotation_fields(&self) -> AnnotationFields {
        let a = &self.attributes;
        AnnotationFields {
            right_of_way: a.right_of_way,
            time_to_collision: self.collision_time,
            object_type: a.object_type.clone(),
            fault: a.fault,
            severity: a.severity,
            risk: a.risk,
            age: a.age,
            cyclist_type: a.cyclist_type,
            bbox: self.first_frame_bbox(),
            cyclist_direction: self.cyclist.direction(),
            object_direction: self.object.direction(),
            camera_position: "front_dashcam".into(),
            ego_involved: a.ego_involved,
        }
    }

    pub fn annotation(&self, video_id: &str) -> AnnotationRecord {
        AnnotationRecord::new(video_id, self.annotation_fields())
    }

    /// Identical records from `n` labellers named `L1..Ln`.
    pub fn raw_labels(&self, video_id: &str, n: usize) -> Vec<RawLabelRecord> {
        (1..=n)
            .map(|i| RawLabelRecord {
                labeller_id: format!("L{i}"),
                video_id: video_id.to_string(),
                fields: self.annotation_fields(),
            })
            .collect()
    }

    pub fn manifest_entry(&self, video_id: &str, file_name: &str) -> VideoManifestEntry {
        VideoManifestEntry {
            video_id: video_id.to_string(),
            source_url: file_name.to_string(),
            start_time: 0.0,
            end_time: self.duration,
            source_platform: Platform::Local,
            pool: Some(self.pool()),
        }
    }

    /// Number of rendered source frames.
    pub fn n_frames(&self) -> usize {
        (self.duration * self.render.fps).round() as usize
    }

    /// Index of the first frame at rate `fps` showing the discs in contact.
    pub fn contact_frame(&self, fps: f64) -> Option<usize> {
        self.collision_time.map(|t| (t * fps - 1e-9).ceil() as usize)
    }
}

/// Ground truth and file outputs for one generated video.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedVideo {
    pub scenario: Scenario,
    pub annotation: AnnotationRecord,
    pub manifest: VideoManifestEntry,
}

/// Render `scenario` and write it to `raw_dir/<video_id>.rgbv`.
pub fn generate_scenario(
    scenario: &Scenario,
    video_id: &str,
    raw_dir: &std::path::Path,
) -> Result<GeneratedVideo> {
    std::fs::create_dir_all(raw_dir).map_err(|e| Error::io(raw_dir, e))?;
    let file = format!("{video_id}.{}", crate::video::RAW_EXTENSION);
    let frames = render_scenario(scenario);
    write_raw_video(&raw_dir.join(&file), &RawVideo { fps: scenario.render.fps, frames })?;
    Ok(GeneratedVideo {
        scenario: scenario.clone(),
        annotation: scenario.annotation(video_id),
        manifest: scenario.manifest_entry(video_id, &file),
    })
}

/// Direction classes a request can pin for each body; used by coverage tests.
pub fn reachable_directions(kind: ScenarioKind) -> Vec<Direction> {
    match kind {
        ScenarioKind::Stationary => vec![Direction::Stationary],
        _ => (0..Direction::count()).filter_map(Direction::from_index).collect(),
    }
}

#[cfg(test)]
mod tests;
