use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::VideoManifestEntry;

use super::{CanonicalFormat, FrameStack, RawVideo, CHANNELS};

/// Lowest source frame rate accepted.
pub const MIN_SOURCE_FPS: f64 = 20.0;
/// Floor on the standard deviation used for z-scoring.
pub const ZSCORE_EPS: f64 = 1e-6;

const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceStep {
    pub step: String,
    pub detail: String,
}

impl ProvenanceStep {
    fn new(step: &str, detail: String) -> Self {
        Self { step: step.into(), detail }
    }
}

/// A clip in canonical form: fixed geometry, fixed frame rate, z-scored.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalClip {
    pub video_id: String,
    pub frames: FrameStack,
    pub fps: f64,
    pub zscore_stats: [ChannelStats; 3],
    pub duration: f64,
    pub provenance: Vec<ProvenanceStep>,
}

/// Frames whose timestamps `i / fps` fall in `[start, end)`.
pub fn temporal_crop(frames: &FrameStack, src_fps: f64, start: f64, end: f64) -> Result<FrameStack> {
    let duration = frames.t as f64 / src_fps;
    if start < 0.0 || start >= end || end > duration + TIME_EPS {
        return Err(Error::Invalid(format!(
            "crop [{start}, {end}) outside source of {duration:.4} s or empty"
        )));
    }
    let first = (start * src_fps - TIME_EPS).ceil().max(0.0) as usize;
    let last = ((end * src_fps - TIME_EPS).ceil() as usize).min(frames.t);
    if first >= last {
        return Err(Error::Invalid(format!("crop [{start}, {end}) selects no frames")));
    }
    frames.slice(first, last - first)
}

/// `(x0, y0, w, h)` of the centred crop that brings `w × h` to the target
/// aspect ratio (to within one pixel).
pub fn aspect_crop_box(h: usize, w: usize, target_w: usize, target_h: usize) -> (usize, usize, usize, usize) {
    let (lhs, rhs) = (w * target_h, h * target_w);
    if lhs > rhs {
        let nw = ((h * target_w) as f64 / target_h as f64).round() as usize;
        let nw = nw.clamp(1, w);
        ((w - nw) / 2, 0, nw, h)
    } else if lhs < rhs {
        let nh = ((w * target_h) as f64 / target_w as f64).round() as usize;
        let nh = nh.clamp(1, h);
        (0, (h - nh) / 2, w, nh)
    } else {
        (0, 0, w, h)
    }
}

/// Bilinear resample of the `(x0, y0, cw, ch)` region of one HWC frame to
/// `out_w × out_h`, using pixel-centre alignment.
#[allow(clippy::too_many_arguments)]
pub fn resize_bilinear(
    frame: &[f32],
    h: usize,
    w: usize,
    region: (usize, usize, usize, usize),
    out_w: usize,
    out_h: usize,
) -> Vec<f32> {
    let (x0, y0, cw, ch) = region;
    debug_assert!(x0 + cw <= w && y0 + ch <= h);
    let _ = h;
    if cw == out_w && ch == out_h {
        let mut out = Vec::with_capacity(out_w * out_h * CHANNELS);
        for y in 0..ch {
            let row = ((y0 + y) * w + x0) * CHANNELS;
            out.extend_from_slice(&frame[row..row + cw * CHANNELS]);
        }
        return out;
    }
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, (src - i0 as f64) as f32)
            })
            .collect()
    };
    let xs = axis(out_w, cw);
    let ys = axis(out_h, ch);
    let mut out = vec![0.0f32; out_w * out_h * CHANNELS];
    for (oy, &(ya, yb, fy)) in ys.iter().enumerate() {
        let ra = ((y0 + ya) * w + x0) * CHANNELS;
        let rb = ((y0 + yb) * w + x0) * CHANNELS;
        for (ox, &(xa, xb, fx)) in xs.iter().enumerate() {
            let o = (oy * out_w + ox) * CHANNELS;
            for c in 0..CHANNELS {
                let p00 = frame[ra + xa * CHANNELS + c];
                let p01 = frame[ra + xb * CHANNELS + c];
                let p10 = frame[rb + xa * CHANNELS + c];
                let p11 = frame[rb + xb * CHANNELS + c];
                let top = p00 + (p01 - p00) * fx;
                let bot = p10 + (p11 - p10) * fx;
                out[o + c] = top + (bot - top) * fy;
            }
        }
    }
    out
}

/// Centre-crop to the target aspect ratio, then bilinear-rescale to the target size.
pub fn aspect_crop_and_scale(frame: &[f32], h: usize, w: usize, target_w: usize, target_h: usize) -> Vec<f32> {
    let region = aspect_crop_box(h, w, target_w, target_h);
    resize_bilinear(frame, h, w, region, target_w, target_h)
}

/// Source-frame position (in source frame units) of output frame `j`.
pub fn source_position(j: usize, src_fps: f64, dst_fps: f64) -> f64 {
    j as f64 * src_fps / dst_fps
}

/// Convert to `dst_fps`. Faster sources keep the nearest-in-time frame;
/// slower sources blend the two bracketing frames linearly.
pub fn resample_fps(frames: &FrameStack, src_fps: f64, dst_fps: f64) -> Result<FrameStack> {
    if src_fps < MIN_SOURCE_FPS {
        return Err(Error::Invalid(format!("{src_fps} fps is below quality floor of {MIN_SOURCE_FPS} fps")));
    }
    if (src_fps - dst_fps).abs() < 1e-9 {
        return Ok(frames.clone());
    }
    let duration = frames.t as f64 / src_fps;
    let n_out = (duration * dst_fps).round() as usize;
    let last = frames.t - 1;
    let n = frames.frame_len();
    let mut data = vec![0.0f32; n_out * n];
    data.par_chunks_mut(n.max(1)).enumerate().for_each(|(j, out)| {
        let p = source_position(j, src_fps, dst_fps);
        if src_fps > dst_fps {
            let i = (p.round() as usize).min(last);
            out.copy_from_slice(frames.frame(i));
        } else {
            let i0 = (p.floor() as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let f = (p - i0 as f64) as f32;
            let (a, b) = (frames.frame(i0), frames.frame(i1));
            if f == 0.0 {
                out.copy_from_slice(a);
            } else {
                for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                    *o = (1.0 - f) * x + f * y;
                }
            }
        }
    });
    FrameStack::new(n_out, frames.h, frames.w, data)
}

/// Per-channel z-score over the whole clip; returns the statistics used.
pub fn zscore_normalize(frames: &mut FrameStack) -> [ChannelStats; 3] {
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    for px in frames.data.chunks(CHANNELS) {
        for c in 0..CHANNELS {
            sum[c] += px[c] as f64;
        }
        count += 1;
    }
    let n = count.max(1) as f64;
    let mean = sum.map(|s| s / n);
    let mut sq = [0.0f64; 3];
    for px in frames.data.chunks(CHANNELS) {
        for c in 0..CHANNELS {
            sq[c] += (px[c] as f64 - mean[c]).powi(2);
        }
    }
    let stats: [ChannelStats; 3] = std::array::from_fn(|c| ChannelStats { mean: mean[c], std: (sq[c] / n).sqrt() });
    for px in frames.data.chunks_mut(CHANNELS) {
        for c in 0..CHANNELS {
            px[c] = ((px[c] as f64 - stats[c].mean) / stats[c].std.max(ZSCORE_EPS)) as f32;
        }
    }
    stats
}

/// Undo [`zscore_normalize`] with stored statistics.
pub fn denormalize(frames: &FrameStack, stats: &[ChannelStats; 3]) -> FrameStack {
    let mut out = frames.clone();
    for px in out.data.chunks_mut(CHANNELS) {
        for c in 0..CHANNELS {
            px[c] = (px[c] as f64 * stats[c].std.max(ZSCORE_EPS) + stats[c].mean) as f32;
        }
    }
    out
}

/// Mirror every frame left-to-right.
pub fn flip_horizontal(frames: &mut FrameStack) {
    let (h, w) = (frames.h, frames.w);
    for f in 0..frames.t {
        let frame = frames.frame_mut(f);
        for y in 0..h {
            for x in 0..w / 2 {
                let a = (y * w + x) * CHANNELS;
                let b = (y * w + (w - 1 - x)) * CHANNELS;
                for c in 0..CHANNELS {
                    frame.swap(a + c, b + c);
                }
            }
        }
    }
}

/// Run the full canonicalization chain on a decoded source clip.
pub fn canonicalize(raw: &RawVideo, entry: &VideoManifestEntry, format: &CanonicalFormat) -> Result<CanonicalClip> {
    let mut provenance = Vec::new();
    if raw.fps < MIN_SOURCE_FPS {
        return Err(Error::Invalid(format!(
            "{}: {} fps is below quality floor of {MIN_SOURCE_FPS} fps",
            entry.video_id, raw.fps
        )));
    }
    let cropped = temporal_crop(&raw.frames, raw.fps, entry.start_time, entry.end_time)?;
    provenance.push(ProvenanceStep::new(
        "temporal_crop",
        format!("[{}, {}) s -> {} frames", entry.start_time, entry.end_time, cropped.t),
    ));

    let (h, w) = (cropped.h, cropped.w);
    let region = aspect_crop_box(h, w, format.width, format.height);
    let scaled: Vec<Vec<f32>> = (0..cropped.t)
        .into_par_iter()
        .map(|i| resize_bilinear(cropped.frame(i), h, w, region, format.width, format.height))
        .collect();
    let scaled = FrameStack::from_frames(format.height, format.width, scaled)?;
    provenance.push(ProvenanceStep::new(
        "aspect_crop_and_scale",
        format!(
            "{w}x{h} crop ({}, {}, {}x{}) -> bilinear {}x{}",
            region.0, region.1, region.2, region.3, format.width, format.height
        ),
    ));

    let mut frames = resample_fps(&scaled, raw.fps, format.fps)?;
    let mode = match raw.fps.partial_cmp(&format.fps) {
        Some(std::cmp::Ordering::Greater) => "nearest-frame subsampling",
        Some(std::cmp::Ordering::Less) => "linear interpolation",
        _ => "identity",
    };
    provenance.push(ProvenanceStep::new(
        "resample_fps",
        format!("{} fps -> {} fps ({mode}), {} frames", raw.fps, format.fps, frames.t),
    ));

    let zscore_stats = zscore_normalize(&mut frames);
    provenance.push(ProvenanceStep::new("zscore_normalize", "per-channel, per-clip statistics".into()));

    Ok(CanonicalClip {
        video_id: entry.video_id.clone(),
        duration: frames.t as f64 / format.fps,
        frames,
        fps: format.fps,
        zscore_stats,
        provenance,
    })
}
