//! Canonical clip preparation: temporal crop, 16:9 crop and rescale,
//! frame-rate conversion, z-scoring, windowing and training augmentation.

mod augment;
mod io;
mod ops;
mod pipeline;

pub use augment::{
    augment_window, center_params, photometric_jitter, sample_augment, AugmentConfig, AugmentParams, JitterParams,
    JitterRanges, JitterSpace,
};
pub use io::{
    decode_video, read_raw_video, write_raw_video, CanonicalStore, ClipMeta, RawVideo, Transcoder, RAW_EXTENSION,
    TRANSCODER_ENV,
};
pub use pipeline::{find_source, preprocess_corpus, PreprocessReport};
pub use ops::{
    aspect_crop_and_scale, aspect_crop_box, canonicalize, denormalize, flip_horizontal, resample_fps, resize_bilinear,
    source_position, temporal_crop, zscore_normalize, CanonicalClip, ChannelStats, ProvenanceStep, MIN_SOURCE_FPS,
    ZSCORE_EPS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CANONICAL_FPS: f64 = 30.0;
pub const CANONICAL_WIDTH: usize = 1280;
pub const CANONICAL_HEIGHT: usize = 720;
/// Frames per training window (one second).
pub const WINDOW_LEN: usize = 30;
/// Frames between consecutive window starts (half a second).
pub const WINDOW_STRIDE: usize = 15;

/// Target geometry for canonical clips. The default is 1280×720 at 30 fps;
/// smaller 16:9 targets keep synthetic end-to-end runs cheap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalFormat {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
}

impl Default for CanonicalFormat {
    fn default() -> Self {
        Self { width: CANONICAL_WIDTH, height: CANONICAL_HEIGHT, fps: CANONICAL_FPS }
    }
}

impl CanonicalFormat {
    /// A 16:9 format `width` pixels wide, at the canonical frame rate.
    pub fn scaled(width: usize) -> Self {
        Self { width, height: width * 9 / 16, fps: CANONICAL_FPS }
    }
}

/// `T × H × W × 3` frames, row-major, channels last.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

pub const CHANNELS: usize = 3;

impl FrameStack {
    pub fn new(t: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != t * h * w * CHANNELS {
            return Err(Error::Shape(format!("{} values for {t}×{h}×{w}×3 frames", data.len())));
        }
        Ok(Self { t, h, w, data })
    }

    pub fn zeros(t: usize, h: usize, w: usize) -> Self {
        Self { t, h, w, data: vec![0.0; t * h * w * CHANNELS] }
    }

    pub fn frame_len(&self) -> usize {
        self.h * self.w * CHANNELS
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn frame_mut(&mut self, i: usize) -> &mut [f32] {
        let n = self.frame_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks(self.frame_len().max(1))
    }

    /// Frames `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<FrameStack> {
        if start + len > self.t {
            return Err(Error::Shape(format!("frames {start}..{} beyond clip of {}", start + len, self.t)));
        }
        let n = self.frame_len();
        Ok(FrameStack { t: len, h: self.h, w: self.w, data: self.data[start * n..(start + len) * n].to_vec() })
    }

    pub fn from_frames(h: usize, w: usize, frames: Vec<Vec<f32>>) -> Result<Self> {
        let t = frames.len();
        let data: Vec<f32> = frames.into_iter().flatten().collect();
        Self::new(t, h, w, data)
    }
}

/// A one-second window into a canonical clip.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentWindow {
    pub video_id: String,
    pub start_frame: usize,
}

impl SegmentWindow {
    pub fn new(video_id: impl Into<String>, start_frame: usize) -> Self {
        Self { video_id: video_id.into(), start_frame }
    }

    pub fn length(&self) -> usize {
        WINDOW_LEN
    }

    pub fn start_time(&self) -> f64 {
        self.start_frame as f64 / CANONICAL_FPS
    }

    /// Time just after the last frame of the window.
    pub fn end_time(&self) -> f64 {
        (self.start_frame + WINDOW_LEN) as f64 / CANONICAL_FPS
    }
}

/// Window start frames for a clip of `t` frames.
pub fn segment_starts(t: usize) -> impl Iterator<Item = usize> {
    (0..).map(|i| i * WINDOW_STRIDE).take_while(move |s| s + WINDOW_LEN <= t)
}

/// Windows covering a canonical clip; clips shorter than one window yield none.
pub fn segment(clip: &CanonicalClip) -> Vec<SegmentWindow> {
    if clip.frames.t < WINDOW_LEN {
        log::warn!("{}: {} frames is shorter than one window", clip.video_id, clip.frames.t);
    }
    segment_starts(clip.frames.t).map(|s| SegmentWindow::new(clip.video_id.clone(), s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate(t: usize) -> Vec<usize> {
        (0..t).filter(|s| s % 15 == 0 && s + 30 <= t).collect()
    }

    #[test]
    fn window_starts_match_enumeration() {
        assert_eq!(segment_starts(90).collect::<Vec<_>>(), vec![0, 15, 30, 45, 60]);
        assert_eq!(segment_starts(45).collect::<Vec<_>>(), vec![0, 15]);
        assert_eq!(segment_starts(30).count(), 1);
        assert_eq!(segment_starts(29).count(), 0);
        for t in 0..400 {
            let got: Vec<usize> = segment_starts(t).collect();
            assert_eq!(got, enumerate(t));
            if t >= 30 {
                assert_eq!(got.len(), (t - 30) / 15 + 1);
            }
            for pair in got.windows(2) {
                assert_eq!(pair[0] + 30 - pair[1], 15, "consecutive windows overlap by 15 frames");
            }
        }
    }

    #[test]
    fn window_times() {
        let w = SegmentWindow::new("v", 60);
        assert_eq!(w.start_time(), 2.0);
        assert_eq!(w.end_time(), 3.0);
    }
}
