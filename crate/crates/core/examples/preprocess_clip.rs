//! Canonicalize one raw clip: temporal crop, aspect crop and resize, 24 to
//! 30 fps resampling and per-clip z-scoring, then cut it into windows.
//!
//! cargo run --release --example preprocess_clip

use cyclist_collision::ingest::{Platform, VideoManifestEntry};
use cyclist_collision::video::{canonicalize, segment_starts, CanonicalFormat, FrameStack, RawVideo};
use rand::{Rng, SeedableRng};

fn main() -> cyclist_collision::Result<()> {
    // A 4 s, 24 fps, 4:3 clip of a bright square drifting right over noise.
    let (w, h, fps) = (160, 120, 24.0);
    let n = (4.0 * fps) as usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut data = Vec::with_capacity(n * h * w * 3);
    for t in 0..n {
        let x0 = 20 + t;
        for y in 0..h {
            for x in 0..w {
                let inside = (x0..x0 + 20).contains(&x) && (50..70).contains(&y);
                let v = if inside { 230.0 } else { rng.gen_range(40.0f32..90.0).round() };
                data.extend([v, v, v]);
            }
        }
    }
    let raw = RawVideo { fps, frames: FrameStack::new(n, h, w, data)? };
    let entry = VideoManifestEntry {
        video_id: "demo".into(),
        source_url: "demo.rgbv".into(),
        start_time: 0.5,
        end_time: 3.5,
        source_platform: Platform::Local,
        pool: None,
    };
    let clip = canonicalize(&raw, &entry, &CanonicalFormat::scaled(128))?;
    println!("canonical clip: {} frames of {}x{} at {} fps, {:.3} s", clip.frames.t, clip.frames.w, clip.frames.h, clip.fps, clip.duration);
    for (c, s) in ["R", "G", "B"].iter().zip(&clip.zscore_stats) {
        println!("channel {c}: source mean {:.2}, std {:.2}", s.mean, s.std);
    }
    for step in &clip.provenance {
        println!("  {}: {}", step.step, step.detail);
    }
    let starts: Vec<usize> = segment_starts(clip.frames.t).collect();
    println!("{} one-second windows start at frames {starts:?}", starts.len());
    Ok(())
}
