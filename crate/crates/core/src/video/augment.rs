use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{flip_horizontal, resize_bilinear};
use super::{CanonicalFormat, FrameStack, CHANNELS};

/// Spatial augmentation geometry. Defaults: 700×700 crop from a 1280×720
/// clip, 0.25 flip probability, 224×224 model input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub crop_size: usize,
    pub out_size: usize,
    pub flip_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { crop_size: 700, out_size: 224, flip_prob: 0.25 }
    }
}

impl AugmentConfig {
    /// Keep the 700/720 crop-to-height proportion for a scaled canonical format.
    pub fn for_format(format: &CanonicalFormat, out_size: usize) -> Self {
        let crop = ((700.0 / 720.0) * format.height as f64).round() as usize;
        Self { crop_size: crop.clamp(1, format.height.min(format.width)), out_size, flip_prob: 0.25 }
    }
}

/// Photometric perturbation strengths. Brightness is an additive offset in
/// units of the pixel range, contrast/saturation are `1 ± range` factors, hue
/// is a rotation in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterRanges {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl JitterRanges {
    pub fn standard() -> Self {
        Self { brightness: 0.2, contrast: 0.2, saturation: 0.2, hue: 0.1 }
    }
}

/// Pixel space the jitter operates in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum JitterSpace {
    /// Values in `[0, max]`; results are clamped.
    Raw { max: f32 },
    /// Z-scored values; no clamping.
    Normalized,
}

impl JitterSpace {
    fn unit(self) -> f64 {
        match self {
            JitterSpace::Raw { max } => max as f64,
            JitterSpace::Normalized => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl JitterParams {
    pub fn identity() -> Self {
        Self { brightness: 0.0, contrast: 1.0, saturation: 1.0, hue: 0.0 }
    }

    pub fn sample(rng: &mut impl Rng, ranges: &JitterRanges, space: JitterSpace) -> Self {
        let mut sym = |r: f64| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        Self {
            brightness: sym(ranges.brightness) * space.unit(),
            contrast: 1.0 + sym(ranges.contrast),
            saturation: 1.0 + sym(ranges.saturation),
            hue: sym(ranges.hue),
        }
    }
}

/// Spatial augmentation drawn for one window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub crop_x: usize,
    pub crop_y: usize,
    pub flip: bool,
    pub jitter: Option<JitterParams>,
}

/// Draw a random crop offset and flip. The flip draw always consumes one
/// value so the stream position does not depend on `allow_flip`.
pub fn sample_augment(rng: &mut impl Rng, cfg: &AugmentConfig, h: usize, w: usize, allow_flip: bool) -> AugmentParams {
    let crop = cfg.crop_size.min(h).min(w);
    let crop_x = rng.gen_range(0..=w - crop);
    let crop_y = rng.gen_range(0..=h - crop);
    let u: f64 = rng.gen();
    AugmentParams { crop_x, crop_y, flip: allow_flip && u < cfg.flip_prob, jitter: None }
}

/// Deterministic centre crop used at evaluation time.
pub fn center_params(cfg: &AugmentConfig, h: usize, w: usize) -> AugmentParams {
    let crop = cfg.crop_size.min(h).min(w);
    AugmentParams { crop_x: (w - crop) / 2, crop_y: (h - crop) / 2, flip: false, jitter: None }
}

/// Crop every frame identically, resize to `out_size`, then flip and jitter
/// as requested.
pub fn augment_window(window: &FrameStack, params: &AugmentParams, cfg: &AugmentConfig, space: JitterSpace) -> FrameStack {
    let crop = cfg.crop_size.min(window.h).min(window.w);
    let region = (params.crop_x, params.crop_y, crop, crop);
    let frames: Vec<Vec<f32>> = (0..window.t)
        .map(|i| resize_bilinear(window.frame(i), window.h, window.w, region, cfg.out_size, cfg.out_size))
        .collect();
    let mut out = FrameStack::from_frames(cfg.out_size, cfg.out_size, frames).expect("consistent frame sizes");
    if params.flip {
        flip_horizontal(&mut out);
    }
    if let Some(j) = &params.jitter {
        photometric_jitter(&mut out, j, space);
    }
    out
}

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

// RGB <-> YIQ; hue rotation turns the (I, Q) chroma plane.
const TO_YIQ: [[f64; 3]; 3] = [[0.299, 0.587, 0.114], [0.595_716, -0.274_453, -0.321_263], [0.211_456, -0.522_591, 0.311_135]];

fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [c(1, 1, 2, 2) / det, -c(0, 1, 2, 2) / det, c(0, 1, 1, 2) / det],
        [-c(1, 0, 2, 2) / det, c(0, 0, 2, 2) / det, -c(0, 0, 1, 2) / det],
        [c(1, 0, 2, 1) / det, -c(0, 0, 2, 1) / det, c(0, 0, 1, 1) / det],
    ]
}

fn matmul3(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// Linear RGB transform rotating hue by `angle` radians.
pub fn hue_matrix(angle: f64) -> [[f64; 3]; 3] {
    let (s, c) = angle.sin_cos();
    let rot = [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]];
    matmul3(invert3(TO_YIQ), matmul3(rot, TO_YIQ))
}

/// Brightness, contrast, saturation and hue with the same parameters on every frame.
pub fn photometric_jitter(frames: &mut FrameStack, p: &JitterParams, space: JitterSpace) {
    let clamp = |v: f64| match space {
        JitterSpace::Raw { max } => v.clamp(0.0, max as f64),
        JitterSpace::Normalized => v,
    };
    if p.brightness != 0.0 {
        for v in frames.data.iter_mut() {
            *v = clamp(*v as f64 + p.brightness) as f32;
        }
    }
    if p.contrast != 1.0 {
        let n = (frames.data.len() / CHANNELS).max(1) as f64;
        let mean = frames.data.chunks(CHANNELS).map(|px| (0..3).map(|c| LUMA[c] * px[c] as f64).sum::<f64>()).sum::<f64>() / n;
        for v in frames.data.iter_mut() {
            *v = clamp(mean + p.contrast * (*v as f64 - mean)) as f32;
        }
    }
    if p.saturation != 1.0 {
        for px in frames.data.chunks_mut(CHANNELS) {
            let gray: f64 = (0..3).map(|c| LUMA[c] * px[c] as f64).sum();
            for v in px.iter_mut() {
                *v = clamp(gray + p.saturation * (*v as f64 - gray)) as f32;
            }
        }
    }
    if p.hue != 0.0 {
        let m = hue_matrix(p.hue);
        for px in frames.data.chunks_mut(CHANNELS) {
            let rgb = [px[0] as f64, px[1] as f64, px[2] as f64];
            for (c, row) in m.iter().enumerate() {
                px[c] = clamp(row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]) as f32;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(t: usize, h: usize, w: usize) -> FrameStack {
        FrameStack::new(t, h, w, (0..t * h * w * 3).map(|k| ((k * 37) % 251) as f32).collect()).unwrap()
    }

    #[test]
    fn flip_threshold() {
        let cfg = AugmentConfig::default();
        // Search for a seed whose flip draw lands at or above 0.25.
        for seed in 0..50u64 {
            let mut probe = ChaCha8Rng::seed_from_u64(seed);
            let _x: usize = probe.gen_range(0..=580);
            let _y: usize = probe.gen_range(0..=20);
            let u: f64 = probe.gen();
            let p = sample_augment(&mut ChaCha8Rng::seed_from_u64(seed), &cfg, 720, 1280, true);
            assert_eq!(p.flip, u < 0.25);
            assert!(p.crop_x <= 580 && p.crop_y <= 20);
        }
        let p = sample_augment(&mut ChaCha8Rng::seed_from_u64(0), &cfg, 720, 1280, false);
        assert!(!p.flip);
    }

    #[test]
    fn double_flip_equals_no_flip() {
        let cfg = AugmentConfig { crop_size: 6, out_size: 4, flip_prob: 0.25 };
        let w = ramp(3, 8, 10);
        let base = AugmentParams { crop_x: 2, crop_y: 1, flip: false, jitter: None };
        let plain = augment_window(&w, &base, &cfg, JitterSpace::Normalized);
        let mut flipped = augment_window(&w, &AugmentParams { flip: true, ..base }, &cfg, JitterSpace::Normalized);
        assert_ne!(flipped, plain);
        flip_horizontal(&mut flipped);
        assert_eq!(flipped, plain);
    }

    /// Centre crop + resize against a direct per-pixel index mapping.
    #[test]
    fn eval_crop_matches_index_oracle() {
        let cfg = AugmentConfig { crop_size: 12, out_size: 5, flip_prob: 0.25 };
        let w = ramp(2, 14, 20);
        let p = center_params(&cfg, 14, 20);
        assert_eq!((p.crop_x, p.crop_y), (4, 1));
        let out = augment_window(&w, &p, &cfg, JitterSpace::Normalized);
        let scale = 12.0 / 5.0;
        for f in 0..2 {
            for oy in 0..5 {
                for ox in 0..5 {
                    let sy = ((oy as f64 + 0.5) * scale - 0.5).clamp(0.0, 11.0);
                    let sx = ((ox as f64 + 0.5) * scale - 0.5).clamp(0.0, 11.0);
                    for c in 0..3 {
                        let px = |y: usize, x: usize| w.frame(f)[((1 + y) * 20 + 4 + x) * 3 + c] as f64;
                        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                        let (y1, x1) = ((y0 + 1).min(11), (x0 + 1).min(11));
                        let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
                        let want = px(y0, x0) * (1.0 - fy) * (1.0 - fx)
                            + px(y0, x1) * (1.0 - fy) * fx
                            + px(y1, x0) * fy * (1.0 - fx)
                            + px(y1, x1) * fy * fx;
                        let got = out.frame(f)[(oy * 5 + ox) * 3 + c] as f64;
                        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_jitter_is_identity() {
        let mut w = ramp(2, 3, 3);
        let orig = w.clone();
        let p = JitterParams::sample(&mut ChaCha8Rng::seed_from_u64(1), &JitterRanges::default(), JitterSpace::Raw { max: 255.0 });
        assert_eq!(p, JitterParams::identity());
        photometric_jitter(&mut w, &p, JitterSpace::Raw { max: 255.0 });
        assert_eq!(w, orig);
    }

    #[test]
    fn brightness_adds_and_clamps() {
        let mut w = FrameStack::new(1, 1, 2, vec![10.0, 100.0, 250.0, 0.0, 5.0, 200.0]).unwrap();
        let p = JitterParams { brightness: 20.0, ..JitterParams::identity() };
        photometric_jitter(&mut w, &p, JitterSpace::Raw { max: 255.0 });
        assert_eq!(w.data, vec![30.0, 120.0, 255.0, 20.0, 25.0, 220.0]);
    }

    #[test]
    fn full_turn_hue_is_identity() {
        let m = hue_matrix(2.0 * std::f64::consts::PI);
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((v - id).abs() < 1e-12);
            }
        }
        let mut w = ramp(2, 4, 4);
        let orig = w.clone();
        let p = JitterParams { hue: 2.0 * std::f64::consts::PI, ..JitterParams::identity() };
        photometric_jitter(&mut w, &p, JitterSpace::Raw { max: 255.0 });
        for (a, b) in w.data.iter().zip(&orig.data) {
            assert!(((a - b) / 255.0).abs() < 1e-5);
        }
    }

    /// Round trip through the colour space and a hue turn split into pieces.
    #[test]
    fn hue_rotations_compose() {
        let yiq_rt = matmul3(invert3(TO_YIQ), TO_YIQ);
        for (i, row) in yiq_rt.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let a = matmul3(hue_matrix(0.7), hue_matrix(0.5));
        let b = hue_matrix(1.2);
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-12);
            }
        }
        // Hue rotation preserves luma.
        let m = hue_matrix(1.0);
        for j in 0..3 {
            let luma_col: f64 = (0..3).map(|i| LUMA[i] * m[i][j]).sum();
            assert!((luma_col - LUMA[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn jitter_parameters_shared_across_frames() {
        // Two identical frames stay identical after jitter.
        let one = ramp(1, 3, 3);
        let mut two = FrameStack::from_frames(3, 3, vec![one.frame(0).to_vec(), one.frame(0).to_vec()]).unwrap();
        let p = JitterParams::sample(&mut ChaCha8Rng::seed_from_u64(9), &JitterRanges::standard(), JitterSpace::Normalized);
        photometric_jitter(&mut two, &p, JitterSpace::Normalized);
        assert_eq!(two.frame(0), two.frame(1));
    }
}
