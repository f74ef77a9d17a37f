use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ingest::Direction;
use crate::video::{FrameStack, CHANNELS};

const MARK_COLOR: [u8; 3] = [35, 35, 45];

use super::{Body, RenderConfig, Scenario};

/// Static low-contrast texture behind the discs, values in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Background {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl Background {
    pub fn new(render: &RenderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (render.width, render.height);
        let base: f32 = rng.gen_range(95.0..125.0);
        let tint: [f32; 3] = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
        let (fx, fy) = (rng.gen_range(3.0..9.0), rng.gen_range(2.0..6.0));
        let (px, py) = (rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3));
        let horizon = rng.gen_range(0.45..0.6);
        let mut pixels = vec![0.0f32; w * h * CHANNELS];
        for y in 0..h {
            let v = y as f64 / h as f64;
            for x in 0..w {
                let u = x as f64 / h as f64;
                let wave = 12.0 * ((fx * u + px).sin() * (fy * v + py).sin()) as f32;
                let road = if v > horizon { -14.0 } else { 0.0 };
                let grain: f32 = rng.gen_range(-6.0..6.0);
                let i = (y * w + x) * CHANNELS;
                for c in 0..CHANNELS {
                    pixels[i + c] = (base + tint[c] + wave + road + grain).clamp(0.0, 255.0);
                }
            }
        }
        Self { width: w, height: h, pixels }
    }
}

/// Anti-aliased disc composited over `frame`; centre and radius in pixels.
fn draw_disc(frame: &mut [f32], w: usize, h: usize, (cx, cy, r): (f64, f64, f64), color: [u8; 3]) {
    if r <= 0.0 {
        return;
    }
    let x0 = ((cx - r - 1.0).floor().max(0.0)) as usize;
    let y0 = ((cy - r - 1.0).floor().max(0.0)) as usize;
    let x1 = ((cx + r + 1.0).ceil().min(w as f64 - 1.0)).max(-1.0);
    let y1 = ((cy + r + 1.0).ceil().min(h as f64 - 1.0)).max(-1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    for y in y0..=y1 as usize {
        for x in x0..=x1 as usize {
            let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
            let a = (r + 0.5 - d).clamp(0.0, 1.0) as f32;
            if a > 0.0 {
                let i = (y * w + x) * CHANNELS;
                for ch in 0..CHANNELS {
                    frame[i + ch] = frame[i + ch] * (1.0 - a) + color[ch] as f32 * a;
                }
            }
        }
    }
}

/// Draw a body. Bodies crossing the view are seen in profile, so they get
/// a dark mark on their leading side; bodies moving along the view axis or
/// standing still look the same from every side.
fn draw_body(frame: &mut [f32], w: usize, h: usize, body: &Body, t: f64) {
    let scale = h as f64;
    let c = body.center_at(t);
    let (cx, cy, r) = (c[0] * scale, c[1] * scale, body.radius_at(t).max(0.0) * scale);
    draw_disc(frame, w, h, (cx, cy, r), body.color);
    let side = match body.direction() {
        Direction::Left => -1.0,
        Direction::Right => 1.0,
        _ => return,
    };
    draw_disc(frame, w, h, (cx + side * 0.45 * r, cy - 0.1 * r, 0.5 * r), MARK_COLOR);
}

/// One frame at scene time `t`, values in `[0, 255]`.
pub fn render_frame(scenario: &Scenario, background: &Background, t: f64) -> Vec<f32> {
    let (w, h) = (background.width, background.height);
    let mut frame = background.pixels.clone();
    draw_body(&mut frame, w, h, &scenario.object, t);
    draw_body(&mut frame, w, h, &scenario.cyclist, t);
    frame
}

/// All source frames at the render frame rate, quantized to whole levels
/// as a real 8-bit video would be.
pub fn render_scenario(scenario: &Scenario) -> FrameStack {
    let r = &scenario.render;
    let bg = Background::new(r, scenario.texture_seed);
    let frames: Vec<Vec<f32>> = (0..scenario.n_frames())
        .map(|i| {
            let mut f = render_frame(scenario, &bg, i as f64 / r.fps);
            f.iter_mut().for_each(|v| *v = v.round());
            f
        })
        .collect();
    FrameStack::from_frames(r.height, r.width, frames).expect("rendered frames match the raster")
}
