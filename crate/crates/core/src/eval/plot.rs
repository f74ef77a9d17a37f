//! Minimal PNG charts: bars, count heatmaps and labelled scatter plots.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const BAR: Rgb<u8> = Rgb([60, 110, 180]);
const PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
];

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Invalid(format!("writing {}: {e}", path.display())))
}

fn fill(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, c: Rgb<u8>) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            img.put_pixel(x, y, c);
        }
    }
}

pub fn render_bars(counts: &[usize], path: &Path) -> Result<()> {
    let (w, h, pad) = (40 * counts.len().max(1) as u32 + 20, 240u32, 10u32);
    let mut img = RgbImage::from_pixel(w, h, BG);
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    for (i, &c) in counts.iter().enumerate() {
        let bar = ((h - 2 * pad) as f64 * c as f64 / top).round() as u32;
        let x = pad + 40 * i as u32;
        fill(&mut img, x + 4, h - pad - bar, x + 36, h - pad, BAR);
    }
    fill(&mut img, pad, h - pad, w - pad, h - pad + 1, Rgb([0, 0, 0]));
    save(&img, path)
}

pub fn render_heatmap(counts: &[Vec<usize>], path: &Path) -> Result<()> {
    let cell = 32u32;
    let rows = counts.len().max(1) as u32;
    let cols = counts.iter().map(Vec::len).max().unwrap_or(0).max(1) as u32;
    let mut img = RgbImage::from_pixel(cols * cell, rows * cell, BG);
    let top = counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            let s = c as f64 / top;
            let shade = Rgb([(255.0 * (1.0 - 0.8 * s)) as u8, (255.0 * (1.0 - 0.6 * s)) as u8, (255.0 * (1.0 - 0.2 * s)) as u8]);
            let (x, y) = (j as u32 * cell, i as u32 * cell);
            fill(&mut img, x + 1, y + 1, x + cell - 1, y + cell - 1, shade);
        }
    }
    save(&img, path)
}

/// Points coloured by class, scaled to fill the canvas.
pub fn render_scatter(points: &[[f64; 2]], classes: &[usize], path: &Path) -> Result<()> {
    let size = 480u32;
    let mut img = RgbImage::from_pixel(size, size, BG);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let scale = |v: f64, k: usize| {
        let span = (hi[k] - lo[k]).max(1e-12);
        (12.0 + (v - lo[k]) / span * (size as f64 - 24.0)) as u32
    };
    for (p, &c) in points.iter().zip(classes) {
        let (x, y) = (scale(p[0], 0), size - scale(p[1], 1));
        let col = Rgb(PALETTE[c % PALETTE.len()]);
        fill(&mut img, x.saturating_sub(2), y.saturating_sub(2), x + 3, y + 3, col);
    }
    save(&img, path)
}
