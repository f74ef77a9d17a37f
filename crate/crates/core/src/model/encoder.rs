//! Per-frame encoders. Frames are NHWC; every frame of every clip goes
//! through the same weights.

use crate::autograd::Var;
use crate::error::{Error, Result};

use super::params::{Bound, InitKind, ParamSpec, SpecList};
use super::{EncoderKind, VidNeXtConfig};

const NORM_EPS: f64 = 1e-6;

pub fn encoder_specs(cfg: &VidNeXtConfig) -> Vec<ParamSpec> {
    let mut s = SpecList(Vec::new());
    let dims = &cfg.encoder_dims;
    match cfg.encoder_kind {
        EncoderKind::ConvnextStyle => {
            s.conv("encoder.stem", 4, 3, dims[0], true);
            s.norm("encoder.stem_norm", dims[0]);
            for (i, (&c, &depth)) in dims.iter().zip(&cfg.encoder_depths).enumerate() {
                if i > 0 {
                    s.norm(&format!("encoder.down{i}.norm"), dims[i - 1]);
                    s.conv(&format!("encoder.down{i}.conv"), 2, dims[i - 1], c, true);
                }
                for b in 0..depth {
                    let p = format!("encoder.stage{i}.block{b}");
                    s.conv(&format!("{p}.dw"), 7, 1, c, true);
                    s.norm(&format!("{p}.norm"), c);
                    s.linear(&format!("{p}.pw1"), c, 4 * c);
                    s.linear(&format!("{p}.pw2"), 4 * c, c);
                    s.push(format!("{p}.scale"), &[c], InitKind::Const(cfg.layer_scale_init));
                }
            }
            s.norm("encoder.final_norm", *dims.last().unwrap());
        }
        EncoderKind::ResnetStyle => {
            s.conv("encoder.stem", 3, 3, dims[0], false);
            s.norm("encoder.stem_norm", dims[0]);
            let mut cin = dims[0];
            for (i, (&c, &depth)) in dims.iter().zip(&cfg.encoder_depths).enumerate() {
                for b in 0..depth {
                    let p = format!("encoder.stage{i}.block{b}");
                    let inp = if b == 0 { cin } else { c };
                    s.conv(&format!("{p}.conv1"), 3, inp, c, false);
                    s.norm(&format!("{p}.norm1"), c);
                    s.conv(&format!("{p}.conv2"), 3, c, c, false);
                    s.norm(&format!("{p}.norm2"), c);
                    if b == 0 && (i > 0 || inp != c) {
                        s.conv(&format!("{p}.short"), 1, inp, c, false);
                        s.norm(&format!("{p}.short_norm"), c);
                    }
                }
                cin = c;
            }
        }
    }
    let last = *dims.last().unwrap();
    if last != cfg.embed_dim {
        s.linear("encoder.proj", last, cfg.embed_dim);
    }
    s.0
}

fn conv<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, stride: usize, pad: usize, groups: usize) -> Var<'g> {
    let y = x.conv2d(p.get(&format!("{name}.w")), stride, pad, groups);
    match p.try_get(&format!("{name}.b")) {
        Some(b) => y.add(b),
        None => y,
    }
}

fn convnext<'g>(p: &Bound<'g>, cfg: &VidNeXtConfig, x: Var<'g>) -> Var<'g> {
    let dims = &cfg.encoder_dims;
    let mut h = conv(p, "encoder.stem", x, 4, 0, 1);
    h = p.norm("encoder.stem_norm", h, NORM_EPS);
    for (i, (&c, &depth)) in dims.iter().zip(&cfg.encoder_depths).enumerate() {
        if i > 0 {
            h = p.norm(&format!("encoder.down{i}.norm"), h, NORM_EPS);
            h = conv(p, &format!("encoder.down{i}.conv"), h, 2, 0, 1);
        }
        for b in 0..depth {
            let name = format!("encoder.stage{i}.block{b}");
            let mut y = conv(p, &format!("{name}.dw"), h, 1, 3, c);
            y = p.norm(&format!("{name}.norm"), y, NORM_EPS);
            y = p.linear(&format!("{name}.pw1"), y).gelu();
            y = p.linear(&format!("{name}.pw2"), y);
            y = y.mul(p.get(&format!("{name}.scale")));
            h = h.add(y);
        }
    }
    let pooled = global_pool(h);
    p.norm("encoder.final_norm", pooled, NORM_EPS)
}

fn resnet<'g>(p: &Bound<'g>, cfg: &VidNeXtConfig, x: Var<'g>) -> Var<'g> {
    let mut h = conv(p, "encoder.stem", x, 2, 1, 1);
    h = p.norm("encoder.stem_norm", h, NORM_EPS).relu();
    for (i, &depth) in cfg.encoder_depths.iter().enumerate() {
        for b in 0..depth {
            let name = format!("encoder.stage{i}.block{b}");
            let stride = if b == 0 && i > 0 { 2 } else { 1 };
            let mut y = conv(p, &format!("{name}.conv1"), h, stride, 1, 1);
            y = p.norm(&format!("{name}.norm1"), y, NORM_EPS).relu();
            y = conv(p, &format!("{name}.conv2"), y, 1, 1, 1);
            y = p.norm(&format!("{name}.norm2"), y, NORM_EPS);
            let short = if p.try_get(&format!("{name}.short.w")).is_some() {
                let s = conv(p, &format!("{name}.short"), h, stride, 0, 1);
                p.norm(&format!("{name}.short_norm"), s, NORM_EPS)
            } else {
                h
            };
            h = y.add(short).relu();
        }
    }
    global_pool(h)
}

/// Mean over the spatial axes of an NHWC map, giving `[N, C]`.
fn global_pool(h: Var<'_>) -> Var<'_> {
    let s = h.shape();
    let (n, c) = (s[0], s[3]);
    h.reshape(&[n, s[1] * s[2], c]).mean_axis(1).reshape(&[n, c])
}

/// Encode `[B, T, H, W, 3]` frames into a `[B, T, d]` embedding series.
pub fn encode_frames<'g>(p: &Bound<'g>, cfg: &VidNeXtConfig, frames: Var<'g>) -> Result<Var<'g>> {
    let s = frames.shape();
    if s.len() != 5 || s[4] != 3 {
        return Err(Error::Shape(format!("frames must be [B, T, H, W, 3], got {s:?}")));
    }
    let (b, t, h, w) = (s[0], s[1], s[2], s[3]);
    let stride = cfg.encoder_stride();
    if h != w || h % stride != 0 || h == 0 {
        return Err(Error::Shape(format!("frames {h}×{w} must be square and a multiple of {stride}")));
    }
    let x = frames.reshape(&[b * t, h, w, 3]);
    let mut e = match cfg.encoder_kind {
        EncoderKind::ConvnextStyle => convnext(p, cfg, x),
        EncoderKind::ResnetStyle => resnet(p, cfg, x),
    };
    if p.try_get("encoder.proj.w").is_some() {
        e = p.linear("encoder.proj", e);
    }
    Ok(e.reshape(&[b, t, cfg.embed_dim]))
}
