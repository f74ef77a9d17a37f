//! Series stationarization, the τ/Δ projector, de-stationary attention and
//! the encoder-decoder over the per-frame embeddings.

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::params::{Bound, InitKind, ParamSpec, SpecList};
use super::{TemporalKind, VidNeXtConfig};

const NORM_EPS: f64 = 1e-5;

/// Output of [`stationarize`]: the normalized series and the moments that
/// were removed.
#[derive(Clone, Copy, Debug)]
pub struct Stationarized<'g> {
    /// `[B, T, d]`
    pub x_prime: Var<'g>,
    /// `[B, 1, d]`
    pub mu: Var<'g>,
    /// `[B, 1, d]`, population standard deviation (not floored).
    pub sigma: Var<'g>,
}

/// Per-instance, per-feature z-scoring over the time axis. The divisor is
/// `max(sigma, eps)`.
pub fn stationarize(x: Var<'_>, eps: f64) -> Stationarized<'_> {
    let mu = x.mean_axis(1);
    let centered = x.sub(mu);
    let var = centered.mul(centered).mean_axis(1);
    let sigma = var.sqrt();
    let x_prime = centered.div(sigma.clamp_min(eps));
    Stationarized { x_prime, mu, sigma }
}

/// `y = y' · sigma + mu`.
pub fn denormalize<'g>(y_prime: Var<'g>, mu: Var<'g>, sigma: Var<'g>) -> Var<'g> {
    y_prime.mul(sigma).add(mu)
}

/// Re-scaling factors fed to de-stationary attention.
#[derive(Clone, Copy, Debug)]
pub struct DeStationaryFactors<'g> {
    /// `[B, 1]`, strictly positive.
    pub tau: Var<'g>,
    /// `[B, T]`, one value per key time step.
    pub delta: Var<'g>,
}

fn projector_specs(s: &mut SpecList, name: &str, cfg: &VidNeXtConfig, out: usize) {
    let (d, h, t) = (cfg.embed_dim, cfg.projector_hidden, cfg.seq_len);
    s.push(format!("{name}.pool"), &[t, 1], InitKind::Const(1.0 / t as f64));
    s.push(format!("{name}.fc1.wx"), &[d, h], InitKind::FanIn(2 * d));
    s.push(format!("{name}.fc1.ws"), &[d, h], InitKind::FanIn(2 * d));
    s.push(format!("{name}.fc1.b"), &[h], InitKind::Zeros);
    s.zero_linear(&format!("{name}.fc2"), h, out);
}

/// Learned pooling of the raw series over time, joined with a statistic and
/// passed through a two-layer GELU network. Returns `[B, out]`.
fn projector<'g>(p: &Bound<'g>, name: &str, x: Var<'g>, stat: Var<'g>) -> Var<'g> {
    let s = x.shape();
    let (b, d) = (s[0], s[2]);
    let pooled = x.permute(&[0, 2, 1]).matmul(p.get(&format!("{name}.pool"))).reshape(&[b, d]);
    let stat = stat.reshape(&[b, d]);
    let h = pooled
        .matmul(p.get(&format!("{name}.fc1.wx")))
        .add(stat.matmul(p.get(&format!("{name}.fc1.ws"))))
        .add(p.get(&format!("{name}.fc1.b")))
        .gelu();
    p.linear(&format!("{name}.fc2"), h)
}

/// `log τ` from the raw series and sigma, `Δ` from the raw series and mu.
pub fn tau_delta_projector<'g>(p: &Bound<'g>, x: Var<'g>, mu: Var<'g>, sigma: Var<'g>) -> DeStationaryFactors<'g> {
    let tau = projector(p, "temporal.tau", x, sigma).exp();
    let delta = projector(p, "temporal.delta", x, mu);
    DeStationaryFactors { tau, delta }
}

/// Scaled dot-product attention with de-stationary factors.
///
/// `q` is `[B, H, Tq, dh]`, `k` and `v` are `[B, H, Tk, dh]`. Scores are
/// `(tau · q kᵀ + delta) / sqrt(dh)` with `tau` `[B, 1]` and `delta` `[B, Tk]`
/// broadcast over heads and query rows. Returns the output and the attention
/// weights.
pub fn destationary_attention<'g>(
    q: Var<'g>,
    k: Var<'g>,
    v: Var<'g>,
    tau: Option<Var<'g>>,
    delta: Option<Var<'g>>,
) -> Result<(Var<'g>, Var<'g>)> {
    let qs = q.shape();
    let b = qs[0];
    let dh = qs[3];
    let tk = k.shape()[2];
    let mut scores = q.bmm(k.transpose_last2());
    if let Some(tau) = tau {
        scores = scores.mul(tau.reshape(&[b, 1, 1, 1]));
    }
    if let Some(delta) = delta {
        scores = scores.add(delta.reshape(&[b, 1, 1, tk]));
    }
    scores = scores.scale(1.0 / (dh as f64).sqrt());
    if !scores.value().all_finite() {
        return Err(Error::Numerical("non-finite attention scores".into()));
    }
    let attn = scores.softmax();
    Ok((attn.bmm(v), attn))
}

fn split_heads(x: Var<'_>, heads: usize) -> Var<'_> {
    let s = x.shape();
    x.reshape(&[s[0], s[1], heads, s[2] / heads]).permute(&[0, 2, 1, 3])
}

fn merge_heads(x: Var<'_>) -> Var<'_> {
    let s = x.shape();
    x.permute(&[0, 2, 1, 3]).reshape(&[s[0], s[2], s[1] * s[3]])
}

fn attention_specs(s: &mut SpecList, name: &str, d: usize) {
    for proj in ["q", "k", "v", "o"] {
        s.linear(&format!("{name}.{proj}"), d, d);
    }
}

/// Multi-head attention of `xq` `[B, Tq, d]` over `xkv` `[B, Tk, d]`.
pub fn multi_head_attention<'g>(
    p: &Bound<'g>,
    name: &str,
    xq: Var<'g>,
    xkv: Var<'g>,
    heads: usize,
    tau: Option<Var<'g>>,
    delta: Option<Var<'g>>,
) -> Result<Var<'g>> {
    let q = split_heads(p.linear(&format!("{name}.q"), xq), heads);
    let k = split_heads(p.linear(&format!("{name}.k"), xkv), heads);
    let v = split_heads(p.linear(&format!("{name}.v"), xkv), heads);
    let (out, _) = destationary_attention(q, k, v, tau, delta)?;
    Ok(p.linear(&format!("{name}.o"), merge_heads(out)))
}

fn ffn<'g>(p: &Bound<'g>, name: &str, x: Var<'g>) -> Var<'g> {
    let h = p.linear(&format!("{name}.fc1"), x).gelu();
    p.linear(&format!("{name}.fc2"), h)
}

/// Fixed sinusoidal position table, `[T, d]`.
pub fn positional_encoding(t: usize, d: usize) -> Tensor {
    Tensor::from_fn(&[t, d], |i| {
        let (pos, j) = ((i / d) as f64, i % d);
        let freq = 10000f64.powf(-((j / 2 * 2) as f64) / d as f64);
        if j % 2 == 0 {
            (pos * freq).sin()
        } else {
            (pos * freq).cos()
        }
    })
}

pub fn temporal_specs(cfg: &VidNeXtConfig) -> Vec<ParamSpec> {
    let d = cfg.embed_dim;
    let mut s = SpecList(Vec::new());
    s.linear("temporal.embed", d, d);
    for l in 0..cfg.n_enc_layers {
        let n = format!("temporal.enc{l}");
        attention_specs(&mut s, &format!("{n}.attn"), d);
        s.norm(&format!("{n}.norm1"), d);
        s.linear(&format!("{n}.ffn.fc1"), d, cfg.ffn_dim);
        s.linear(&format!("{n}.ffn.fc2"), cfg.ffn_dim, d);
        s.norm(&format!("{n}.norm2"), d);
    }
    s.push("temporal.query".into(), &[1, 1, d], InitKind::Normal(0.02));
    for l in 0..cfg.n_dec_layers {
        let n = format!("temporal.dec{l}");
        attention_specs(&mut s, &format!("{n}.self_attn"), d);
        s.norm(&format!("{n}.norm1"), d);
        attention_specs(&mut s, &format!("{n}.cross_attn"), d);
        s.norm(&format!("{n}.norm2"), d);
        s.linear(&format!("{n}.ffn.fc1"), d, cfg.ffn_dim);
        s.linear(&format!("{n}.ffn.fc2"), cfg.ffn_dim, d);
        s.norm(&format!("{n}.norm3"), d);
    }
    s.linear("temporal.out", d, d);
    if cfg.temporal_kind == TemporalKind::NonStationary {
        projector_specs(&mut s, "temporal.tau", cfg, 1);
        projector_specs(&mut s, "temporal.delta", cfg, cfg.seq_len);
    }
    s.0
}

/// Encoder over the `T` stationarized tokens, then a decoder whose single
/// learned query attends to them. Returns `y'` as `[B, 1, d]`.
pub fn nst_encode_decode<'g>(
    p: &Bound<'g>,
    cfg: &VidNeXtConfig,
    x_prime: Var<'g>,
    factors: Option<DeStationaryFactors<'g>>,
) -> Result<Var<'g>> {
    let s = x_prime.shape();
    let (b, t, d) = (s[0], s[1], s[2]);
    if t != cfg.seq_len || d != cfg.embed_dim {
        return Err(Error::Shape(format!("series [{b}, {t}, {d}] vs configured T={} d={}", cfg.seq_len, cfg.embed_dim)));
    }
    let tau = factors.map(|f| f.tau);
    let delta = factors.map(|f| f.delta);
    let pe = x_prime.graph().constant(positional_encoding(t, d));
    let mut h = p.linear("temporal.embed", x_prime).add(pe);
    for l in 0..cfg.n_enc_layers {
        let n = format!("temporal.enc{l}");
        let a = multi_head_attention(p, &format!("{n}.attn"), h, h, cfg.n_heads, tau, delta)?;
        h = p.norm(&format!("{n}.norm1"), h.add(a), NORM_EPS);
        let f = ffn(p, &format!("{n}.ffn"), h);
        h = p.norm(&format!("{n}.norm2"), h.add(f), NORM_EPS);
    }
    let mut q = p.get("temporal.query").broadcast_to(&[b, 1, d]);
    for l in 0..cfg.n_dec_layers {
        let n = format!("temporal.dec{l}");
        let a = multi_head_attention(p, &format!("{n}.self_attn"), q, q, cfg.n_heads, tau, None)?;
        q = p.norm(&format!("{n}.norm1"), q.add(a), NORM_EPS);
        let c = multi_head_attention(p, &format!("{n}.cross_attn"), q, h, cfg.n_heads, tau, delta)?;
        q = p.norm(&format!("{n}.norm2"), q.add(c), NORM_EPS);
        let f = ffn(p, &format!("{n}.ffn"), q);
        q = p.norm(&format!("{n}.norm3"), q.add(f), NORM_EPS);
    }
    Ok(p.linear("temporal.out", q))
}
