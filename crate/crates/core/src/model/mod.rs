//! VidNeXt: a per-frame convolutional encoder followed by a non-stationary
//! temporal transformer, plus the two ablation variants (vanilla temporal
//! transformer, residual-network frame encoder).

mod encoder;
mod params;
mod temporal;
mod vidnext;


pub use encoder::{encode_frames, encoder_specs};
pub use params::{Bound, InitKind, ParamSpec, ParamStore};
pub use temporal::{
    denormalize, destationary_attention, multi_head_attention, nst_encode_decode, positional_encoding, stationarize,
    tau_delta_projector, temporal_specs, DeStationaryFactors, Stationarized,
};
pub use vidnext::{Forward, Inference, VidNeXt};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::{TaskId, TaskSpec};
use crate::video::WINDOW_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    ConvnextStyle,
    ResnetStyle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalKind {
    NonStationary,
    Vanilla,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Tiny,
    Base,
    Custom,
}

/// The three architectures compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    /// ConvNeXt-style encoder with the non-stationary transformer.
    Vidnext,
    /// ConvNeXt-style encoder with a vanilla transformer.
    ConvnextVt,
    /// Residual encoder with the non-stationary transformer.
    ResnetNst,
}

impl ModelVariant {
    pub fn kinds(self) -> (EncoderKind, TemporalKind) {
        match self {
            ModelVariant::Vidnext => (EncoderKind::ConvnextStyle, TemporalKind::NonStationary),
            ModelVariant::ConvnextVt => (EncoderKind::ConvnextStyle, TemporalKind::Vanilla),
            ModelVariant::ResnetNst => (EncoderKind::ResnetStyle, TemporalKind::NonStationary),
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vidnext" => Ok(ModelVariant::Vidnext),
            "convnext-vt" => Ok(ModelVariant::ConvnextVt),
            "resnet-nst" => Ok(ModelVariant::ResnetNst),
            _ => Err(Error::Invalid(format!("unknown model {s:?} (vidnext, convnext-vt, resnet-nst)"))),
        }
    }
}

/// One output head attached to the shared representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub task: TaskId,
    pub output_size: usize,
}

impl HeadConfig {
    pub fn for_task(task: TaskId) -> Self {
        Self { task, output_size: task.spec().output_size() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VidNeXtConfig {
    pub encoder_kind: EncoderKind,
    pub encoder_preset: Preset,
    pub temporal_kind: TemporalKind,
    /// Side length of the square frames fed to the encoder.
    pub image_size: usize,
    pub encoder_dims: Vec<usize>,
    pub encoder_depths: Vec<usize>,
    /// Initial value of the per-channel residual scale in ConvNeXt blocks.
    pub layer_scale_init: f64,
    /// Width of the frame embedding and of the transformer.
    pub embed_dim: usize,
    pub seq_len: usize,
    pub pred_len: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub projector_hidden: usize,
    pub head_hidden: usize,
    pub heads: Vec<HeadConfig>,
    /// Floor on the standard deviation used when stationarizing.
    pub eps: f64,
}

impl VidNeXtConfig {
    /// Desk-scale preset: narrow three-stage encoder, d = 128.
    pub fn tiny(variant: ModelVariant, task: TaskId) -> Self {
        let (encoder_kind, temporal_kind) = variant.kinds();
        Self {
            encoder_kind,
            encoder_preset: Preset::Tiny,
            temporal_kind,
            image_size: 32,
            encoder_dims: vec![16, 32, 64],
            encoder_depths: vec![1, 1, 1],
            layer_scale_init: 0.1,
            embed_dim: 128,
            seq_len: WINDOW_LEN,
            pred_len: 1,
            n_enc_layers: 2,
            n_dec_layers: 1,
            n_heads: 4,
            ffn_dim: 256,
            projector_hidden: 64,
            head_hidden: 64,
            heads: vec![HeadConfig::for_task(task)],
            eps: 1e-5,
        }
    }

    /// ConvNeXt-base shaped encoder (or ResNet-18 shaped for the ablation), d = 1024.
    pub fn base(variant: ModelVariant, task: TaskId) -> Self {
        let (encoder_kind, temporal_kind) = variant.kinds();
        let (dims, depths) = match encoder_kind {
            EncoderKind::ConvnextStyle => (vec![128, 256, 512, 1024], vec![3, 3, 27, 3]),
            EncoderKind::ResnetStyle => (vec![64, 128, 256, 512], vec![2, 2, 2, 2]),
        };
        Self {
            encoder_kind,
            encoder_preset: Preset::Base,
            temporal_kind,
            image_size: 224,
            encoder_dims: dims,
            encoder_depths: depths,
            layer_scale_init: 1e-6,
            embed_dim: 1024,
            seq_len: WINDOW_LEN,
            pred_len: 1,
            n_enc_layers: 2,
            n_dec_layers: 1,
            n_heads: 4,
            ffn_dim: 4096,
            projector_hidden: 64,
            head_hidden: 256,
            heads: vec![HeadConfig::for_task(task)],
            eps: 1e-5,
        }
    }

    pub fn preset(preset: Preset, variant: ModelVariant, task: TaskId) -> Result<Self> {
        match preset {
            Preset::Tiny => Ok(Self::tiny(variant, task)),
            Preset::Base => Ok(Self::base(variant, task)),
            Preset::Custom => Err(Error::Invalid("custom configs are built field by field".into())),
        }
    }

    /// Replace the heads with one per task, for the multi-task variant.
    pub fn with_all_heads(mut self) -> Self {
        self.heads = TaskId::ALL.iter().map(|&t| HeadConfig::for_task(t)).collect();
        self
    }

    pub fn head(&self, task: TaskId) -> Result<&HeadConfig> {
        self.heads
            .iter()
            .find(|h| h.task == task)
            .ok_or_else(|| Error::Invalid(format!("model has no head for task {}", task.slug())))
    }

    /// Check that a head matches the task's output contract.
    pub fn check_head(&self, spec: &TaskSpec) -> Result<()> {
        let h = self.head(spec.task)?;
        if h.output_size != spec.output_size() {
            return Err(Error::Invalid(format!(
                "head for {} emits {} values, task needs {}",
                spec.task.slug(),
                h.output_size,
                spec.output_size()
            )));
        }
        Ok(())
    }

    /// Downsampling factor between input frames and the last feature map.
    pub fn encoder_stride(&self) -> usize {
        let stages = self.encoder_dims.len();
        match self.encoder_kind {
            EncoderKind::ConvnextStyle => 4 << (stages - 1),
            EncoderKind::ResnetStyle => 2 << (stages - 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.n_heads == 0 || self.embed_dim % self.n_heads != 0 {
            return bad(format!("embed_dim {} not divisible by n_heads {}", self.embed_dim, self.n_heads));
        }
        if self.pred_len != 1 {
            return bad(format!("pred_len must be 1, got {}", self.pred_len));
        }
        if self.seq_len == 0 {
            return bad("seq_len must be positive".into());
        }
        if self.encoder_dims.is_empty() || self.encoder_dims.len() != self.encoder_depths.len() {
            return bad("encoder_dims and encoder_depths must be non-empty and the same length".into());
        }
        if self.encoder_dims.contains(&0) || self.ffn_dim == 0 || self.projector_hidden == 0 || self.head_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.image_size == 0 || self.image_size % self.encoder_stride() != 0 {
            return bad(format!(
                "image_size {} must be a positive multiple of the encoder stride {}",
                self.image_size,
                self.encoder_stride()
            ));
        }
        if self.heads.is_empty() {
            return bad("at least one head is required".into());
        }
        for (i, h) in self.heads.iter().enumerate() {
            if self.heads[..i].iter().any(|o| o.task == h.task) {
                return bad(format!("duplicate head for task {}", h.task.slug()));
            }
            if h.output_size == 0 {
                return bad(format!("head for {} has zero outputs", h.task.slug()));
            }
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive".into());
        }
        Ok(())
    }

    /// Closed-form parameter count of the architecture.
    pub fn param_count_formula(&self) -> usize {
        let d = self.embed_dim;
        let dims = &self.encoder_dims;
        let last = *dims.last().unwrap();
        let ln = |c: usize| 2 * c;
        let lin = |i: usize, o: usize| i * o + o;
        let mut enc = 0;
        match self.encoder_kind {
            EncoderKind::ConvnextStyle => {
                enc += 4 * 4 * 3 * dims[0] + dims[0] + ln(dims[0]);
                for (s, (&c, &depth)) in dims.iter().zip(&self.encoder_depths).enumerate() {
                    if s > 0 {
                        enc += ln(dims[s - 1]) + 2 * 2 * dims[s - 1] * c + c;
                    }
                    let block = 7 * 7 * c + c + ln(c) + lin(c, 4 * c) + lin(4 * c, c) + c;
                    enc += depth * block;
                }
                enc += ln(last);
            }
            EncoderKind::ResnetStyle => {
                enc += 3 * 3 * 3 * dims[0] + ln(dims[0]);
                let mut cin = dims[0];
                for (s, (&c, &depth)) in dims.iter().zip(&self.encoder_depths).enumerate() {
                    for b in 0..depth {
                        let inp = if b == 0 { cin } else { c };
                        enc += 9 * inp * c + ln(c) + 9 * c * c + ln(c);
                        if b == 0 && (s > 0 || inp != c) {
                            enc += inp * c + ln(c);
                        }
                    }
                    cin = c;
                }
            }
        }
        if last != d {
            enc += lin(last, d);
        }
        let attn = 4 * lin(d, d);
        let ffn = lin(d, self.ffn_dim) + lin(self.ffn_dim, d);
        let mut temporal = lin(d, d); // input embedding
        temporal += self.n_enc_layers * (attn + ln(d) + ffn + ln(d));
        temporal += d; // decoder query token
        temporal += self.n_dec_layers * (2 * attn + 3 * ln(d) + ffn);
        temporal += lin(d, d); // decoder output projection
        if self.temporal_kind == TemporalKind::NonStationary {
            let h = self.projector_hidden;
            let projector = |out: usize| self.seq_len + 2 * d * h + h + lin(h, out);
            temporal += projector(1) + projector(self.seq_len);
        }
        let heads: usize = self.heads.iter().map(|hc| lin(d, self.head_hidden) + lin(self.head_hidden, hc.output_size)).sum();
        enc + temporal + heads
    }
}
