use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tasks::{TargetKind, TaskId};
use crate::tensor::Tensor;

use super::encoder::{encode_frames, encoder_specs};
use super::params::{Bound, ParamSpec, ParamStore, SpecList};
use super::temporal::{
    denormalize, nst_encode_decode, stationarize, tau_delta_projector, temporal_specs, DeStationaryFactors,
    Stationarized,
};
use super::{TemporalKind, VidNeXtConfig};

/// A configured model and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct VidNeXt {
    pub config: VidNeXtConfig,
    pub params: ParamStore,
}

/// Intermediate values of one forward pass.
pub struct Forward<'g> {
    /// Raw per-frame embeddings `[B, T, d]`.
    pub x: Var<'g>,
    pub stationarized: Stationarized<'g>,
    pub factors: Option<DeStationaryFactors<'g>>,
    /// Decoder output before de-normalization, `[B, 1, d]`.
    pub y_prime: Var<'g>,
    /// Shared representation `[B, d]`.
    pub y: Var<'g>,
    /// Head outputs: `[B, C]` logits or `[B]` regression values.
    pub outputs: BTreeMap<TaskId, Var<'g>>,
}

impl<'g> Forward<'g> {
    pub fn output(&self, task: TaskId) -> Result<Var<'g>> {
        self.outputs
            .get(&task)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("model has no head for task {}", task.slug())))
    }
}

/// Plain tensors from a gradient-free forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub y: Tensor,
    pub outputs: BTreeMap<TaskId, Tensor>,
    pub tau: Option<Tensor>,
    pub delta: Option<Tensor>,
}

fn head_prefix(task: TaskId) -> String {
    format!("heads.{}", task.slug())
}

impl VidNeXt {
    /// Every parameter of `config`, in initialization order.
    pub fn specs(config: &VidNeXtConfig) -> Vec<ParamSpec> {
        let mut all = encoder_specs(config);
        all.extend(temporal_specs(config));
        let mut s = SpecList(Vec::new());
        for h in &config.heads {
            let p = head_prefix(h.task);
            s.linear(&format!("{p}.fc1"), config.embed_dim, config.head_hidden);
            s.linear(&format!("{p}.fc2"), config.head_hidden, h.output_size);
        }
        all.extend(s.0);
        all
    }

    pub fn new(config: VidNeXtConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ParamStore::initialize(&Self::specs(&config), &mut ChaCha8Rng::seed_from_u64(seed))?;
        Ok(Self { config, params })
    }

    pub fn from_parts(config: VidNeXtConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        params.check_against(&Self::specs(&config))?;
        Ok(Self { config, params })
    }

    /// Names of the parameters belonging to the output heads.
    pub fn is_head_param(name: &str) -> bool {
        name.starts_with("heads.")
    }

    pub fn bind<'g>(&self, g: &'g Graph, trainable: impl Fn(&str) -> bool) -> Bound<'g> {
        self.params.bind(g, trainable)
    }

    /// Full forward pass on `[B, T, H, W, 3]` frames.
    pub fn forward<'g>(&self, p: &Bound<'g>, frames: Var<'g>) -> Result<Forward<'g>> {
        let cfg = &self.config;
        let t = frames.shape().get(1).copied().unwrap_or(0);
        if t != cfg.seq_len {
            return Err(Error::Shape(format!("clip has {t} frames, model expects {}", cfg.seq_len)));
        }
        let x = encode_frames(p, cfg, frames)?;
        let st = stationarize(x, cfg.eps);
        let factors = match cfg.temporal_kind {
            TemporalKind::NonStationary => Some(tau_delta_projector(p, x, st.mu, st.sigma)),
            TemporalKind::Vanilla => None,
        };
        let y_prime = nst_encode_decode(p, cfg, st.x_prime, factors)?;
        let b = y_prime.shape()[0];
        let y = denormalize(y_prime, st.mu, st.sigma).reshape(&[b, cfg.embed_dim]);
        let mut outputs = BTreeMap::new();
        for h in &cfg.heads {
            let prefix = head_prefix(h.task);
            let hid = p.linear(&format!("{prefix}.fc1"), y).gelu();
            let mut out = p.linear(&format!("{prefix}.fc2"), hid);
            if h.task.spec().target_kind == TargetKind::Regression {
                out = out.reshape(&[b]);
            }
            outputs.insert(h.task, out);
        }
        Ok(Forward { x, stationarized: st, factors, y_prime, y, outputs })
    }

    pub fn infer(&self, frames: &Tensor) -> Result<Inference> {
        let g = Graph::new();
        let p = self.bind(&g, |_| false);
        let f = self.forward(&p, g.constant(frames.clone()))?;
        let outputs = f.outputs.iter().map(|(k, v)| (*k, v.value().clone())).collect();
        let tau = f.factors.map(|x| x.tau.value().clone());
        let delta = f.factors.map(|x| x.delta.value().clone());
        let y = f.y.value().clone();
        Ok(Inference { y, outputs, tau, delta })
    }
}
