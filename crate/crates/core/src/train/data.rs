use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tasks::LabeledSegment;
use crate::tensor::Tensor;
use crate::video::{
    augment_window, center_params, sample_augment, AugmentConfig, CanonicalFormat, CanonicalStore, FrameStack,
    JitterParams, JitterRanges, JitterSpace, WINDOW_LEN,
};

/// Reads segment windows from a canonical store and turns them into model
/// input of `out_size × out_size` frames.
pub struct SegmentLoader<'a> {
    pub store: &'a CanonicalStore,
    pub out_size: usize,
}

impl<'a> SegmentLoader<'a> {
    pub fn new(store: &'a CanonicalStore, out_size: usize) -> Self {
        Self { store, out_size }
    }

    /// Error naming every segment whose clip is missing or too short.
    pub fn check(&self, segments: &[LabeledSegment]) -> Result<()> {
        let mut missing: Vec<String> = Vec::new();
        for s in segments {
            let ok = self.store.contains(&s.video_id)
                && self.store.meta(&s.video_id).is_ok_and(|m| s.start_frame + WINDOW_LEN <= m.n_frames);
            if !ok && !missing.contains(&s.video_id) {
                missing.push(s.video_id.clone());
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Missing(format!("segments missing on disk for videos {missing:?}")))
        }
    }

    fn augment_config(&self, window: &FrameStack) -> AugmentConfig {
        let format = CanonicalFormat { width: window.w, height: window.h, fps: crate::video::CANONICAL_FPS };
        AugmentConfig::for_format(&format, self.out_size)
    }

    /// Window for `seg`. With an `rng`, draws a random crop (and a flip when
    /// allowed); without, takes the centre crop. Duplicated segments get
    /// their photometric jitter either way.
    pub fn window(&self, seg: &LabeledSegment, rng: Option<&mut ChaCha8Rng>, allow_flip: bool) -> Result<FrameStack> {
        let raw = self.store.window(&seg.video_id, seg.start_frame, WINDOW_LEN)?;
        let cfg = self.augment_config(&raw);
        let mut params = match rng {
            Some(r) => sample_augment(r, &cfg, raw.h, raw.w, allow_flip),
            None => center_params(&cfg, raw.h, raw.w),
        };
        if let Some(seed) = seg.jitter_seed {
            let mut jr = ChaCha8Rng::seed_from_u64(seed);
            params.jitter = Some(JitterParams::sample(&mut jr, &JitterRanges::standard(), JitterSpace::Normalized));
        }
        Ok(augment_window(&raw, &params, &cfg, JitterSpace::Normalized))
    }

    /// `[B, T, S, S, 3]` input for a batch.
    pub fn batch(
        &self,
        segments: &[&LabeledSegment],
        mut rng: Option<&mut ChaCha8Rng>,
        allow_flip: bool,
    ) -> Result<Tensor> {
        let windows: Vec<FrameStack> =
            segments.iter().map(|s| self.window(s, rng.as_deref_mut(), allow_flip)).collect::<Result<_>>()?;
        Ok(stack_windows(&windows))
    }
}

pub fn stack_windows(windows: &[FrameStack]) -> Tensor {
    let (t, h, w) = windows.first().map_or((0, 0, 0), |f| (f.t, f.h, f.w));
    let data: Vec<f64> = windows.iter().flat_map(|f| f.data.iter().map(|&v| v as f64)).collect();
    Tensor::new(vec![windows.len(), t, h, w, 3], data)
}
