//! Small stores and models shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{HeadConfig, ModelVariant, VidNeXt, VidNeXtConfig};
use crate::tasks::{DatasetReport, Label, LabeledSegment, TaskDataset, TaskId};
use crate::video::{CanonicalClip, CanonicalStore, ChannelStats, FrameStack};

/// A narrow model on 16-pixel frames; fast enough for unit tests.
pub fn small_model(variant: ModelVariant, tasks: &[TaskId], seed: u64) -> VidNeXt {
    let mut c = VidNeXtConfig::tiny(variant, tasks[0]);
    c.encoder_dims = vec![4, 8];
    c.encoder_depths = vec![1, 1];
    c.image_size = 16;
    c.embed_dim = 16;
    c.ffn_dim = 16;
    c.projector_hidden = 8;
    c.head_hidden = 8;
    c.n_heads = 2;
    c.n_enc_layers = 1;
    c.heads = tasks.iter().map(|&t| HeadConfig::for_task(t)).collect();
    VidNeXt::new(c, seed).unwrap()
}

/// Store of `n` random 32×18 clips of `frames` frames. Even-numbered clips
/// are brighter than odd ones.
pub fn random_store(dir: &std::path::Path, n: usize, frames: usize) -> CanonicalStore {
    let store = CanonicalStore::open(dir).unwrap();
    let (h, w) = (18, 32);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let base = if i % 2 == 0 { 0.8 } else { -0.8 };
        let data = (0..frames * h * w * 3).map(|_| base + rng.gen_range(-0.5f32..0.5)).collect();
        let clip = CanonicalClip {
            video_id: format!("v{i}"),
            frames: FrameStack::new(frames, h, w, data).unwrap(),
            fps: 30.0,
            zscore_stats: [ChannelStats { mean: 0.0, std: 1.0 }; 3],
            duration: frames as f64 / 30.0,
            provenance: Vec::new(),
        };
        store.save(&clip).unwrap();
    }
    store
}

/// Two windows per clip; the label is the clip parity (class) or a
/// parity-dependent number of seconds (regression).
pub fn parity_dataset(task: TaskId, train: std::ops::Range<usize>, test: std::ops::Range<usize>) -> TaskDataset {
    let seg = |i: usize, start: usize| LabeledSegment {
        video_id: format!("v{i}"),
        start_frame: start,
        label: match task.spec().classes {
            Some(_) => Label::Class(i % 2),
            None => Label::Seconds(0.5 + (i % 2) as f64),
        },
        jitter_seed: None,
    };
    let windows = |r: std::ops::Range<usize>| r.flat_map(|i| [seg(i, 0), seg(i, 15)]).collect::<Vec<_>>();
    TaskDataset {
        spec: task.spec(),
        split_seed: 0,
        train: windows(train),
        test: windows(test),
        report: DatasetReport::default(),
    }
}
