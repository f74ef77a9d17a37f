use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Video-level train/test partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratio: f64,
    pub train_video_ids: Vec<String>,
    pub test_video_ids: Vec<String>,
}

impl SplitManifest {
    pub fn contains_train(&self, id: &str) -> bool {
        self.train_video_ids.iter().any(|v| v == id)
    }

    pub fn len(&self) -> usize {
        self.train_video_ids.len() + self.test_video_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// SHA-256 over the serialized manifest.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("split serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn shuffled(ids: &[String], seed: u64) -> Vec<String> {
    let mut v = ids.to_vec();
    v.sort();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

/// Random video-level split with `round(ratio * n)` training videos.
pub fn make_split(video_ids: &[String], ratio: f64, seed: u64) -> Result<SplitManifest> {
    make_pooled_split(&[video_ids.to_vec()], ratio, seed)
}

/// Split each pool separately at the same ratio and concatenate, so every
/// pool keeps the ratio on its own.
pub fn make_pooled_split(pools: &[Vec<String>], ratio: f64, seed: u64) -> Result<SplitManifest> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Invalid(format!("split ratio {ratio} outside [0, 1]")));
    }
    let total: usize = pools.iter().map(Vec::len).sum();
    if total < 2 {
        return Err(Error::Invalid(format!("need at least 2 videos to split, got {total}")));
    }
    let mut seen = std::collections::HashSet::new();
    for id in pools.iter().flatten() {
        if !seen.insert(id) {
            return Err(Error::Invalid(format!("video {id:?} listed twice")));
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, pool) in pools.iter().enumerate() {
        let ids = shuffled(pool, seed.wrapping_add(i as u64));
        let n_train = (ratio * ids.len() as f64).round() as usize;
        train.extend_from_slice(&ids[..n_train]);
        test.extend_from_slice(&ids[n_train..]);
    }
    Ok(SplitManifest { seed, ratio, train_video_ids: train, test_video_ids: test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i:05}")).collect()
    }

    #[test]
    fn paper_sizes() {
        let s = make_split(&ids(3000), 0.7, 7).unwrap();
        assert_eq!((s.train_video_ids.len(), s.test_video_ids.len()), (2100, 900));
        let s = make_split(&ids(1000), 0.7, 7).unwrap();
        assert_eq!((s.train_video_ids.len(), s.test_video_ids.len()), (700, 300));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let a = make_split(&ids(50), 0.7, 3).unwrap();
        let b = make_split(&ids(50), 0.7, 3).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert!(a.train_video_ids.iter().all(|v| !a.test_video_ids.contains(v)));
        let c = make_split(&ids(50), 0.7, 4).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn pooled_split_keeps_ratio_per_pool() {
        let collision: Vec<String> = (0..1000).map(|i| format!("c{i}")).collect();
        let safe: Vec<String> = (0..2000).map(|i| format!("s{i}")).collect();
        let s = make_pooled_split(&[collision, safe], 0.7, 1).unwrap();
        assert_eq!(s.train_video_ids.len(), 2100);
        assert_eq!(s.train_video_ids.iter().filter(|v| v.starts_with('c')).count(), 700);
    }

    #[test]
    fn rejects_tiny_and_duplicate_input() {
        assert!(make_split(&ids(1), 0.7, 0).is_err());
        assert!(make_split(&["a".into(), "a".into()], 0.7, 0).is_err());
    }
}
