use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::{Label, LabeledSegment, TaskDataset};
use crate::train::{stack_windows, Checkpoint, SegmentLoader};
use crate::video::CanonicalStore;

/// Shared representations `y` of sampled segments, one row per id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    /// `video_id@start_frame`.
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub dim: usize,
    /// Row-major `[n, dim]`.
    pub matrix: Vec<f64>,
}

impl Embeddings {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// 2-D neighbour embedding (exact t-SNE below 500 rows, Barnes-Hut
    /// above), started from the PCA projection so the result is repeatable.
    pub fn tsne_2d(&self, epochs: usize) -> Vec<[f64; 2]> {
        let n = self.len();
        if n < 4 {
            return pca_2d(&self.matrix, self.dim);
        }
        let rows: Vec<&[f64]> = self.matrix.chunks(self.dim).collect();
        let init: Vec<f64> = pca_2d(&self.matrix, self.dim)
            .iter()
            .flat_map(|p| [p[0] * 1e-4, p[1] * 1e-4])
            .collect();
        let dist = |a: &&[f64], b: &&[f64]| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        let perplexity = ((n - 1) as f64 / 3.0).min(30.0).max(1.0);
        let mut t = bhtsne::tSNE::<f64, &[f64], 2>::new(&rows);
        t.perplexity(perplexity).epochs(epochs).initial_embedding(init);
        if n < 500 {
            t.exact(dist);
        } else {
            t.barnes_hut(0.5, |a, b| dist(a, b).sqrt());
        }
        t.embedding().chunks(2).map(|p| [p[0], p[1]]).collect()
    }
}

/// Representations for `n` segments drawn without replacement (seeded) from
/// the dataset's train and test splits.
pub fn export_embeddings(
    checkpoint: &Checkpoint,
    dataset: &TaskDataset,
    store: &CanonicalStore,
    n: usize,
    seed: u64,
) -> Result<Embeddings> {
    let all: Vec<&LabeledSegment> = dataset.train.iter().chain(&dataset.test).collect();
    if n > all.len() {
        return Err(Error::Invalid(format!("requested {n} samples from a dataset of {}", all.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<&LabeledSegment> = sample(&mut rng, all.len(), n).into_iter().map(|i| all[i]).collect();
    let model = checkpoint.best_model();
    let loader = SegmentLoader::new(store, model.config.image_size);
    let owned: Vec<LabeledSegment> = picked.iter().map(|s| (*s).clone()).collect();
    loader.check(&owned)?;
    let mut matrix = Vec::with_capacity(n * model.config.embed_dim);
    for chunk in picked.chunks(checkpoint.train_config.batch_size.max(1)) {
        let windows = chunk.iter().map(|s| loader.window(s, None, false)).collect::<Result<Vec<_>>>()?;
        let inf = model.infer(&stack_windows(&windows))?;
        matrix.extend_from_slice(inf.y.data());
    }
    Ok(Embeddings {
        ids: picked.iter().map(|s| format!("{}@{}", s.video_id, s.start_frame)).collect(),
        labels: picked.iter().map(|s| s.label).collect(),
        dim: model.config.embed_dim,
        matrix,
    })
}

/// Projection onto the top two principal components (power iteration with
/// deflation on the covariance).
pub fn pca_2d(matrix: &[f64], dim: usize) -> Vec<[f64; 2]> {
    let n = if dim == 0 { 0 } else { matrix.len() / dim };
    if n == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; dim];
    for row in matrix.chunks(dim) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x / n as f64);
    }
    let centred: Vec<f64> = matrix.chunks(dim).flat_map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect::<Vec<_>>()).collect();
    let mut cov = vec![0.0; dim * dim];
    for row in centred.chunks(dim) {
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += row[i] * row[j];
            }
        }
    }
    let scale = (0..dim).map(|i| cov[i * dim + i]).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut comps: Vec<Vec<f64>> = Vec::new();
    for k in 0..2 {
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + ((i * 7 + k * 3) % 5) as f64 * 0.1).collect();
        for _ in 0..200 {
            let mut w: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| cov[i * dim + j] * v[j]).sum()).collect();
            // A degenerate direction leaves only rounding noise; keep the
            // current (orthogonal) vector then.
            if deflate(&mut w, &comps) <= 1e-12 * scale {
                deflate(&mut v, &comps);
                break;
            }
            deflate(&mut w, &comps);
            v = w;
        }
        comps.push(v);
    }
    centred
        .chunks(dim)
        .map(|r| {
            let p = |c: &Vec<f64>| r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [p(&comps[0]), p(&comps[1])]
        })
        .collect()
}

/// Remove the components along `basis` and normalize; returns the norm
/// before normalizing.
fn deflate(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for c in basis {
        let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Mean silhouette coefficient with Euclidean distance. Points alone in
/// their cluster score 0.
pub fn silhouette_score(matrix: &[f64], dim: usize, clusters: &[usize]) -> Result<f64> {
    let n = clusters.len();
    if n * dim != matrix.len() || n == 0 {
        return Err(Error::Shape(format!("{} values for {n} points of width {dim}", matrix.len())));
    }
    let k = clusters.iter().max().map_or(0, |m| m + 1);
    let row = |i: usize| &matrix[i * dim..(i + 1) * dim];
    let dist = |i: usize, j: usize| row(i).iter().zip(row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if j != i {
                sums[clusters[j]] += dist(i, j);
                counts[clusters[j]] += 1;
            }
        }
        let own = clusters[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k).filter(|&c| c != own && counts[c] > 0).map(|c| sums[c] / counts[c] as f64).fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b).max(f64::MIN_POSITIVE);
        }
    }
    Ok(total / n as f64)
}
