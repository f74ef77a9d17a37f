use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn check_lengths(n_pred: usize, n_true: usize) -> Result<()> {
    if n_pred == 0 {
        return Err(Error::Invalid("metrics need at least one prediction".into()));
    }
    if n_pred != n_true {
        return Err(Error::Shape(format!("{n_pred} predictions for {n_true} labels")));
    }
    Ok(())
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self { counts: vec![vec![0; n_classes]; n_classes] }
    }

    pub fn from_pairs(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<Self> {
        check_lengths(predictions.len(), labels.len())?;
        let mut m = Self::new(n_classes);
        for (&p, &t) in predictions.iter().zip(labels) {
            if p >= n_classes || t >= n_classes {
                return Err(Error::Invalid(format!("class index outside 0..{n_classes}: predicted {p}, true {t}")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Add another shard's counts.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes() != self.n_classes() {
            return Err(Error::Shape(format!("merging {} with {} classes", other.n_classes(), self.n_classes())));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.n_classes()).map(|c| self.counts[c][c]).sum();
        correct as f64 / self.total().max(1) as f64
    }

    pub fn per_class(&self) -> Vec<ClassScores> {
        let n = self.n_classes();
        (0..n)
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let fn_ = (0..n).filter(|&p| p != c).map(|p| self.counts[c][p]).sum::<u64>() as f64;
                let fp = (0..n).filter(|&t| t != c).map(|t| self.counts[t][c]).sum::<u64>() as f64;
                let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
                ClassScores {
                    precision: ratio(tp, tp + fp),
                    recall: ratio(tp, tp + fn_),
                    f1: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
                    support: (tp + fn_) as u64,
                }
            })
            .collect()
    }

    /// Classes that occur as a label or a prediction.
    pub fn present(&self) -> Vec<usize> {
        let n = self.n_classes();
        (0..n).filter(|&c| (0..n).any(|k| self.counts[c][k] > 0 || self.counts[k][c] > 0)).collect()
    }

    /// Unweighted mean F1 over the present classes.
    pub fn macro_f1(&self) -> f64 {
        let scores = self.per_class();
        let present = self.present();
        if present.is_empty() {
            return 0.0;
        }
        present.iter().map(|&c| scores[c].f1).sum::<f64>() / present.len() as f64
    }
}

fn n_classes_of(predictions: &[usize], labels: &[usize]) -> usize {
    predictions.iter().chain(labels).max().map_or(0, |m| m + 1)
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    Ok(ConfusionMatrix::from_pairs(predictions, labels, n_classes_of(predictions, labels))?.accuracy())
}

pub fn macro_f1(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    Ok(ConfusionMatrix::from_pairs(predictions, labels, n_classes_of(predictions, labels))?.macro_f1())
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), targets.len())?;
    Ok(predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / predictions.len() as f64)
}

/// Index of the largest entry of each row of a row-major `[n, c]` matrix;
/// ties go to the lowest index.
pub fn argmax_rows(values: &[f64], c: usize) -> Vec<usize> {
    values
        .chunks(c.max(1))
        .map(|row| row.iter().enumerate().fold(0, |best, (i, &v)| if v > row[best] { i } else { best }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 1, 0];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(macro_f1(&y, &y).unwrap(), 1.0);
    }

    #[test]
    fn two_thirds_fixture() {
        // class 0: TP 1, FP 1, FN 0; class 1: TP 1, FP 0, FN 1.
        let labels = [0, 1, 1];
        let preds = [0, 0, 1];
        let m = ConfusionMatrix::from_pairs(&preds, &labels, 2).unwrap();
        let s = m.per_class();
        assert!((s[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((s[1].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.macro_f1() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_and_unpredicted_classes() {
        // Class 2 never appears; class 1 is never predicted.
        let m = ConfusionMatrix::from_pairs(&[0, 0], &[0, 1], 3).unwrap();
        assert_eq!(m.present(), vec![0, 1]);
        assert_eq!(m.per_class()[1].f1, 0.0);
        assert!((m.macro_f1() - (2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mse_example_and_errors() {
        assert_eq!(mse(&[1.0, 2.0], &[0.0, 2.0]).unwrap(), 0.5);
        assert!(mse(&[], &[]).is_err());
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn merging_shards_matches_whole() {
        let p = [0, 1, 2, 2, 1, 0, 1];
        let t = [0, 2, 2, 1, 1, 0, 0];
        let whole = ConfusionMatrix::from_pairs(&p, &t, 3).unwrap();
        let mut a = ConfusionMatrix::from_pairs(&p[..3], &t[..3], 3).unwrap();
        a.merge(&ConfusionMatrix::from_pairs(&p[3..], &t[3..], 3).unwrap()).unwrap();
        assert_eq!(a, whole);
    }

    #[test]
    fn argmax_ties_take_first() {
        assert_eq!(argmax_rows(&[1.0, 3.0, 3.0, 5.0, 0.0, 0.0], 3), vec![1, 0]);
    }
}
