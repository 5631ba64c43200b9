//! Confusion matrices and the average probability of correct classification.

use alloc::vec;
use alloc::vec::Vec;

use crate::constellation::Modulation;
use crate::{Error, Result};

/// Counts indexed `[truth][predicted]` over a fixed class order.
///
/// Frames whose features were inadmissible have no prediction; they are
/// tallied in `rejected` for their true class and count as misclassified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: Vec<Modulation>,
    pub counts: Vec<Vec<u64>>,
    pub rejected: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<Modulation>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; k]; k],
            rejected: vec![0; k],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, m: Modulation) -> Option<usize> {
        self.classes.iter().position(|&c| c == m)
    }

    pub fn record(&mut self, truth: usize, predicted: Option<usize>) {
        match predicted {
            Some(p) => self.counts[truth][p] += 1,
            None => self.rejected[truth] += 1,
        }
    }

    /// Frames of class `k`, including rejected ones.
    pub fn class_total(&self, k: usize) -> u64 {
        self.counts[k].iter().sum::<u64>() + self.rejected[k]
    }

    pub fn total(&self) -> u64 {
        (0..self.num_classes()).map(|k| self.class_total(k)).sum()
    }

    pub fn recall(&self, k: usize) -> Option<f64> {
        let n = self.class_total(k);
        (n > 0).then(|| self.counts[k][k] as f64 / n as f64)
    }

    /// `sum_k P(predict k | class k) P(class k)` with the given priors.
    pub fn pcc_with_priors(&self, priors: &[f64]) -> Result<f64> {
        if priors.len() != self.num_classes() {
            return Err(Error::InvalidArgument("one prior per class required".into()));
        }
        let mut total = 0.0;
        for (k, &p) in priors.iter().enumerate() {
            if p > 0.0 {
                total += p * self.recall(k).ok_or(Error::Empty)?;
            }
        }
        Ok(total)
    }

    /// Pcc with equal priors over the classes that have frames.
    pub fn pcc(&self) -> Result<f64> {
        let recalls: Vec<f64> = (0..self.num_classes()).filter_map(|k| self.recall(k)).collect();
        if recalls.is_empty() {
            return Err(Error::Empty);
        }
        Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::InvalidArgument("class order mismatch".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.rejected.iter_mut().zip(&other.rejected).for_each(|(x, y)| *x += y);
        Ok(())
    }
}
