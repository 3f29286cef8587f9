//! The in-memory dataset shared by generators, loaders and the experiment
//! runner.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Activations, concept values and binary labels for `n` examples.
///
/// `concepts` holds every concept column available (supervised or not);
/// `known` lists the columns a concept bottleneck model is allowed to see.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub activations: Matrix,
    pub concepts: Matrix,
    pub known: Vec<usize>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        activations: Matrix,
        concepts: Matrix,
        known: Vec<usize>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n = activations.rows();
        if concepts.rows() != n || labels.len() != n {
            return Err(Error::dims(format!(
                "{} activation rows, {} concept rows, {} labels",
                n,
                concepts.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = known.iter().find(|&&j| j >= concepts.cols()) {
            return Err(Error::dims(format!(
                "known concept column {bad} out of range for {} columns",
                concepts.cols()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
        }
        Ok(Dataset {
            activations,
            concepts,
            known,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Activation dimension.
    pub fn dim(&self) -> usize {
        self.activations.cols()
    }

    pub fn n_concepts(&self) -> usize {
        self.concepts.cols()
    }

    pub fn known_concepts(&self) -> Matrix {
        self.concepts.select_columns(&self.known)
    }

    /// Same rows, different supervised subset.
    pub fn with_known(&self, known: Vec<usize>) -> Result<Self> {
        Dataset::new(
            self.activations.clone(),
            self.concepts.clone(),
            known,
            self.labels.clone(),
        )
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            activations: self.activations.select_rows(idx),
            concepts: self.concepts.select_rows(idx),
            known: self.known.clone(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Shuffled split with `round(train_fraction * n)` training rows.
    pub fn train_test_split(&self, train_fraction: f64, rng: &mut RngStream) -> (Dataset, Dataset) {
        let n = self.len();
        let perm = rng.permutation(n);
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        (self.subset(&perm[..n_train]), self.subset(&perm[n_train..]))
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }
}
