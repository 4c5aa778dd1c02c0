//! Label and score containers shared across the crate.
//!
//! Construction is the validation boundary: once a [`MultiHotLabel`],
//! [`LogitVector`], or [`SoftLabel`] exists, its entries are known to be
//! well-formed (finite scores, probabilities inside `[0, 1]`, at least one
//! category), so the loss and metric kernels never re-check element values.

use thiserror::Error;

/// Validation failures raised when building the containers in this module.
#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("label vector must have at least one category")]
    EmptyLabel,
    #[error("label index {index} out of range for {label_count} categories")]
    IndexOutOfRange { index: usize, label_count: usize },
    #[error("positive label indices must be strictly increasing at position {position}")]
    UnsortedIndices { position: usize },
    #[error("score {value} at position {index} is not finite")]
    NonFiniteScore { index: usize, value: f64 },
    #[error("probability {value} at position {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
}

/// A binary relevance vector over a fixed category set: entry `l` says
/// whether category `l` applies to the example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiHotLabel {
    bits: Vec<bool>,
}

impl MultiHotLabel {
    /// Wraps a bit vector; at least one category is required.
    pub fn new(bits: Vec<bool>) -> Result<Self, DomainError> {
        if bits.is_empty() {
            return Err(DomainError::EmptyLabel);
        }
        Ok(Self { bits })
    }

    /// Builds a label of `label_count` categories from strictly increasing
    /// positive indices; this is the on-disk representation.
    pub fn from_indices(label_count: usize, positives: &[usize]) -> Result<Self, DomainError> {
        if label_count == 0 {
            return Err(DomainError::EmptyLabel);
        }
        let mut bits = vec![false; label_count];
        let mut previous: Option<usize> = None;
        for (position, &index) in positives.iter().enumerate() {
            if index >= label_count {
                return Err(DomainError::IndexOutOfRange { index, label_count });
            }
            if previous.is_some_and(|p| p >= index) {
                return Err(DomainError::UnsortedIndices { position });
            }
            previous = Some(index);
            bits[index] = true;
        }
        Ok(Self { bits })
    }

    /// Number of categories (the fixed dimension, not the positive count).
    pub fn label_count(&self) -> usize {
        self.bits.len()
    }

    /// Whether category `i` is positive. Panics if `i` is out of range.
    pub fn is_positive(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// Category `i` as `0.0` or `1.0`.
    pub fn as_f64(&self, i: usize) -> f64 {
        if self.bits[i] {
            1.0
        } else {
            0.0
        }
    }

    /// Indices of positive categories, ascending.
    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Indices of negative categories, ascending.
    pub fn negatives(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (!b).then_some(i))
    }

    /// Number of positive categories.
    pub fn positive_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Sorted positive indices (the serialization form).
    pub fn to_indices(&self) -> Vec<usize> {
        self.positives().collect()
    }

    /// Raw bit view.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Raw model scores for one example, one real per category. All entries are
/// finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector {
    scores: Vec<f64>,
}

impl LogitVector {
    pub fn new(scores: Vec<f64>) -> Result<Self, DomainError> {
        if scores.is_empty() {
            return Err(DomainError::EmptyLabel);
        }
        for (index, &value) in scores.iter().enumerate() {
            if !value.is_finite() {
                return Err(DomainError::NonFiniteScore { index, value });
            }
        }
        Ok(Self { scores })
    }

    pub fn label_count(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// A soft relevance vector: per-category target probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel {
    values: Vec<f64>,
}

impl SoftLabel {
    pub fn new(values: Vec<f64>) -> Result<Self, DomainError> {
        if values.is_empty() {
            return Err(DomainError::EmptyLabel);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(DomainError::ProbabilityOutOfRange { index, value });
            }
        }
        Ok(Self { values })
    }

    /// Embeds a hard label as the corresponding 0/1 soft label.
    pub fn from_hard(label: &MultiHotLabel) -> Self {
        Self {
            values: (0..label.label_count()).map(|i| label.as_f64(i)).collect(),
        }
    }

    pub fn label_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
