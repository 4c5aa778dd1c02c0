//! Exact expected-risk analysis over explicit joint label distributions.
//!
//! For small category counts the joint distribution of a label vector can
//! be written out configuration by configuration, and the expected value of
//! any per-example loss becomes a finite sum. That turns questions like
//! "which score vector minimizes this loss in expectation?" into exact
//! desk-scale computations: this module enumerates them, minimizes them by
//! gradient descent with Armijo backtracking, and reports how the minimizer
//! decomposes into a per-category marginal part plus a coupling part that
//! reads the full joint distribution, not just the marginals — the
//! mechanism by which rank losses pick up label dependence.
//!
//! Conventions: a configuration is a bitmask in which bit `l` (value
//! `1 << l`) is category `l`. In the text format the mask is written as a
//! binary string whose *leftmost* character is category 0, so the file line
//! `10 0.3` gives probability 0.3 to "category 0 on, category 1 off".

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::losses::{evaluate_loss, LossError, LossKind, LossResult, LossSpec};
use crate::numerics::log1p_sum_exp;
use crate::types::{LogitVector, MultiHotLabel};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("joint distributions support at most {max} categories, got {got}")]
    TooManyLabels { max: usize, got: usize },
    #[error("probability table has {got} entries, expected {expected}")]
    WrongTableSize { expected: usize, got: usize },
    #[error("configuration {mask} has negative probability {value}")]
    NegativeProbability { mask: String, value: f64 },
    #[error("probabilities sum to {sum}, expected 1 within 1e-12")]
    NotNormalized { sum: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("marginal probability of category {label} is {value}; log-odds need it strictly inside (0, 1)")]
    DegenerateMarginal { label: usize, value: f64 },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("no convergence after {iterations} iterations (gradient max-norm {gradient_norm:.3e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
        /// Best iterate reached before giving up.
        best: Box<DescentOutcome>,
    },
}

/// Largest label count the exhaustive enumeration accepts (4096
/// configurations).
pub const MAX_JOINT_LABELS: usize = 12;

/// Tolerance on the total probability mass.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// An explicit joint distribution over all `2^L` label configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLabelDistribution {
    label_count: usize,
    /// `probabilities[mask]` is the mass of the configuration `mask`.
    probabilities: Vec<f64>,
}

/// Renders a mask in the text-format convention (leftmost character is
/// category 0).
pub fn format_mask(mask: usize, label_count: usize) -> String {
    (0..label_count)
        .map(|l| if mask >> l & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl JointLabelDistribution {
    /// Wraps a full probability table indexed by configuration mask.
    pub fn new(label_count: usize, probabilities: Vec<f64>) -> Result<Self, RiskError> {
        if label_count == 0 || label_count > MAX_JOINT_LABELS {
            return Err(RiskError::TooManyLabels {
                max: MAX_JOINT_LABELS,
                got: label_count,
            });
        }
        let expected = 1usize << label_count;
        if probabilities.len() != expected {
            return Err(RiskError::WrongTableSize {
                expected,
                got: probabilities.len(),
            });
        }
        for (mask, &value) in probabilities.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(RiskError::NegativeProbability {
                    mask: format_mask(mask, label_count),
                    value,
                });
            }
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(RiskError::NotNormalized { sum });
        }
        Ok(Self {
            label_count,
            probabilities,
        })
    }

    /// Builds the table from `(mask, probability)` pairs; unlisted
    /// configurations get probability zero.
    pub fn from_pairs(label_count: usize, pairs: &[(usize, f64)]) -> Result<Self, RiskError> {
        if label_count == 0 || label_count > MAX_JOINT_LABELS {
            return Err(RiskError::TooManyLabels {
                max: MAX_JOINT_LABELS,
                got: label_count,
            });
        }
        let mut probabilities = vec![0.0; 1usize << label_count];
        for &(mask, value) in pairs {
            if mask >= probabilities.len() {
                return Err(RiskError::WrongTableSize {
                    expected: probabilities.len(),
                    got: mask + 1,
                });
            }
            probabilities[mask] += value;
        }
        Self::new(label_count, probabilities)
    }

    /// A single independent category with `P(on) = p`.
    pub fn bernoulli(p: f64) -> Result<Self, RiskError> {
        Self::new(1, vec![1.0 - p, p])
    }

    /// The canonical two-category dependent example used throughout the
    /// tests and docs: P(11) = 0.5, P(10) = 0.3, P(01) = 0.1, P(00) = 0.1.
    /// Its marginals are 0.8 and 0.6, but the categories are far from
    /// independent.
    pub fn example_coupled_pair() -> Self {
        // mask order: 00, 10, 01, 11
        Self::new(2, vec![0.1, 0.3, 0.1, 0.5]).expect("valid by construction")
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn configuration_count(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probability(&self, mask: usize) -> f64 {
        self.probabilities[mask]
    }

    /// All `(mask, probability)` pairs in mask order.
    pub fn configurations(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probabilities.iter().copied().enumerate()
    }

    /// The label vector of one configuration.
    pub fn label_for_mask(&self, mask: usize) -> MultiHotLabel {
        let bits: Vec<bool> = (0..self.label_count).map(|l| mask >> l & 1 == 1).collect();
        MultiHotLabel::new(bits).expect("label_count >= 1")
    }

    /// Per-category marginal probabilities.
    pub fn marginals(&self) -> Vec<f64> {
        let mut marginals = vec![0.0; self.label_count];
        for (mask, p) in self.configurations() {
            for (l, m) in marginals.iter_mut().enumerate() {
                if mask >> l & 1 == 1 {
                    *m += p;
                }
            }
        }
        marginals
    }

    /// Draws one configuration mask by inverse-CDF sampling.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        for (mask, p) in self.configurations() {
            cumulative += p;
            if u < cumulative {
                return mask;
            }
        }
        // Rounding can leave the total a hair under 1; the draw then
        // belongs to the last configuration with mass.
        self.configurations()
            .filter(|&(_, p)| p > 0.0)
            .map(|(mask, _)| mask)
            .last()
            .expect("distribution has mass")
    }

    /// Parses the text format: a header `L <count>`, then one
    /// `<mask> <probability>` line per configuration with mass. Blank lines
    /// and lines starting with `#` are ignored. The mask is a binary string
    /// of exactly `<count>` characters, leftmost character is category 0.
    pub fn parse(text: &str) -> Result<Self, RiskError> {
        let mut label_count: Option<usize> = None;
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let Some(count) = label_count else {
                let Some(rest) = content.strip_prefix("L ") else {
                    return Err(RiskError::Parse {
                        line,
                        message: format!("expected header 'L <count>', got '{content}'"),
                    });
                };
                let count: usize = rest.trim().parse().map_err(|_| RiskError::Parse {
                    line,
                    message: format!("bad category count '{rest}'"),
                })?;
                label_count = Some(count);
                continue;
            };
            let mut tokens = content.split_whitespace();
            let (Some(mask_text), Some(prob_text), None) =
                (tokens.next(), tokens.next(), tokens.next())
            else {
                return Err(RiskError::Parse {
                    line,
                    message: format!("expected '<mask> <probability>', got '{content}'"),
                });
            };
            if mask_text.len() != count {
                return Err(RiskError::Parse {
                    line,
                    message: format!(
                        "mask '{mask_text}' has {} characters, expected {count}",
                        mask_text.len()
                    ),
                });
            }
            let mut mask = 0usize;
            for (position, ch) in mask_text.chars().enumerate() {
                match ch {
                    '1' => mask |= 1 << position,
                    '0' => {}
                    other => {
                        return Err(RiskError::Parse {
                            line,
                            message: format!("mask character '{other}' is not 0 or 1"),
                        })
                    }
                }
            }
            if !seen.insert(mask) {
                return Err(RiskError::Parse {
                    line,
                    message: format!("duplicate configuration '{mask_text}'"),
                });
            }
            let probability: f64 = prob_text.parse().map_err(|_| RiskError::Parse {
                line,
                message: format!("bad probability '{prob_text}'"),
            })?;
            pairs.push((mask, probability));
        }
        let Some(count) = label_count else {
            return Err(RiskError::Parse {
                line: 1,
                message: "empty file: expected header 'L <count>'".to_string(),
            });
        };
        Self::from_pairs(count, &pairs)
    }

    /// Reads the text format from a file.
    pub fn load(path: &Path) -> Result<Self, RiskError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Expected value and gradient of a per-example loss under the joint:
/// `Σ_config P(config) · loss(config, scores)`. Batch-coupled kinds are
/// refused.
pub fn expected_loss(
    joint: &JointLabelDistribution,
    scores: &LogitVector,
    spec: &LossSpec,
) -> Result<LossResult, RiskError> {
    if spec.kind.is_batch_coupled() {
        return Err(RiskError::Loss(LossError::BatchCoupled { kind: spec.kind }));
    }
    let width = joint.label_count();
    if scores.label_count() != width {
        return Err(RiskError::Loss(LossError::ShapeMismatch {
            label_count: width,
            score_count: scores.label_count(),
        }));
    }
    let mut value = 0.0;
    let mut gradient = vec![0.0; width];
    let mut degenerate = false;
    for (mask, p) in joint.configurations() {
        if p == 0.0 {
            continue;
        }
        let result = evaluate_loss(spec, &joint.label_for_mask(mask), scores)?;
        value += p * result.value;
        for (g, r) in gradient.iter_mut().zip(&result.gradient) {
            *g += p * r;
        }
        degenerate |= result.degenerate;
    }
    Ok(LossResult {
        value,
        gradient,
        degenerate,
    })
}

/// One converged (or best-effort) iterate of [`descend`].
#[derive(Debug, Clone, Serialize)]
pub struct DescentOutcome {
    pub position: Vec<f64>,
    pub value: f64,
    /// Max-norm of the gradient at `position`.
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Default iteration cap for [`descend`] and the risk minimizers.
pub const MAX_DESCENT_ITERATIONS: usize = 100_000;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &g| m.max(g.abs()))
}

/// Gradient descent with Armijo backtracking (sufficient-decrease constant
/// 1e-4, step halving from 1) until the gradient max-norm drops below
/// `tolerance`. The objective returns its value and gradient together.
pub fn descend<F>(
    mut objective: F,
    init: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<DescentOutcome, RiskError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut position = init.to_vec();
    let (mut value, mut gradient) = objective(&position);
    let mut iterations = 0usize;
    loop {
        let gradient_norm = max_norm(&gradient);
        if gradient_norm < tolerance {
            return Ok(DescentOutcome {
                position,
                value,
                gradient_norm,
                iterations,
            });
        }
        if iterations >= max_iterations {
            return Err(RiskError::NoConvergence {
                iterations,
                gradient_norm,
                best: Box::new(DescentOutcome {
                    position,
                    value,
                    gradient_norm,
                    iterations,
                }),
            });
        }
        let squared: f64 = gradient.iter().map(|g| g * g).sum();
        let mut step = 1.0;
        let accepted = loop {
            let candidate: Vec<f64> = position
                .iter()
                .zip(&gradient)
                .map(|(x, g)| x - step * g)
                .collect();
            let (candidate_value, candidate_gradient) = objective(&candidate);
            if candidate_value <= value - ARMIJO_C * step * squared {
                break Some((candidate, candidate_value, candidate_gradient));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        match accepted {
            Some((candidate, candidate_value, candidate_gradient)) => {
                position = candidate;
                value = candidate_value;
                gradient = candidate_gradient;
            }
            None => {
                // No step gives sufficient decrease: numerically stuck.
                return Err(RiskError::NoConvergence {
                    iterations,
                    gradient_norm,
                    best: Box::new(DescentOutcome {
                        position,
                        value,
                        gradient_norm,
                        iterations,
                    }),
                });
            }
        }
        iterations += 1;
    }
}

/// A minimizer of an expected loss, decomposed per category.
///
/// `marginal_logits[l]` is `log(P(y_l = 1) / P(y_l = 0))` — the score the
/// per-category view alone would suggest. For the zero-threshold pairwise
/// rank loss the stationary score satisfies
/// `scores[l] ≈ (marginal_logits[l] + dependence_corrections[l]) / 2`,
/// where the correction is a log-ratio of conditional expectations taken
/// over the *other* categories' configurations. Because that ratio reads
/// the whole joint distribution rather than one marginal, two joints with
/// identical marginals but different coupling produce different minimizers.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub scores: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub marginal_logits: Vec<f64>,
    /// Present only for the zero-threshold pairwise rank loss, and only
    /// when every marginal is strictly inside (0, 1).
    pub dependence_corrections: Option<Vec<f64>>,
}

fn zlpr_dependence_corrections(
    joint: &JointLabelDistribution,
    scores: &[f64],
) -> Option<Vec<f64>> {
    let marginals = joint.marginals();
    if marginals.iter().any(|&p| p <= 0.0 || p >= 1.0) {
        return None;
    }
    let width = joint.label_count();
    // Per configuration: 1 / (1 + Σ_pos e^{-s_i}) and 1 / (1 + Σ_neg e^{s_j}).
    let mut positive_weight = vec![0.0; 1 << width];
    let mut negative_weight = vec![0.0; 1 << width];
    for (mask, p) in joint.configurations() {
        if p == 0.0 {
            continue;
        }
        let pos_terms: Vec<f64> = (0..width)
            .filter(|&l| mask >> l & 1 == 1)
            .map(|l| -scores[l])
            .collect();
        let neg_terms: Vec<f64> = (0..width)
            .filter(|&l| mask >> l & 1 == 0)
            .map(|l| scores[l])
            .collect();
        positive_weight[mask] = (-log1p_sum_exp(&pos_terms).expect("finite scores")).exp();
        negative_weight[mask] = (-log1p_sum_exp(&neg_terms).expect("finite scores")).exp();
    }
    let mut corrections = Vec::with_capacity(width);
    for (l, &marginal) in marginals.iter().enumerate() {
        let mut on = 0.0;
        let mut off = 0.0;
        for (mask, p) in joint.configurations() {
            if p == 0.0 {
                continue;
            }
            if mask >> l & 1 == 1 {
                on += p * positive_weight[mask];
            } else {
                off += p * negative_weight[mask];
            }
        }
        // log of E[φ | y_l = 1] / E[φ' | y_l = 0].
        corrections
            .push((on / marginal).ln() - (off / (1.0 - marginal)).ln());
    }
    Some(corrections)
}

/// Minimizes the expected loss over score vectors by [`descend`], then
/// reports the marginal/dependence decomposition at the minimizer.
pub fn minimize_expected_loss(
    joint: &JointLabelDistribution,
    spec: &LossSpec,
    init: &LogitVector,
    tolerance: f64,
) -> Result<StationarityReport, RiskError> {
    // Surface dimension and kind problems before the descent loop.
    expected_loss(joint, init, spec)?;
    let objective = |s: &[f64]| {
        let result = expected_loss(
            joint,
            &LogitVector::new(s.to_vec()).expect("descent keeps scores finite"),
            spec,
        )
        .expect("validated before descent");
        (result.value, result.gradient)
    };
    let outcome = descend(objective, init.scores(), tolerance, MAX_DESCENT_ITERATIONS)?;
    let marginal_logits = joint
        .marginals()
        .iter()
        .map(|&p| (p / (1.0 - p)).ln())
        .collect();
    let dependence_corrections = if spec.kind == LossKind::Zlpr {
        zlpr_dependence_corrections(joint, &outcome.position)
    } else {
        None
    };
    Ok(StationarityReport {
        scores: outcome.position,
        value: outcome.value,
        gradient_norm: outcome.gradient_norm,
        iterations: outcome.iterations,
        marginal_logits,
        dependence_corrections,
    })
}

/// The closed-form minimizer of the expected binary cross-entropy: the
/// per-category log-odds `log(P(y_l = 1) / P(y_l = 0))`. Exists only when
/// every marginal is strictly inside (0, 1).
pub fn bce_logodds_solution(joint: &JointLabelDistribution) -> Result<Vec<f64>, RiskError> {
    joint
        .marginals()
        .iter()
        .enumerate()
        .map(|(label, &p)| {
            if p <= 0.0 || p >= 1.0 {
                Err(RiskError::DegenerateMarginal { label, value: p })
            } else {
                Ok((p / (1.0 - p)).ln())
            }
        })
        .collect()
}
