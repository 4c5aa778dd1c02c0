//! Score-space divergences for consistency-style regularization.
//!
//! The rank-coupled losses in this crate pull each score toward half the
//! log-odds of its category, so `sigmoid(2s)` is the natural score-to-
//! probability map. The divergences below compare two score vectors through
//! that map; both are computed entirely from softplus differences, so
//! `1 - sigmoid` is never formed explicitly and saturated scores lose no
//! precision.

use thiserror::Error;

use crate::numerics::{softplus, stable_sigmoid};
use crate::types::{LogitVector, MultiHotLabel, SoftLabel};

#[derive(Debug, Error, PartialEq)]
pub enum RegularizationError {
    #[error("score vectors differ in length: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("label smoothing must lie in [0, 0.5), got {0}")]
    BadEpsilon(f64),
}

/// Maps scores to per-category probabilities via `p_l = sigmoid(2 s_l)`,
/// the transform under which a trained score vector reads as a soft label.
pub fn score_to_probability(scores: &LogitVector) -> SoftLabel {
    let values: Vec<f64> = scores
        .scores()
        .iter()
        .map(|&s| stable_sigmoid(2.0 * s))
        .collect();
    SoftLabel::new(values).expect("sigmoid output lies in [0, 1]")
}

fn check_shapes(a: &LogitVector, b: &LogitVector) -> Result<(), RegularizationError> {
    if a.label_count() != b.label_count() {
        return Err(RegularizationError::ShapeMismatch(
            a.label_count(),
            b.label_count(),
        ));
    }
    Ok(())
}

/// Kullback–Leibler divergence between the per-category Bernoulli
/// distributions induced by two score vectors, summed over categories:
///
/// `Σ_l [ 2 p_l (s_l - s'_l) + softplus(2 s'_l) - softplus(2 s_l) ]`
///
/// with `p = sigmoid(2s)`. Non-negative; zero exactly when the score
/// vectors coincide.
pub fn kl_divergence(scores: &LogitVector, other: &LogitVector) -> Result<f64, RegularizationError> {
    check_shapes(scores, other)?;
    let mut total = 0.0;
    for (&s, &t) in scores.scores().iter().zip(other.scores()) {
        let p = stable_sigmoid(2.0 * s);
        // log((1-p)/(1-p')) = softplus(2s') - softplus(2s).
        total += 2.0 * p * (s - t) + softplus(2.0 * t) - softplus(2.0 * s);
    }
    Ok(total)
}

/// Symmetric divergence `Σ_l 2 (p_l - p'_l)(s_l - s'_l)` with
/// `p = sigmoid(2s)`; algebraically the sum of the two one-sided
/// KL divergences, and the form used as a consistency penalty.
pub fn symmetric_divergence(
    scores: &LogitVector,
    other: &LogitVector,
) -> Result<f64, RegularizationError> {
    check_shapes(scores, other)?;
    let mut total = 0.0;
    for (&s, &t) in scores.scores().iter().zip(other.scores()) {
        total += 2.0 * (stable_sigmoid(2.0 * s) - stable_sigmoid(2.0 * t)) * (s - t);
    }
    Ok(total)
}

/// Replaces hard targets by `1 - ε` (positives) and `ε` (negatives),
/// producing a soft label suitable for the soft rank loss.
pub fn smooth_labels(label: &MultiHotLabel, epsilon: f64) -> Result<SoftLabel, RegularizationError> {
    if !epsilon.is_finite() || !(0.0..0.5).contains(&epsilon) {
        return Err(RegularizationError::BadEpsilon(epsilon));
    }
    let values: Vec<f64> = (0..label.label_count())
        .map(|l| {
            if label.is_positive(l) {
                1.0 - epsilon
            } else {
                epsilon
            }
        })
        .collect();
    Ok(SoftLabel::new(values).expect("smoothed values lie in [0, 1]"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits(s: &[f64]) -> LogitVector {
        LogitVector::new(s.to_vec()).unwrap()
    }

    #[test]
    fn probability_map_examples() {
        let p = score_to_probability(&logits(&[0.0]));
        assert!((p.values()[0] - 0.5).abs() < 1e-15);
        // sigmoid(2 * ln 2) = 4/5.
        let p = score_to_probability(&logits(&[2.0_f64.ln()]));
        assert!((p.values()[0] - 0.8).abs() < 1e-15, "p = {}", p.values()[0]);
        let p = score_to_probability(&logits(&[1000.0, -1000.0]));
        assert_eq!(p.values(), &[1.0, 0.0]);
    }

    #[test]
    fn kl_frozen_value_and_identity_of_indiscernibles() {
        let v = kl_divergence(&logits(&[0.0]), &logits(&[1.0])).unwrap();
        assert!((v - 0.4337808304830272).abs() < 1e-12, "kl = {v}");
        let s = logits(&[0.3, -2.0, 14.0]);
        assert_eq!(kl_divergence(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn kl_is_positive_away_from_the_diagonal() {
        let s = logits(&[0.5, -1.0]);
        for eps in [1e-3, 1e-2, 0.1, 1.0] {
            let t = logits(&[0.5 + eps, -1.0 - 0.5 * eps]);
            let v = kl_divergence(&s, &t).unwrap();
            assert!(v > 0.0, "kl = {v} at eps = {eps}");
        }
        // Shrinking the perturbation shrinks the divergence.
        let close = kl_divergence(&s, &logits(&[0.5 + 1e-3, -1.0])).unwrap();
        let far = kl_divergence(&s, &logits(&[0.5 + 1e-1, -1.0])).unwrap();
        assert!(close < far);
    }

    #[test]
    fn symmetric_divergence_frozen_value_and_symmetry() {
        let a = logits(&[0.0]);
        let b = logits(&[1.0]);
        let v = symmetric_divergence(&a, &b).unwrap();
        assert!((v - 0.7615941559557649).abs() < 1e-12, "sym = {v}");
        assert_eq!(
            symmetric_divergence(&a, &b).unwrap(),
            symmetric_divergence(&b, &a).unwrap()
        );
        assert_eq!(symmetric_divergence(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_divergence_is_the_two_sided_kl() {
        let a = logits(&[0.4, -1.7, 2.2, 0.0]);
        let b = logits(&[-0.3, 0.9, 2.0, -5.0]);
        let sym = symmetric_divergence(&a, &b).unwrap();
        let two_sided = kl_divergence(&a, &b).unwrap() + kl_divergence(&b, &a).unwrap();
        assert!(
            (sym - two_sided).abs() < 1e-10,
            "sym {sym} vs kl sum {two_sided}"
        );
    }

    #[test]
    fn divergences_reject_mismatched_shapes() {
        let a = logits(&[0.0]);
        let b = logits(&[0.0, 1.0]);
        assert_eq!(
            kl_divergence(&a, &b),
            Err(RegularizationError::ShapeMismatch(1, 2))
        );
        assert!(symmetric_divergence(&a, &b).is_err());
    }

    #[test]
    fn label_smoothing_examples() {
        let label = MultiHotLabel::from_indices(3, &[1]).unwrap();
        let soft = smooth_labels(&label, 0.1).unwrap();
        assert_eq!(soft.values(), &[0.1, 0.9, 0.1]);
        let hard = smooth_labels(&label, 0.0).unwrap();
        assert_eq!(hard.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(
            smooth_labels(&label, 0.5),
            Err(RegularizationError::BadEpsilon(0.5))
        );
        assert!(smooth_labels(&label, -0.1).is_err());
    }
}
