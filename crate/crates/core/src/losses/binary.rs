//! Binary-relevance losses: each category is scored as its own binary
//! problem. `dice2` is the one exception — its soft Dice statistics pool
//! over the batch dimension, so it only exists as a batch objective.

use crate::numerics::{log1p_sum_exp, softplus, stable_sigmoid};
use crate::types::{LogitVector, MultiHotLabel};

use super::{check_pair, BatchLossResult, LossError, LossResult, ScoreBatch};

/// Sum of per-category binary cross-entropies in softplus form:
/// `Σ_pos softplus(-s_i) + Σ_neg softplus(s_j)`, gradient
/// `sigmoid(s_l) - y_l`.
pub fn bce(label: &MultiHotLabel, scores: &LogitVector) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    let s = scores.scores();
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(s.len());
    for (l, &sl) in s.iter().enumerate() {
        if label.is_positive(l) {
            value += softplus(-sl);
        } else {
            value += softplus(sl);
        }
        gradient.push(stable_sigmoid(sl) - label.as_f64(l));
    }
    Ok(LossResult::new(value, gradient))
}

/// Cap on the positive/negative set size [`bce_expanded_reference`] will
/// enumerate (2^20 subset sums per side).
pub const EXPANSION_CAP: usize = 20;

/// The same value as [`bce`], computed by the opposite algebraic route:
/// expanding each product `Π (1 + e^{∓s})` into a sum over all non-empty
/// subsets, `log(1 + Σ_{S ⊆ pos, S ≠ ∅} e^{-Σ_{i∈S} s_i}) + (mirror for
/// negatives)`.
///
/// Exponential in the label counts, hence the cap; it exists purely as an
/// independent check that the per-category view and the subset-interaction
/// view of `bce` agree.
pub fn bce_expanded_reference(
    label: &MultiHotLabel,
    scores: &LogitVector,
) -> Result<f64, LossError> {
    check_pair(label, scores)?;
    let s = scores.scores();
    let positives: Vec<f64> = label.positives().map(|i| s[i]).collect();
    let negatives: Vec<f64> = label.negatives().map(|j| s[j]).collect();
    for side in [&positives, &negatives] {
        if side.len() > EXPANSION_CAP {
            return Err(LossError::ExpansionTooLarge {
                cap: EXPANSION_CAP,
                got: side.len(),
            });
        }
    }
    let subset_log = |side: &[f64], sign: f64| -> f64 {
        let mut sums = Vec::with_capacity((1usize << side.len()) - 1);
        for mask in 1usize..(1 << side.len()) {
            let mut total = 0.0;
            for (bit, &v) in side.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    total += sign * v;
                }
            }
            sums.push(total);
        }
        log1p_sum_exp(&sums).expect("scores are finite")
    };
    Ok(subset_log(&positives, -1.0) + subset_log(&negatives, 1.0))
}

/// Focal loss: `-Σ_pos (1-p_l)^γ log p_l - Σ_neg p_l^γ log(1-p_l)` with
/// `p = sigmoid(s)`. Log-probabilities come from softplus, so saturated
/// scores stay finite.
pub fn focal(
    label: &MultiHotLabel,
    scores: &LogitVector,
    gamma: f64,
) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(LossError::BadParameter {
            name: "focal_gamma",
            requirement: "non-negative and finite",
            value: gamma,
        });
    }
    let s = scores.scores();
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(s.len());
    for (l, &sl) in s.iter().enumerate() {
        let p = stable_sigmoid(sl);
        let q = stable_sigmoid(-sl); // 1 - p without cancellation
        if label.is_positive(l) {
            let log_p = -softplus(-sl);
            value += -q.powf(gamma) * log_p;
            gradient.push(gamma * p * q.powf(gamma) * log_p - q.powf(gamma + 1.0));
        } else {
            let log_q = -softplus(sl);
            value += -p.powf(gamma) * log_q;
            gradient.push(-gamma * p.powf(gamma) * q * log_q + p.powf(gamma + 1.0));
        }
    }
    Ok(LossResult::new(value, gradient))
}

/// Per-example soft Dice loss with smoothing `gamma`:
/// positives cost `1 - (2p_l + γ) / (p_l² + 1 + γ)`, negatives cost
/// `1 - γ / (p_l² + γ)`, `p = sigmoid(s)`.
pub fn dice1(
    label: &MultiHotLabel,
    scores: &LogitVector,
    gamma: f64,
) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(LossError::BadParameter {
            name: "dice_gamma",
            requirement: "positive and finite",
            value: gamma,
        });
    }
    let s = scores.scores();
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(s.len());
    for (l, &sl) in s.iter().enumerate() {
        let p = stable_sigmoid(sl);
        let dp = p * (1.0 - p);
        if label.is_positive(l) {
            let den = p * p + 1.0 + gamma;
            value += 1.0 - (2.0 * p + gamma) / den;
            // d/dp [-(2p+γ)/(p²+1+γ)] = 2(p-1)(p+1+γ)/den²
            gradient.push(2.0 * (p - 1.0) * (p + 1.0 + gamma) / (den * den) * dp);
        } else {
            let den = p * p + gamma;
            value += 1.0 - gamma / den;
            gradient.push(2.0 * gamma * p / (den * den) * dp);
        }
    }
    Ok(LossResult::new(value, gradient))
}

/// Batch-coupled soft Dice loss: for each category `l`, Dice statistics are
/// pooled over the whole batch,
/// `Σ_l [1 - (2 Σ_k p_{k,l} y_{k,l} + γ) / (Σ_k p_{k,l}² + Σ_k y_{k,l} + γ)]`,
/// so every example's gradient at category `l` depends on the rest of the
/// batch. The value lies in `[0, L]`.
pub fn dice2_batch(batch: &ScoreBatch, gamma: f64) -> Result<BatchLossResult, LossError> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(LossError::BadParameter {
            name: "dice_batch_gamma",
            requirement: "positive and finite",
            value: gamma,
        });
    }
    let b = batch.example_count();
    let width = batch.label_count();
    let probabilities: Vec<Vec<f64>> = batch
        .logits()
        .iter()
        .map(|s| s.scores().iter().map(|&v| stable_sigmoid(v)).collect())
        .collect();
    let mut value = 0.0;
    let mut gradients = vec![vec![0.0; width]; b];
    for l in 0..width {
        let mut numerator = gamma;
        let mut denominator = gamma;
        for (row, lab) in probabilities.iter().zip(batch.labels()) {
            let p = row[l];
            let y = lab.as_f64(l);
            numerator += 2.0 * p * y;
            denominator += p * p + y;
        }
        value += 1.0 - numerator / denominator;
        for k in 0..b {
            let p = probabilities[k][l];
            let y = batch.labels()[k].as_f64(l);
            // d/dp_k [-(N/D)] with N, D the pooled statistics above.
            let dterm_dp =
                (2.0 * p * numerator - 2.0 * y * denominator) / (denominator * denominator);
            gradients[k][l] = dterm_dp * p * (1.0 - p);
        }
    }
    Ok(BatchLossResult { value, gradients })
}
