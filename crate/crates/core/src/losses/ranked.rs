//! Rank-coupled losses: every member scores positive categories against
//! negative ones inside one example, so the gradient at a category depends
//! on the whole score vector.
//!
//! Gradients are computed in log space: each softmax-style weight is
//! `exp(term - aggregate)` with `aggregate >= term`, so the exponent is
//! never positive and the weights stay in `(0, 1]` without overflow.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numerics::{log1p_sum_exp, log_sum_exp};
use crate::types::{LogitVector, MultiHotLabel, SoftLabel};

use super::{check_pair, LossError, LossResult};

/// Zero-bounded pairwise rank loss:
/// `log(1 + Σ_pos e^{-s_i}) + log(1 + Σ_neg e^{s_j})`.
///
/// The constant term in each log acts as a built-in zero threshold, which
/// is why [`super::DecisionRule::ZeroThreshold`] is the matching decision
/// rule. Either side of the label may be empty; the corresponding term is
/// then exactly zero.
pub fn zlpr(label: &MultiHotLabel, scores: &LogitVector) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    let s = scores.scores();
    let pos_terms: Vec<f64> = label.positives().map(|i| -s[i]).collect();
    let neg_terms: Vec<f64> = label.negatives().map(|j| s[j]).collect();
    let pos_log = log1p_sum_exp(&pos_terms).expect("scores are finite");
    let neg_log = log1p_sum_exp(&neg_terms).expect("scores are finite");
    let mut gradient = vec![0.0; s.len()];
    for i in label.positives() {
        gradient[i] = -(-s[i] - pos_log).exp();
    }
    for j in label.negatives() {
        gradient[j] = (s[j] - neg_log).exp();
    }
    Ok(LossResult::new(pos_log + neg_log, gradient))
}

/// Thresholded generalization of [`zlpr`]:
/// `log(e^{-t} + Σ_pos e^{-s_i}) + log(e^{t} + Σ_neg e^{s_j})`.
///
/// At `threshold = 0` this is `zlpr` exactly; a nonzero threshold moves the
/// decision boundary the trained scores are pushed across.
pub fn tlpr(
    label: &MultiHotLabel,
    scores: &LogitVector,
    threshold: f64,
) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    if !threshold.is_finite() {
        return Err(LossError::BadParameter {
            name: "threshold",
            requirement: "finite",
            value: threshold,
        });
    }
    let s = scores.scores();
    // Factor the threshold out of each logarithm:
    // log(e^{-t} + Σ e^{-s_i}) = -t + log(1 + Σ e^{t-s_i}). This reuses the
    // same kernel as the zero-threshold loss, so at t = 0 the two agree
    // bit for bit, gradients included.
    let pos_shifted: Vec<f64> = label.positives().map(|i| threshold - s[i]).collect();
    let neg_shifted: Vec<f64> = label.negatives().map(|j| s[j] - threshold).collect();
    let pos_log = -threshold + log1p_sum_exp(&pos_shifted).expect("scores are finite");
    let neg_log = threshold + log1p_sum_exp(&neg_shifted).expect("scores are finite");
    let mut gradient = vec![0.0; s.len()];
    for i in label.positives() {
        gradient[i] = -(-s[i] - pos_log).exp();
    }
    for j in label.negatives() {
        gradient[j] = (s[j] - neg_log).exp();
    }
    Ok(LossResult::new(pos_log + neg_log, gradient))
}

/// Soft-target variant of [`zlpr`]:
/// `log(1 + Σ_l p_l e^{-s_l}) + log(1 + Σ_l (1-p_l) e^{s_l})`.
///
/// Categories with `p_l = 0` (resp. `p_l = 1`) drop out of the first
/// (resp. second) sum, so a 0/1 soft label reproduces `zlpr` exactly. The
/// minimizer over scores satisfies `sigmoid(2 s_l) = p_l` per category.
pub fn soft_zlpr(target: &SoftLabel, scores: &LogitVector) -> Result<LossResult, LossError> {
    if target.label_count() != scores.label_count() {
        return Err(LossError::ShapeMismatch {
            label_count: target.label_count(),
            score_count: scores.label_count(),
        });
    }
    let s = scores.scores();
    let p = target.values();
    let mut pos_terms = Vec::new();
    let mut neg_terms = Vec::new();
    for l in 0..s.len() {
        if p[l] > 0.0 {
            pos_terms.push(p[l].ln() - s[l]);
        }
        if p[l] < 1.0 {
            // ln(1 - p) via log1p for accuracy near p = 1.
            neg_terms.push((-p[l]).ln_1p() + s[l]);
        }
    }
    let pos_log = log1p_sum_exp(&pos_terms).expect("terms are finite");
    let neg_log = log1p_sum_exp(&neg_terms).expect("terms are finite");
    let mut gradient = vec![0.0; s.len()];
    for l in 0..s.len() {
        let mut g = 0.0;
        if p[l] > 0.0 {
            g -= (p[l].ln() - s[l] - pos_log).exp();
        }
        if p[l] < 1.0 {
            g += ((-p[l]).ln_1p() + s[l] - neg_log).exp();
        }
        gradient[l] = g;
    }
    Ok(LossResult::new(pos_log + neg_log, gradient))
}

fn pairwise_log_sum(scores: &LogitVector, pairs: &[(usize, usize)]) -> LossResult {
    // log(1 + Σ_pairs e^{s_j - s_i}) with softmax-style pair weights.
    let s = scores.scores();
    let exponents: Vec<f64> = pairs.iter().map(|&(i, j)| s[j] - s[i]).collect();
    let value = log1p_sum_exp(&exponents).expect("scores are finite");
    let mut gradient = vec![0.0; s.len()];
    for (&(i, j), &e) in pairs.iter().zip(&exponents) {
        let w = (e - value).exp();
        gradient[j] += w;
        gradient[i] -= w;
    }
    LossResult::new(value, gradient)
}

fn positive_negative_pairs(label: &MultiHotLabel) -> Vec<(usize, usize)> {
    let negatives: Vec<usize> = label.negatives().collect();
    let mut pairs = Vec::new();
    for i in label.positives() {
        for &j in &negatives {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Pairwise log-sum-exp rank loss over every positive/negative pair:
/// `log(1 + Σ_pos Σ_neg e^{s_j - s_i})`.
///
/// Unlike [`zlpr`] the constant term is not tied to a per-category
/// threshold, so this loss orders categories without fixing a decision
/// boundary.
pub fn lsep(label: &MultiHotLabel, scores: &LogitVector) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    Ok(pairwise_log_sum(scores, &positive_negative_pairs(label)))
}

/// [`lsep`] restricted to at most `budget` distinct pairs, drawn without
/// replacement from a ChaCha8 stream seeded with `seed`.
///
/// The subsample depends only on the label and the seed — never on the
/// scores — so the restricted loss stays differentiable, and a budget
/// covering every pair reproduces `lsep` bit for bit.
pub fn lsep_sampled(
    label: &MultiHotLabel,
    scores: &LogitVector,
    budget: usize,
    seed: u64,
) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    if budget == 0 {
        return Err(LossError::ZeroSampleBudget);
    }
    let pairs = positive_negative_pairs(label);
    if budget >= pairs.len() {
        return Ok(pairwise_log_sum(scores, &pairs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, pairs.len(), budget).into_vec();
    // Canonical evaluation order keeps the result independent of the order
    // the sampler emitted the indices in.
    picked.sort_unstable();
    let subset: Vec<(usize, usize)> = picked.into_iter().map(|k| pairs[k]).collect();
    Ok(pairwise_log_sum(scores, &subset))
}

/// Margin ranking loss: `Σ_pos Σ_neg max(0, margin + s_j - s_i)`, with the
/// subgradient taken as zero exactly at the hinge kink.
pub fn hinge_rank(
    label: &MultiHotLabel,
    scores: &LogitVector,
    margin: f64,
) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    if !margin.is_finite() {
        return Err(LossError::BadParameter {
            name: "hinge_margin",
            requirement: "finite",
            value: margin,
        });
    }
    let s = scores.scores();
    let mut value = 0.0;
    let mut gradient = vec![0.0; s.len()];
    for (i, j) in positive_negative_pairs(label) {
        let violation = margin + s[j] - s[i];
        if violation > 0.0 {
            value += violation;
            gradient[j] += 1.0;
            gradient[i] -= 1.0;
        }
    }
    Ok(LossResult::new(value, gradient))
}

/// Rank of each category: 1 for the highest score, ties broken toward the
/// lower index. Computed straight from the counting definition
/// `r_i = 1 + #{k : s_k > s_i} + #{k < i : s_k = s_i}`.
fn counting_ranks(s: &[f64]) -> Vec<usize> {
    (0..s.len())
        .map(|i| {
            let higher = s.iter().filter(|&&v| v > s[i]).count();
            let earlier_ties = s[..i].iter().filter(|&&v| v == s[i]).count();
            1 + higher + earlier_ties
        })
        .collect()
}

/// Rank-weighted margin loss:
/// `Σ_pos Σ_neg w(r_i) max(0, margin + s_j - s_i)` with the identity
/// weighting `w(r) = r`, where `r_i` is the rank of positive category `i`
/// among all categories.
///
/// The rank is piecewise constant in the scores, so the gradient treats
/// `w(r_i)` as a constant weight; away from score ties that is exact.
pub fn warp(
    label: &MultiHotLabel,
    scores: &LogitVector,
    margin: f64,
) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    if !margin.is_finite() {
        return Err(LossError::BadParameter {
            name: "warp_margin",
            requirement: "finite",
            value: margin,
        });
    }
    let s = scores.scores();
    let ranks = counting_ranks(s);
    let mut value = 0.0;
    let mut gradient = vec![0.0; s.len()];
    for (i, j) in positive_negative_pairs(label) {
        let violation = margin + s[j] - s[i];
        if violation > 0.0 {
            let weight = ranks[i] as f64;
            value += weight * violation;
            gradient[j] += weight;
            gradient[i] -= weight;
        }
    }
    Ok(LossResult::new(value, gradient))
}

/// Log-form pairwise exponential loss:
/// `log Σ_pos Σ_neg e^{s_j - s_i}`.
///
/// With no positive or no negative categories the sum is empty; the loss is
/// then defined as zero with a zero gradient and the result is marked
/// [`LossResult::degenerate`] so callers can tell the convention applied.
pub fn bpmll_log(label: &MultiHotLabel, scores: &LogitVector) -> Result<LossResult, LossError> {
    check_pair(label, scores)?;
    let s = scores.scores();
    let pairs = positive_negative_pairs(label);
    if pairs.is_empty() {
        return Ok(LossResult {
            value: 0.0,
            gradient: vec![0.0; s.len()],
            degenerate: true,
        });
    }
    let exponents: Vec<f64> = pairs.iter().map(|&(i, j)| s[j] - s[i]).collect();
    let value = log_sum_exp(&exponents).expect("scores are finite");
    let mut gradient = vec![0.0; s.len()];
    for (&(i, j), &e) in pairs.iter().zip(&exponents) {
        let w = (e - value).exp();
        gradient[j] += w;
        gradient[i] -= w;
    }
    Ok(LossResult::new(value, gradient))
}
