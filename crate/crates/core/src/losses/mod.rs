//! Multi-label training losses and the zero-threshold decision rule.
//!
//! Two families live here. The rank-coupled family ([`zlpr`], [`tlpr`],
//! [`soft_zlpr`], [`lsep`], [`lsep_sampled`], [`hinge_rank`], [`warp`],
//! [`bpmll_log`]) scores positive categories against negative ones inside a
//! single example, so one shared threshold (zero, unless stated otherwise)
//! separates predicted-positive from predicted-negative. The
//! binary-relevance family ([`bce`], [`focal`], [`dice1`], [`dice2_batch`])
//! treats each category as an independent binary problem.
//!
//! Every loss returns its value together with the analytic gradient with
//! respect to the scores; the gradients are exercised against central
//! finite differences by the `gradcheck` module. All internal
//! exponentiation goes through the max-shifted kernels in `numerics`, so
//! scores of arbitrary sign and large magnitude are safe.

mod binary;
mod ranked;

pub use binary::{bce, bce_expanded_reference, dice1, dice2_batch, focal};
pub use ranked::{bpmll_log, hinge_rank, lsep, lsep_sampled, soft_zlpr, tlpr, warp, zlpr};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::types::{DomainError, LogitVector, MultiHotLabel, SoftLabel};

/// Errors raised by loss evaluation and the decision rules.
#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("label has {label_count} categories but scores have {score_count}")]
    ShapeMismatch { label_count: usize, score_count: usize },
    #[error("{kind} couples the whole batch; evaluate it through the batch interface")]
    BatchCoupled { kind: LossKind },
    #[error("{kind} is not handled by the baseline dispatcher")]
    NotABaseline { kind: LossKind },
    #[error("subset expansion handles at most {cap} positives or negatives, got {got}")]
    ExpansionTooLarge { cap: usize, got: usize },
    #[error("top-k rule needs k <= {label_count}, got {k}")]
    TopKOutOfRange { k: usize, label_count: usize },
    #[error("decision threshold must be finite, got {0}")]
    NonFiniteThreshold(f64),
    #[error("loss parameter {name} must be {requirement}, got {value}")]
    BadParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("sample budget must be at least 1")]
    ZeroSampleBudget,
    #[error("batch must contain at least one example")]
    EmptyBatch,
    #[error("batch example {index} has {got} categories, expected {expected}")]
    RaggedBatch {
        index: usize,
        expected: usize,
        got: usize,
    },
}

/// The twelve loss kinds the laboratory can train and analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Zlpr,
    Tlpr,
    SoftZlpr,
    Lsep,
    LsepSampled,
    Bce,
    Focal,
    Dice1,
    Dice2,
    HingeRank,
    Warp,
    BpmllLog,
}

impl LossKind {
    /// Every kind, in the canonical order used by reports.
    pub const ALL: [LossKind; 12] = [
        LossKind::Zlpr,
        LossKind::Tlpr,
        LossKind::SoftZlpr,
        LossKind::Lsep,
        LossKind::LsepSampled,
        LossKind::Bce,
        LossKind::Focal,
        LossKind::Dice1,
        LossKind::Dice2,
        LossKind::HingeRank,
        LossKind::Warp,
        LossKind::BpmllLog,
    ];

    /// Canonical lowercase name, also accepted by [`FromStr`].
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Zlpr => "zlpr",
            LossKind::Tlpr => "tlpr",
            LossKind::SoftZlpr => "soft_zlpr",
            LossKind::Lsep => "lsep",
            LossKind::LsepSampled => "lsep_sampled",
            LossKind::Bce => "bce",
            LossKind::Focal => "focal",
            LossKind::Dice1 => "dice1",
            LossKind::Dice2 => "dice2",
            LossKind::HingeRank => "hinge_rank",
            LossKind::Warp => "warp",
            LossKind::BpmllLog => "bpmll_log",
        }
    }

    /// `dice2` is defined over a whole batch rather than one example.
    pub fn is_batch_coupled(self) -> bool {
        matches!(self, LossKind::Dice2)
    }

    /// Rank-only losses order categories but fix no threshold; training
    /// evaluates them with a top-k decision rule by default.
    pub fn is_rank_only(self) -> bool {
        matches!(
            self,
            LossKind::Lsep
                | LossKind::LsepSampled
                | LossKind::HingeRank
                | LossKind::Warp
                | LossKind::BpmllLog
        )
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zlpr" => Ok(LossKind::Zlpr),
            "tlpr" => Ok(LossKind::Tlpr),
            "soft_zlpr" | "soft-zlpr" => Ok(LossKind::SoftZlpr),
            "lsep" => Ok(LossKind::Lsep),
            "lsep_sampled" | "lsep-sampled" => Ok(LossKind::LsepSampled),
            "bce" => Ok(LossKind::Bce),
            "focal" | "fl" => Ok(LossKind::Focal),
            "dice1" | "dl1" => Ok(LossKind::Dice1),
            "dice2" | "dl2" => Ok(LossKind::Dice2),
            "hinge_rank" | "hinge-rank" | "rl" => Ok(LossKind::HingeRank),
            "warp" => Ok(LossKind::Warp),
            "bpmll_log" | "bpmll" | "bp-mll" => Ok(LossKind::BpmllLog),
            other => Err(format!(
                "unknown loss kind '{other}' (expected one of: {})",
                LossKind::ALL.map(LossKind::name).join(", ")
            )),
        }
    }
}

/// A loss kind plus every hyperparameter any kind consumes. Irrelevant
/// fields are simply ignored, so one spec type can describe a whole
/// comparison run.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Modulating exponent for `focal` (default 2).
    pub focal_gamma: f64,
    /// Smoothing constant for `dice1` (default 1).
    pub dice_gamma: f64,
    /// Smoothing constant for the batch-coupled `dice2` (default 1).
    pub dice_batch_gamma: f64,
    /// Margin for `hinge_rank` (default 1).
    pub hinge_margin: f64,
    /// Margin for `warp` (default 1).
    pub warp_margin: f64,
    /// Score threshold for `tlpr` (default 0, which reduces it to `zlpr`).
    pub threshold: f64,
    /// Maximum number of pairs `lsep_sampled` scores (default 1000).
    pub sample_budget: usize,
    /// Seed for the pair subsample drawn by `lsep_sampled`.
    pub sample_seed: u64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            focal_gamma: 2.0,
            dice_gamma: 1.0,
            dice_batch_gamma: 1.0,
            hinge_margin: 1.0,
            warp_margin: 1.0,
            threshold: 0.0,
            sample_budget: 1000,
            sample_seed: 0,
        }
    }

    /// Checks every hyperparameter, not just the ones `kind` reads, so a
    /// spec validates identically no matter which kind it is later re-aimed
    /// at.
    pub fn validate(&self) -> Result<(), LossError> {
        let finite = |name: &'static str, value: f64| -> Result<(), LossError> {
            if value.is_finite() {
                Ok(())
            } else {
                Err(LossError::BadParameter {
                    name,
                    requirement: "finite",
                    value,
                })
            }
        };
        finite("focal_gamma", self.focal_gamma)?;
        finite("hinge_margin", self.hinge_margin)?;
        finite("warp_margin", self.warp_margin)?;
        finite("threshold", self.threshold)?;
        if self.focal_gamma < 0.0 {
            return Err(LossError::BadParameter {
                name: "focal_gamma",
                requirement: "non-negative",
                value: self.focal_gamma,
            });
        }
        for (name, value) in [
            ("dice_gamma", self.dice_gamma),
            ("dice_batch_gamma", self.dice_batch_gamma),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(LossError::BadParameter {
                    name,
                    requirement: "positive and finite",
                    value,
                });
            }
        }
        if self.sample_budget == 0 {
            return Err(LossError::ZeroSampleBudget);
        }
        Ok(())
    }
}

/// Value and per-score gradient of one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// `d value / d score_l`, one entry per category.
    pub gradient: Vec<f64>,
    /// Set when the loss fell back to its empty-pair-set convention (today
    /// only `bpmll_log` with no positives or no negatives), so callers can
    /// tell a genuine zero from a degenerate one.
    pub degenerate: bool,
}

impl LossResult {
    fn new(value: f64, gradient: Vec<f64>) -> Self {
        Self {
            value,
            gradient,
            degenerate: false,
        }
    }
}

/// Value and exact per-logit gradient of a batch objective.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLossResult {
    pub value: f64,
    /// `d value / d score_{k,l}` for example `k`, category `l`. For
    /// averaged per-example losses the `1/B` factor is already folded in.
    pub gradients: Vec<Vec<f64>>,
}

/// A batch of score vectors with their labels, all over the same category
/// set. This is the unit `dice2` and the trainer's backward pass consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBatch {
    logits: Vec<LogitVector>,
    labels: Vec<MultiHotLabel>,
}

impl ScoreBatch {
    pub fn new(logits: Vec<LogitVector>, labels: Vec<MultiHotLabel>) -> Result<Self, LossError> {
        if logits.is_empty() || labels.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        if logits.len() != labels.len() {
            return Err(LossError::RaggedBatch {
                index: logits.len().min(labels.len()),
                expected: logits.len(),
                got: labels.len(),
            });
        }
        let width = logits[0].label_count();
        for (index, (s, y)) in logits.iter().zip(&labels).enumerate() {
            if s.label_count() != width {
                return Err(LossError::RaggedBatch {
                    index,
                    expected: width,
                    got: s.label_count(),
                });
            }
            if y.label_count() != width {
                return Err(LossError::RaggedBatch {
                    index,
                    expected: width,
                    got: y.label_count(),
                });
            }
        }
        Ok(Self { logits, labels })
    }

    pub fn example_count(&self) -> usize {
        self.logits.len()
    }

    pub fn label_count(&self) -> usize {
        self.logits[0].label_count()
    }

    pub fn logits(&self) -> &[LogitVector] {
        &self.logits
    }

    pub fn labels(&self) -> &[MultiHotLabel] {
        &self.labels
    }
}

/// How raw scores become a hard prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionRule {
    /// Predict category `l` iff `s_l > 0` (strict). The rank-coupled losses
    /// are built so this fixed threshold is the right one.
    ZeroThreshold,
    /// Predict category `l` iff `s_l > t` (strict).
    Threshold(f64),
    /// Predict the `k` highest-scoring categories; score ties broken toward
    /// the lower category index.
    TopK(usize),
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionRule::ZeroThreshold => f.write_str("zero_threshold"),
            DecisionRule::Threshold(t) => write!(f, "threshold={t}"),
            DecisionRule::TopK(k) => write!(f, "top_k={k}"),
        }
    }
}

impl FromStr for DecisionRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "zero_threshold" || s == "zero" {
            return Ok(DecisionRule::ZeroThreshold);
        }
        if let Some(raw) = s.strip_prefix("threshold=") {
            let t: f64 = raw
                .parse()
                .map_err(|_| format!("bad threshold value '{raw}'"))?;
            return Ok(DecisionRule::Threshold(t));
        }
        if let Some(raw) = s.strip_prefix("top_k=") {
            let k: usize = raw.parse().map_err(|_| format!("bad top-k value '{raw}'"))?;
            return Ok(DecisionRule::TopK(k));
        }
        Err(format!(
            "unknown decision rule '{s}' (expected zero_threshold, threshold=<t>, or top_k=<k>)"
        ))
    }
}

pub(crate) fn check_pair(label: &MultiHotLabel, scores: &LogitVector) -> Result<(), LossError> {
    if label.label_count() != scores.label_count() {
        return Err(LossError::ShapeMismatch {
            label_count: label.label_count(),
            score_count: scores.label_count(),
        });
    }
    Ok(())
}

/// Turns scores into a hard prediction under `rule`.
pub fn decide(scores: &LogitVector, rule: DecisionRule) -> Result<MultiHotLabel, LossError> {
    let s = scores.scores();
    let bits = match rule {
        DecisionRule::ZeroThreshold => s.iter().map(|&v| v > 0.0).collect(),
        DecisionRule::Threshold(t) => {
            if !t.is_finite() {
                return Err(LossError::NonFiniteThreshold(t));
            }
            s.iter().map(|&v| v > t).collect()
        }
        DecisionRule::TopK(k) => {
            let label_count = s.len();
            if k > label_count {
                return Err(LossError::TopKOutOfRange { k, label_count });
            }
            let mut order: Vec<usize> = (0..label_count).collect();
            order.sort_by(|&a, &b| {
                s[b].partial_cmp(&s[a])
                    .expect("scores are finite")
                    .then(a.cmp(&b))
            });
            let mut bits = vec![false; label_count];
            for &i in order.iter().take(k) {
                bits[i] = true;
            }
            bits
        }
    };
    Ok(MultiHotLabel::new(bits).expect("scores are non-empty"))
}

/// Evaluates any per-example loss kind described by `spec`.
///
/// `dice2` is refused here (it has no per-example value); use
/// [`evaluate_batch`]. A `soft_zlpr` spec scores the hard label embedded as
/// a 0/1 soft target, which coincides with `zlpr` exactly.
pub fn evaluate_loss(
    spec: &LossSpec,
    label: &MultiHotLabel,
    scores: &LogitVector,
) -> Result<LossResult, LossError> {
    spec.validate()?;
    match spec.kind {
        LossKind::Zlpr => zlpr(label, scores),
        LossKind::Tlpr => tlpr(label, scores, spec.threshold),
        LossKind::SoftZlpr => soft_zlpr(&SoftLabel::from_hard(label), scores),
        LossKind::Bce => bce(label, scores),
        LossKind::Dice2 => Err(LossError::BatchCoupled { kind: spec.kind }),
        _ => baseline_loss(spec, label, scores),
    }
}

/// Dispatches the baseline kinds (`focal`, `dice1`, `hinge_rank`, `warp`,
/// `bpmll_log`, `lsep`, `lsep_sampled`) with the hyperparameters in `spec`.
pub fn baseline_loss(
    spec: &LossSpec,
    label: &MultiHotLabel,
    scores: &LogitVector,
) -> Result<LossResult, LossError> {
    spec.validate()?;
    match spec.kind {
        LossKind::Focal => focal(label, scores, spec.focal_gamma),
        LossKind::Dice1 => dice1(label, scores, spec.dice_gamma),
        LossKind::HingeRank => hinge_rank(label, scores, spec.hinge_margin),
        LossKind::Warp => warp(label, scores, spec.warp_margin),
        LossKind::BpmllLog => bpmll_log(label, scores),
        LossKind::Lsep => lsep(label, scores),
        LossKind::LsepSampled => {
            lsep_sampled(label, scores, spec.sample_budget, spec.sample_seed)
        }
        kind => Err(LossError::NotABaseline { kind }),
    }
}

/// Evaluates the batch objective for `spec`: the batch-mean of a
/// per-example loss, or `dice2` taken over the whole batch. The returned
/// gradients are the exact derivatives of the returned value.
pub fn evaluate_batch(spec: &LossSpec, batch: &ScoreBatch) -> Result<BatchLossResult, LossError> {
    spec.validate()?;
    if spec.kind == LossKind::Dice2 {
        return dice2_batch(batch, spec.dice_batch_gamma);
    }
    let scale = 1.0 / batch.example_count() as f64;
    let mut value = 0.0;
    let mut gradients = Vec::with_capacity(batch.example_count());
    for (scores, label) in batch.logits().iter().zip(batch.labels()) {
        let mut result = evaluate_loss(spec, label, scores)?;
        value += result.value * scale;
        for g in &mut result.gradient {
            *g *= scale;
        }
        gradients.push(result.gradient);
    }
    Ok(BatchLossResult { value, gradients })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits(s: &[f64]) -> LogitVector {
        LogitVector::new(s.to_vec()).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in LossKind::ALL {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
        }
        assert_eq!("fl".parse::<LossKind>().unwrap(), LossKind::Focal);
        assert_eq!("dl1".parse::<LossKind>().unwrap(), LossKind::Dice1);
        assert_eq!("dl2".parse::<LossKind>().unwrap(), LossKind::Dice2);
        assert_eq!("rl".parse::<LossKind>().unwrap(), LossKind::HingeRank);
        assert!("zlrp".parse::<LossKind>().is_err());
    }

    #[test]
    fn spec_validation_catches_bad_parameters() {
        let mut spec = LossSpec::new(LossKind::Focal);
        assert!(spec.validate().is_ok());
        spec.focal_gamma = -1.0;
        assert!(matches!(
            spec.validate(),
            Err(LossError::BadParameter { name: "focal_gamma", .. })
        ));
        let mut spec = LossSpec::new(LossKind::Dice1);
        spec.dice_gamma = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = LossSpec::new(LossKind::LsepSampled);
        spec.sample_budget = 0;
        assert_eq!(spec.validate(), Err(LossError::ZeroSampleBudget));
    }

    #[test]
    fn zero_threshold_is_strict() {
        let label = decide(&logits(&[0.1, 0.0, -0.2]), DecisionRule::ZeroThreshold).unwrap();
        assert_eq!(label.to_indices(), vec![0]);
    }

    #[test]
    fn top_k_breaks_ties_toward_lower_index() {
        let label = decide(&logits(&[1.0, 2.0, 1.0]), DecisionRule::TopK(2)).unwrap();
        assert_eq!(label.to_indices(), vec![0, 1]);
        let none = decide(&logits(&[1.0, 2.0]), DecisionRule::TopK(0)).unwrap();
        assert_eq!(none.positive_count(), 0);
        assert_eq!(
            decide(&logits(&[1.0]), DecisionRule::TopK(2)),
            Err(LossError::TopKOutOfRange { k: 2, label_count: 1 })
        );
    }

    #[test]
    fn explicit_threshold_rule() {
        let label = decide(&logits(&[0.4, 0.6]), DecisionRule::Threshold(0.5)).unwrap();
        assert_eq!(label.to_indices(), vec![1]);
        assert!(decide(&logits(&[0.0]), DecisionRule::Threshold(f64::NAN)).is_err());
    }

    #[test]
    fn decision_rules_parse_and_print() {
        for rule in [
            DecisionRule::ZeroThreshold,
            DecisionRule::Threshold(0.25),
            DecisionRule::TopK(3),
        ] {
            assert_eq!(rule.to_string().parse::<DecisionRule>().unwrap(), rule);
        }
        assert!("top_k=x".parse::<DecisionRule>().is_err());
    }

    #[test]
    fn dispatcher_refuses_batch_coupled_kind() {
        let spec = LossSpec::new(LossKind::Dice2);
        let label = MultiHotLabel::from_indices(2, &[0]).unwrap();
        assert_eq!(
            evaluate_loss(&spec, &label, &logits(&[0.0, 0.0])),
            Err(LossError::BatchCoupled { kind: LossKind::Dice2 })
        );
        assert!(matches!(
            baseline_loss(&LossSpec::new(LossKind::Zlpr), &label, &logits(&[0.0, 0.0])),
            Err(LossError::NotABaseline { kind: LossKind::Zlpr })
        ));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let label = MultiHotLabel::from_indices(3, &[0]).unwrap();
        assert_eq!(
            zlpr(&label, &logits(&[0.0, 0.0])),
            Err(LossError::ShapeMismatch { label_count: 3, score_count: 2 })
        );
    }

    #[test]
    fn batch_mean_scales_value_and_gradient() {
        let spec = LossSpec::new(LossKind::Bce);
        let batch = ScoreBatch::new(
            vec![logits(&[0.0]), logits(&[0.0])],
            vec![
                MultiHotLabel::from_indices(1, &[0]).unwrap(),
                MultiHotLabel::from_indices(1, &[]).unwrap(),
            ],
        )
        .unwrap();
        let out = evaluate_batch(&spec, &batch).unwrap();
        assert!((out.value - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((out.gradients[0][0] + 0.25).abs() < 1e-15);
        assert!((out.gradients[1][0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn score_batch_rejects_ragged_shapes() {
        let ok = ScoreBatch::new(
            vec![logits(&[0.0, 1.0])],
            vec![MultiHotLabel::from_indices(2, &[0]).unwrap()],
        );
        assert!(ok.is_ok());
        let ragged = ScoreBatch::new(
            vec![logits(&[0.0, 1.0]), logits(&[0.0])],
            vec![
                MultiHotLabel::from_indices(2, &[0]).unwrap(),
                MultiHotLabel::from_indices(1, &[0]).unwrap(),
            ],
        );
        assert!(matches!(ragged, Err(LossError::RaggedBatch { index: 1, .. })));
        assert_eq!(
            ScoreBatch::new(vec![], vec![]),
            Err(LossError::EmptyBatch)
        );
    }
}
