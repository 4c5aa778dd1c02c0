//! Evaluation metrics for multi-label predictions.
//!
//! Two groups: set metrics over hard predictions (subset accuracy and the
//! F1 family) and rank metrics over raw scores (average precision and
//! ranking loss). Throughout, rank 1 is the highest score and score ties
//! break toward the lower category index.
//!
//! Degenerate-record conventions, chosen so a perfect predictor always
//! scores perfectly: an example with empty truth and empty prediction
//! counts as F1 = 1; a label never present and never predicted counts as
//! per-label F1 = 1; records with no positive truth are skipped by average
//! precision, records with no positive or no negative truth are skipped by
//! ranking loss, and both skip counts are reported.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{LogitVector, MultiHotLabel};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metrics need at least one evaluation record")]
    Empty,
    #[error("records disagree on category count: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("{metric} is undefined: all {skipped} records were skipped")]
    Undefined { metric: &'static str, skipped: usize },
}

/// Ranks of each category for one score vector: `ranks[l]` is in
/// `1..=label_count`, rank 1 is the highest score, and equal scores are
/// ranked in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankAssignment {
    ranks: Vec<usize>,
}

impl RankAssignment {
    pub fn rank_of(&self, category: usize) -> usize {
        self.ranks[category]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }
}

/// Everything the metrics need about one evaluated example.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    truth: MultiHotLabel,
    predicted: MultiHotLabel,
    scores: LogitVector,
}

impl EvaluationRecord {
    pub fn new(
        truth: MultiHotLabel,
        predicted: MultiHotLabel,
        scores: LogitVector,
    ) -> Result<Self, MetricsError> {
        let width = truth.label_count();
        if predicted.label_count() != width {
            return Err(MetricsError::ShapeMismatch(width, predicted.label_count()));
        }
        if scores.label_count() != width {
            return Err(MetricsError::ShapeMismatch(width, scores.label_count()));
        }
        Ok(Self {
            truth,
            predicted,
            scores,
        })
    }

    pub fn truth(&self) -> &MultiHotLabel {
        &self.truth
    }

    pub fn predicted(&self) -> &MultiHotLabel {
        &self.predicted
    }

    pub fn scores(&self) -> &LogitVector {
        &self.scores
    }
}

/// The six headline metrics plus the skip counters for the two rank
/// metrics. All metric values lie in `[0, 1]`; `rank_loss` is the only one
/// where lower is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sub_acc: f64,
    pub mlc_f1: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub avg_prec: f64,
    pub rank_loss: f64,
    pub avg_prec_skipped: usize,
    pub rank_loss_skipped: usize,
}

/// Per-label F1 scores with their macro and micro aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelF1Summary {
    /// One F1 per category, in category order.
    pub per_label: Vec<f64>,
    /// Unweighted mean of `per_label`.
    pub macro_f1: f64,
    /// F1 of the counts pooled over all categories.
    pub micro_f1: f64,
}

fn check_records(records: &[EvaluationRecord]) -> Result<usize, MetricsError> {
    let first = records.first().ok_or(MetricsError::Empty)?;
    let width = first.truth.label_count();
    for r in records {
        if r.truth.label_count() != width {
            return Err(MetricsError::ShapeMismatch(width, r.truth.label_count()));
        }
    }
    Ok(width)
}

/// Ranks the categories of one score vector (sort route: indices ordered by
/// descending score, ties by ascending index).
pub fn rank_categories(scores: &LogitVector) -> RankAssignment {
    let s = scores.scores();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0; s.len()];
    for (position, &category) in order.iter().enumerate() {
        ranks[category] = position + 1;
    }
    RankAssignment { ranks }
}

/// Fraction of records whose prediction matches the truth exactly.
pub fn subset_accuracy(records: &[EvaluationRecord]) -> Result<f64, MetricsError> {
    check_records(records)?;
    let hits = records
        .iter()
        .filter(|r| r.predicted.bits() == r.truth.bits())
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Example-averaged F1: mean over records of
/// `2 |pred ∩ truth| / (|pred| + |truth|)`, with an empty-against-empty
/// record counting as 1.
pub fn example_f1(records: &[EvaluationRecord]) -> Result<f64, MetricsError> {
    check_records(records)?;
    let mut total = 0.0;
    for r in records {
        let truth = r.truth.positive_count();
        let predicted = r.predicted.positive_count();
        if truth + predicted == 0 {
            total += 1.0;
            continue;
        }
        let overlap = r
            .truth
            .positives()
            .filter(|&l| r.predicted.is_positive(l))
            .count();
        total += 2.0 * overlap as f64 / (truth + predicted) as f64;
    }
    Ok(total / records.len() as f64)
}

/// Per-label F1 with macro and micro aggregates. A label with no true and
/// no predicted positives anywhere scores 1; micro F1 falls back to 1 in
/// the same all-empty situation.
pub fn label_f1s(records: &[EvaluationRecord]) -> Result<LabelF1Summary, MetricsError> {
    let width = check_records(records)?;
    let f1_from_counts = |tp: usize, fp: usize, fn_: usize| -> f64 {
        let denominator = 2 * tp + fp + fn_;
        if denominator == 0 {
            1.0
        } else {
            2.0 * tp as f64 / denominator as f64
        }
    };
    let mut pooled = (0usize, 0usize, 0usize);
    let mut per_label = Vec::with_capacity(width);
    for l in 0..width {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for r in records {
            match (r.predicted.is_positive(l), r.truth.is_positive(l)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        pooled = (pooled.0 + tp, pooled.1 + fp, pooled.2 + fn_);
        per_label.push(f1_from_counts(tp, fp, fn_));
    }
    let macro_f1 = per_label.iter().sum::<f64>() / width as f64;
    let micro_f1 = f1_from_counts(pooled.0, pooled.1, pooled.2);
    Ok(LabelF1Summary {
        per_label,
        macro_f1,
        micro_f1,
    })
}

/// Rank-based average precision: for each record with at least one positive
/// category, the mean over its positives `λ` of
/// `#{positives ranked at or above λ} / rank(λ)`. Records with no positive
/// truth are skipped and counted; returns the mean and the skip count.
pub fn average_precision(records: &[EvaluationRecord]) -> Result<(f64, usize), MetricsError> {
    check_records(records)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for r in records {
        let positives: Vec<usize> = r.truth.positives().collect();
        if positives.is_empty() {
            continue;
        }
        let ranks = rank_categories(&r.scores);
        let mut record_total = 0.0;
        for &l in &positives {
            let rank = ranks.rank_of(l);
            let at_or_above = positives
                .iter()
                .filter(|&&other| ranks.rank_of(other) <= rank)
                .count();
            record_total += at_or_above as f64 / rank as f64;
        }
        total += record_total / positives.len() as f64;
        used += 1;
    }
    let skipped = records.len() - used;
    if used == 0 {
        return Err(MetricsError::Undefined {
            metric: "average precision",
            skipped,
        });
    }
    Ok((total / used as f64, skipped))
}

/// Ranking loss: for each record with at least one positive and one
/// negative category, the fraction of positive/negative pairs ranked in the
/// wrong order, normalized by the pair count. Degenerate records (all or no
/// categories positive) are skipped and counted.
pub fn ranking_loss_metric(records: &[EvaluationRecord]) -> Result<(f64, usize), MetricsError> {
    check_records(records)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for r in records {
        let positives: Vec<usize> = r.truth.positives().collect();
        let negatives: Vec<usize> = r.truth.negatives().collect();
        if positives.is_empty() || negatives.is_empty() {
            continue;
        }
        let ranks = rank_categories(&r.scores);
        let mut violations = 0usize;
        for &i in &positives {
            for &j in &negatives {
                if ranks.rank_of(i) > ranks.rank_of(j) {
                    violations += 1;
                }
            }
        }
        total += violations as f64 / (positives.len() * negatives.len()) as f64;
        used += 1;
    }
    let skipped = records.len() - used;
    if used == 0 {
        return Err(MetricsError::Undefined {
            metric: "ranking loss",
            skipped,
        });
    }
    Ok((total / used as f64, skipped))
}

/// Computes every metric in one pass and assembles the report.
pub fn aggregate_report(records: &[EvaluationRecord]) -> Result<MetricsReport, MetricsError> {
    let sub_acc = subset_accuracy(records)?;
    let mlc_f1 = example_f1(records)?;
    let labels = label_f1s(records)?;
    let (avg_prec, avg_prec_skipped) = average_precision(records)?;
    let (rank_loss, rank_loss_skipped) = ranking_loss_metric(records)?;
    Ok(MetricsReport {
        sub_acc,
        mlc_f1,
        micro_f1: labels.micro_f1,
        macro_f1: labels.macro_f1,
        avg_prec,
        rank_loss,
        avg_prec_skipped,
        rank_loss_skipped,
    })
}
