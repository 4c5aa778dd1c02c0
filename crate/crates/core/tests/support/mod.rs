//! Brute-force reference implementations shared by the integration tests.
//! Everything here is written independently of the library's internals —
//! count-based ranks, literal set arithmetic — so a bug would have to be
//! made twice to go unnoticed.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One evaluated example in plain form.
#[derive(Debug, Clone)]
pub struct NaiveRecord {
    pub truth: Vec<bool>,
    pub predicted: Vec<bool>,
    pub scores: Vec<f64>,
}

/// 1-based ranks by counting: a category is outranked by every strictly
/// higher score and by equal scores at smaller indices.
pub fn naive_rank(scores: &[f64]) -> Vec<usize> {
    (0..scores.len())
        .map(|i| {
            1 + scores
                .iter()
                .enumerate()
                .filter(|&(k, &v)| v > scores[i] || (v == scores[i] && k < i))
                .count()
        })
        .collect()
}

pub fn naive_subset_accuracy(records: &[NaiveRecord]) -> f64 {
    let hits = records.iter().filter(|r| r.truth == r.predicted).count();
    hits as f64 / records.len() as f64
}

pub fn naive_example_f1(records: &[NaiveRecord]) -> f64 {
    let mut total = 0.0;
    for r in records {
        let t = r.truth.iter().filter(|&&b| b).count();
        let p = r.predicted.iter().filter(|&&b| b).count();
        if t + p == 0 {
            total += 1.0;
            continue;
        }
        let overlap = r
            .truth
            .iter()
            .zip(&r.predicted)
            .filter(|(&a, &b)| a && b)
            .count();
        total += 2.0 * overlap as f64 / (t + p) as f64;
    }
    total / records.len() as f64
}

/// `(macro_f1, micro_f1)` with the all-empty-label convention of scoring 1.
pub fn naive_macro_micro(records: &[NaiveRecord], width: usize) -> (f64, f64) {
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        if 2 * tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let mut macro_sum = 0.0;
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for l in 0..width {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for r in records {
            match (r.predicted[l], r.truth[l]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        macro_sum += f1(tp, fp, fn_);
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
    }
    (macro_sum / width as f64, f1(tp_all, fp_all, fn_all))
}

/// `Some((mean, skipped))`, or `None` when every record lacks positives.
pub fn naive_average_precision(records: &[NaiveRecord]) -> Option<(f64, usize)> {
    let mut total = 0.0;
    let mut used = 0;
    for r in records {
        let positives: Vec<usize> = (0..r.truth.len()).filter(|&l| r.truth[l]).collect();
        if positives.is_empty() {
            continue;
        }
        let ranks = naive_rank(&r.scores);
        let mut sum = 0.0;
        for &l in &positives {
            let better = positives
                .iter()
                .filter(|&&o| ranks[o] <= ranks[l])
                .count();
            sum += better as f64 / ranks[l] as f64;
        }
        total += sum / positives.len() as f64;
        used += 1;
    }
    if used == 0 {
        None
    } else {
        Some((total / used as f64, records.len() - used))
    }
}

/// `Some((mean, skipped))`, or `None` when every record is degenerate.
pub fn naive_ranking_loss(records: &[NaiveRecord]) -> Option<(f64, usize)> {
    let mut total = 0.0;
    let mut used = 0;
    for r in records {
        let positives: Vec<usize> = (0..r.truth.len()).filter(|&l| r.truth[l]).collect();
        let negatives: Vec<usize> = (0..r.truth.len()).filter(|&l| !r.truth[l]).collect();
        if positives.is_empty() || negatives.is_empty() {
            continue;
        }
        let ranks = naive_rank(&r.scores);
        let violations = positives
            .iter()
            .flat_map(|&i| negatives.iter().map(move |&j| (i, j)))
            .filter(|&(i, j)| ranks[i] > ranks[j])
            .count();
        total += violations as f64 / (positives.len() * negatives.len()) as f64;
        used += 1;
    }
    if used == 0 {
        None
    } else {
        Some((total / used as f64, records.len() - used))
    }
}

/// A random batch. Scores are quantized to one decimal half the time so
/// ties actually occur.
pub fn random_records(rng: &mut ChaCha8Rng, max_records: usize, max_labels: usize) -> Vec<NaiveRecord> {
    let width = rng.gen_range(1..=max_labels);
    let count = rng.gen_range(1..=max_records);
    let quantize = rng.gen_bool(0.5);
    (0..count)
        .map(|_| {
            let scores: Vec<f64> = (0..width)
                .map(|_| {
                    let s: f64 = rng.gen_range(-3.0..3.0);
                    if quantize {
                        (s * 10.0).round() / 10.0
                    } else {
                        s
                    }
                })
                .collect();
            NaiveRecord {
                truth: (0..width).map(|_| rng.gen_bool(0.4)).collect(),
                predicted: (0..width).map(|_| rng.gen_bool(0.4)).collect(),
                scores,
            }
        })
        .collect()
}
