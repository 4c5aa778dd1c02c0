//! Finite-difference verification of the analytic loss gradients.
//!
//! For each loss kind this module draws random labeled score vectors,
//! evaluates the analytic gradient, and compares it coordinate-wise against
//! the central-difference gradient from `numerics`. Hinge-family draws are
//! resampled away from their kinks (and, for the rank-weighted loss, away
//! from score ties) because a subgradient is not expected to match a
//! two-sided difference exactly at a non-differentiable point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::losses::{
    dice2_batch, evaluate_loss, soft_zlpr, LossKind, LossSpec, ScoreBatch,
};
use crate::numerics::{finite_difference_gradient, symmetric_relative_error, DEFAULT_FD_STEP};
use crate::types::{LogitVector, MultiHotLabel, SoftLabel};

/// Knobs for one gradient-check sweep.
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Random instances per loss kind.
    pub trials: usize,
    /// Central-difference step.
    pub step: f64,
    /// Maximum accepted `|a-n| / max(1, |a|, |n|)` per coordinate.
    pub tolerance: f64,
    /// Coordinates with analytic magnitude below this are held to the same
    /// bound in absolute terms instead.
    pub near_zero: f64,
    /// Seed for the instance sampler.
    pub seed: u64,
    /// Largest category count sampled.
    pub max_labels: usize,
    /// Debug knob: added to every analytic gradient entry before the
    /// comparison. Zero in normal operation; a nonzero value deliberately
    /// corrupts the analytic route so the failure path can be exercised.
    pub perturbation: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            step: DEFAULT_FD_STEP,
            tolerance: 1e-4,
            near_zero: 1e-6,
            seed: 0,
            max_labels: 8,
            perturbation: 0.0,
        }
    }
}

/// Outcome of a sweep over one loss kind.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub kind: LossKind,
    pub trials: usize,
    /// Worst per-coordinate disagreement seen, in the symmetric relative
    /// metric.
    pub max_error: f64,
    /// Coordinates that exceeded the tolerance.
    pub failures: usize,
    pub passed: bool,
}

struct Comparison {
    max_error: f64,
    failures: usize,
}

fn compare(analytic: &[f64], numeric: &[f64], cfg: &GradCheckConfig) -> Comparison {
    let mut max_error = 0.0_f64;
    let mut failures = 0usize;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let a = a + cfg.perturbation;
        let error = symmetric_relative_error(a, n);
        max_error = max_error.max(error);
        let ok = if a.abs() < cfg.near_zero {
            (a - n).abs() <= cfg.near_zero
        } else {
            error <= cfg.tolerance
        };
        if !ok {
            failures += 1;
        }
    }
    Comparison { max_error, failures }
}

fn random_label<R: Rng>(rng: &mut R, label_count: usize) -> MultiHotLabel {
    let bits: Vec<bool> = (0..label_count).map(|_| rng.gen_bool(0.5)).collect();
    MultiHotLabel::new(bits).expect("label_count >= 1")
}

fn random_scores<R: Rng>(rng: &mut R, label_count: usize) -> Vec<f64> {
    (0..label_count).map(|_| rng.gen_range(-4.0..4.0)).collect()
}

/// Hinge kinks sit where `margin + s_j - s_i = 0`; two-sided differences
/// straddle them, so draws land at least this far away.
const KINK_CLEARANCE: f64 = 1e-3;

fn away_from_kinks(label: &MultiHotLabel, s: &[f64], margin: f64) -> bool {
    for i in label.positives() {
        for j in label.negatives() {
            if (margin + s[j] - s[i]).abs() <= KINK_CLEARANCE {
                return false;
            }
        }
    }
    true
}

fn away_from_ties(s: &[f64]) -> bool {
    for (i, &a) in s.iter().enumerate() {
        for &b in &s[i + 1..] {
            if (a - b).abs() <= KINK_CLEARANCE {
                return false;
            }
        }
    }
    true
}

fn check_per_example(kind: LossKind, cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Comparison {
    let mut worst = Comparison { max_error: 0.0, failures: 0 };
    for trial in 0..cfg.trials {
        let label_count = rng.gen_range(1..=cfg.max_labels);
        let label = random_label(rng, label_count);
        let mut spec = LossSpec::new(kind);
        match kind {
            LossKind::Tlpr => spec.threshold = rng.gen_range(-2.0..2.0),
            LossKind::LsepSampled => {
                spec.sample_budget = rng.gen_range(1..=label_count * label_count);
                spec.sample_seed = cfg.seed ^ trial as u64;
            }
            _ => {}
        }
        let mut s = random_scores(rng, label_count);
        if matches!(kind, LossKind::HingeRank | LossKind::Warp) {
            let margin = if kind == LossKind::HingeRank {
                spec.hinge_margin
            } else {
                spec.warp_margin
            };
            while !away_from_kinks(&label, &s, margin)
                || (kind == LossKind::Warp && !away_from_ties(&s))
            {
                s = random_scores(rng, label_count);
            }
        }
        let analytic = if kind == LossKind::SoftZlpr {
            // Genuinely soft targets: the hard-label embedding would only
            // retest the zero-threshold loss.
            let target = SoftLabel::new(
                (0..label_count).map(|_| rng.gen_range(0.02..0.98)).collect(),
            )
            .expect("values in range");
            let result = soft_zlpr(&target, &LogitVector::new(s.clone()).unwrap())
                .expect("valid instance");
            let numeric = finite_difference_gradient(
                |x| {
                    soft_zlpr(&target, &LogitVector::new(x.to_vec()).unwrap())
                        .expect("valid probe")
                        .value
                },
                &s,
                cfg.step,
            )
            .expect("finite probe");
            let c = compare(&result.gradient, &numeric, cfg);
            worst.max_error = worst.max_error.max(c.max_error);
            worst.failures += c.failures;
            continue;
        } else {
            evaluate_loss(&spec, &label, &LogitVector::new(s.clone()).unwrap())
                .expect("valid instance")
        };
        let numeric = finite_difference_gradient(
            |x| {
                evaluate_loss(&spec, &label, &LogitVector::new(x.to_vec()).unwrap())
                    .expect("valid probe")
                    .value
            },
            &s,
            cfg.step,
        )
        .expect("finite probe");
        let c = compare(&analytic.gradient, &numeric, cfg);
        worst.max_error = worst.max_error.max(c.max_error);
        worst.failures += c.failures;
    }
    worst
}

fn check_batch_coupled(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Comparison {
    let mut worst = Comparison { max_error: 0.0, failures: 0 };
    for _ in 0..cfg.trials {
        let label_count = rng.gen_range(1..=cfg.max_labels);
        let batch_size = rng.gen_range(1..=4);
        let labels: Vec<MultiHotLabel> = (0..batch_size)
            .map(|_| random_label(rng, label_count))
            .collect();
        let flat: Vec<f64> = (0..batch_size * label_count)
            .map(|_| rng.gen_range(-4.0..4.0))
            .collect();
        let build = |flat: &[f64]| -> ScoreBatch {
            let logits: Vec<LogitVector> = flat
                .chunks(label_count)
                .map(|chunk| LogitVector::new(chunk.to_vec()).unwrap())
                .collect();
            ScoreBatch::new(logits, labels.clone()).expect("consistent batch")
        };
        let analytic = dice2_batch(&build(&flat), 1.0).expect("valid instance");
        let flat_analytic: Vec<f64> = analytic.gradients.into_iter().flatten().collect();
        let numeric = finite_difference_gradient(
            |x| dice2_batch(&build(x), 1.0).expect("valid probe").value,
            &flat,
            cfg.step,
        )
        .expect("finite probe");
        let c = compare(&flat_analytic, &numeric, cfg);
        worst.max_error = worst.max_error.max(c.max_error);
        worst.failures += c.failures;
    }
    worst
}

/// Runs the sweep for one loss kind.
pub fn check_kind(kind: LossKind, cfg: &GradCheckConfig) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let outcome = if kind.is_batch_coupled() {
        check_batch_coupled(cfg, &mut rng)
    } else {
        check_per_example(kind, cfg, &mut rng)
    };
    GradCheckReport {
        kind,
        trials: cfg.trials,
        max_error: outcome.max_error,
        failures: outcome.failures,
        passed: outcome.failures == 0,
    }
}

/// Runs the sweep for every loss kind, in canonical order.
pub fn check_all(cfg: &GradCheckConfig) -> Vec<GradCheckReport> {
    LossKind::ALL.iter().map(|&k| check_kind(k, cfg)).collect()
}
